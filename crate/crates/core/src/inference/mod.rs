//! Factorisation, sampling, kriging, likelihood and fitting.

mod factor;
mod fit;
mod likelihood;
mod metrics;
mod optimize;
mod posterior;
mod reparam;

pub use factor::{FactorCache, Factorization, SymbolicFactor};
pub use fit::{
    estimate_blend_range, fit_ml, fit_ml_with, BlendRangeEstimate, BlendSearch, FitOptions, FitResult, ReplicateFit,
};
pub use likelihood::{log_likelihood, LikelihoodEval, LikelihoodEvaluator};
pub use metrics::{count_modes, gaussian_kde, relative_error, relative_error_scoped, silverman_bandwidth, ErrorScope};
pub use optimize::{central_gradient, minimize_bfgs, BfgsOptions, BfgsOutcome};
pub use posterior::{posterior_mean, posterior_mean_with, sample_gmrf, PosteriorResult};
pub use reparam::{correlation_from_unconstrained, unconstrained_from_correlation};
