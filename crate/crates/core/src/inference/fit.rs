use rayon::prelude::*;

use super::likelihood::LikelihoodEvaluator;
use super::optimize::{minimize_bfgs, BfgsOptions};
use super::reparam::{correlation_from_unconstrained, unconstrained_from_correlation};
use crate::ava::ObservationSet;
use crate::discretize::Grid2D;
use crate::error::{Error, Result};
use crate::prior::{HyperParams, ModelKind, PriorScale};

#[derive(Clone, Debug, Default)]
pub struct FitOptions {
    pub bfgs: BfgsOptions,
    /// Also fit every replicate on its own when the batch has more than one.
    pub per_replicate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateFit {
    pub estimate: HyperParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    /// Maximiser of the total log-likelihood over the batch.
    pub estimate: HyperParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Total log-likelihood after each iteration.
    pub history: Vec<f64>,
    pub replicates: Vec<ReplicateFit>,
}

/// Free parameters, in order: `ln κ²`, `ln λ²` (noisy data only), the
/// unconstrained correlations above, then below for Models 2 and 3. With
/// direct observations `τ²` is profiled out instead.
struct Layout {
    kind: ModelKind,
    direct: bool,
    template: HyperParams,
}

impl Layout {
    fn new(kind: ModelKind, direct: bool, init: &HyperParams) -> Result<Self> {
        init.validate()?;
        if kind != ModelKind::Model1 && init.rho_below.is_none() {
            return Err(Error::arg("missing parameter `rho_below`"));
        }
        let mut template = init.clone();
        if !direct {
            template.scale = PriorScale::Lambda2(init.lambda2());
            template.sigma2 = 1.0;
        }
        Ok(Layout { kind, direct, template })
    }

    fn pack(&self) -> Result<Vec<f64>> {
        let h = &self.template;
        let mut theta = vec![h.kappa2.ln()];
        if !self.direct {
            theta.push(h.lambda2().ln());
        }
        theta.extend(unconstrained_from_correlation(h.rho_above)?);
        if self.kind != ModelKind::Model1 {
            theta.extend(unconstrained_from_correlation(h.rho_below.unwrap_or([0.0; 3]))?);
        }
        Ok(theta)
    }

    fn unpack(&self, theta: &[f64]) -> HyperParams {
        let mut h = self.template.clone();
        h.kappa2 = theta[0].exp();
        let mut k = 1;
        if self.direct {
            h.scale = PriorScale::Tau2(1.0);
        } else {
            h.scale = PriorScale::Lambda2(theta[1].exp());
            k = 2;
        }
        h.rho_above = correlation_from_unconstrained([theta[k], theta[k + 1], theta[k + 2]]);
        if self.kind != ModelKind::Model1 {
            h.rho_below = Some(correlation_from_unconstrained([theta[k + 3], theta[k + 4], theta[k + 5]]));
        }
        h
    }
}

fn fit_batch(obs: &[ObservationSet], kind: ModelKind, grid: &Grid2D, init: &HyperParams, opts: &BfgsOptions) -> Result<FitResult> {
    let ev = LikelihoodEvaluator::new(obs, kind, *grid)?;
    let direct = ev.is_direct();
    let ev = ev.profile_tau2(direct);
    let layout = Layout::new(kind, direct, init)?;
    let norm = (ev.replicates() * ev.n_obs()) as f64;
    let objective = |theta: &[f64]| ev.evaluate(&layout.unpack(theta)).map(|e| -e.loglik / norm);
    let out = minimize_bfgs(objective, &layout.pack()?, opts)?;

    let mut estimate = layout.unpack(&out.x);
    let eval = ev.evaluate(&estimate)?;
    if let Some(tau2) = eval.profiled_tau2 {
        estimate.scale = PriorScale::Tau2(tau2);
    }
    if let Some(s2) = eval.profiled_sigma2 {
        estimate.sigma2 = s2;
    }
    Ok(FitResult {
        estimate,
        loglik: eval.loglik,
        iterations: out.iterations,
        converged: out.converged,
        history: out.history.iter().map(|f| -f * norm).collect(),
        replicates: Vec::new(),
    })
}

/// Maximum-likelihood hyperparameters from independent replicates.
pub fn fit_ml(obs_batch: &[ObservationSet], kind: ModelKind, grid: &Grid2D, init: &HyperParams) -> Result<FitResult> {
    fit_ml_with(obs_batch, kind, grid, init, &FitOptions { per_replicate: true, ..Default::default() })
}

pub fn fit_ml_with(
    obs_batch: &[ObservationSet],
    kind: ModelKind,
    grid: &Grid2D,
    init: &HyperParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    if obs_batch.is_empty() {
        return Err(Error::arg("fit_ml needs at least one observation set"));
    }
    let mut result = fit_batch(obs_batch, kind, grid, init, &opts.bfgs)?;
    if opts.per_replicate && obs_batch.len() > 1 {
        result.replicates = obs_batch
            .par_iter()
            .map(|o| {
                let r = fit_batch(std::slice::from_ref(o), kind, grid, init, &opts.bfgs)?;
                Ok(ReplicateFit { estimate: r.estimate, loglik: r.loglik, iterations: r.iterations, converged: r.converged })
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendSearch {
    pub lo: f64,
    pub hi: f64,
    /// Number of evenly spaced points in the initial scan.
    pub coarse: usize,
    /// Width of the final golden-section bracket.
    pub tol: f64,
}

impl BlendSearch {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let s = BlendSearch { lo, hi, coarse: 9, tol: 1e-3 * (hi - lo) };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0) || !(self.hi > self.lo) || !self.hi.is_finite() {
            return Err(Error::arg(format!("invalid blend-range search interval [{}, {}]", self.lo, self.hi)));
        }
        if self.coarse < 3 || !(self.tol > 0.0) {
            return Err(Error::arg("blend-range search needs at least 3 coarse points and a positive tolerance"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlendRangeEstimate {
    pub range: f64,
    pub loglik: f64,
    /// `(range, loglik)` on the coarse scan.
    pub profile: Vec<(f64, f64)>,
}

/// Maximises the likelihood over the blend range with every other parameter
/// held at `fixed`: a coarse scan, then golden-section search around the
/// best scan point.
pub fn estimate_blend_range(
    obs: &ObservationSet,
    fixed: &HyperParams,
    kind: ModelKind,
    grid: &Grid2D,
    search: &BlendSearch,
) -> Result<BlendRangeEstimate> {
    search.validate()?;
    if kind == ModelKind::Model1 {
        return Err(Error::arg("Model 1 has no blend range"));
    }
    let ev = LikelihoodEvaluator::new(std::slice::from_ref(obs), kind, *grid)?;
    let at = |r: f64| -> Result<f64> {
        let mut h = fixed.clone();
        h.blend_range = r;
        Ok(ev.evaluate(&h)?.loglik)
    };
    let step = (search.hi - search.lo) / (search.coarse - 1) as f64;
    let mut profile = Vec::with_capacity(search.coarse);
    for k in 0..search.coarse {
        let r = search.lo + step * k as f64;
        profile.push((r, at(r)?));
    }
    let best = (0..profile.len())
        .max_by(|&a, &b| profile[a].1.total_cmp(&profile[b].1))
        .unwrap_or(0);
    let (mut range, mut loglik) = profile[best];

    let mut a = profile[best.saturating_sub(1)].0;
    let mut b = profile[(best + 1).min(profile.len() - 1)].0;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = at(c)?;
    let mut fd = at(d)?;
    while b - a > search.tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = at(d)?;
        }
    }
    for (r, l) in [(c, fc), (d, fd)] {
        if l > loglik {
            range = r;
            loglik = l;
        }
    }
    Ok(BlendRangeEstimate { range, loglik, profile })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ava::{assemble_observation_operator, observe, ObservationScheme};
    use crate::inference::{sample_gmrf, Factorization};
    use crate::prior::{build_model, Interface};

    #[test]
    fn layout_round_trip() {
        let mut h = HyperParams::new(0.2, PriorScale::Tau2(4.0));
        h.sigma2 = 0.5;
        h.rho_above = [0.3, -0.2, 0.5];
        h.rho_below = Some([0.1, 0.2, -0.3]);
        let l = Layout::new(ModelKind::Model2, false, &h).unwrap();
        let back = l.unpack(&l.pack().unwrap());
        assert!((back.kappa2 - 0.2).abs() < 1e-14);
        assert!((back.lambda2() - 2.0).abs() < 1e-13);
        for k in 0..3 {
            assert!((back.rho_above[k] - h.rho_above[k]).abs() < 1e-12);
            assert!((back.rho_below.unwrap()[k] - h.rho_below.unwrap()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_search_interval() {
        assert!(BlendSearch::new(5.0, 1.0).is_err());
        assert!(BlendSearch::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn identity_truth_stays_near_zero() {
        let g = Grid2D::new(12, 12, 1.0).unwrap();
        let truth = HyperParams::new(0.3, PriorScale::Tau2(5.0));
        let model = build_model(ModelKind::Model1, &truth, &g).unwrap();
        let f = Factorization::new(model.q()).unwrap();
        let op = Arc::new(assemble_observation_operator(&g, &ObservationScheme::Identity, None, 0.0).unwrap());
        let obs: Vec<_> = (0..4).map(|s| observe(&op, &sample_gmrf(&f, s), 0).unwrap()).collect();
        let fit = fit_ml(&obs, ModelKind::Model1, &g, &truth).unwrap();
        assert!(fit.converged);
        assert!(fit.estimate.rho_above.iter().all(|r| r.abs() < 0.15), "{:?}", fit.estimate.rho_above);
        assert!(fit.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(fit.replicates.len(), 4);
    }

    #[test]
    fn blend_profile_is_finite() {
        let g = Grid2D::new(6, 10, 1.0).unwrap();
        let mut h = HyperParams::new(0.3, PriorScale::Tau2(5.0));
        h.rho_above = [0.5, 0.2, 0.1];
        h.rho_below = Some([-0.5, 0.2, 0.1]);
        h.interface = Some(Interface::Flat { depth: 5.0 });
        let model = build_model(ModelKind::Model2, &h, &g).unwrap();
        let f = Factorization::new(model.q()).unwrap();
        let op = Arc::new(assemble_observation_operator(&g, &ObservationScheme::Identity, None, 0.2).unwrap());
        let obs = observe(&op, &sample_gmrf(&f, 3), 4).unwrap();
        h.sigma2 = 0.2;
        let est = estimate_blend_range(&obs, &h, ModelKind::Model2, &g, &BlendSearch::new(0.0, 8.0).unwrap()).unwrap();
        assert_eq!(est.profile.len(), 9);
        assert!(est.profile.iter().all(|(_, l)| l.is_finite()));
        assert!(est.profile.iter().all(|(_, l)| *l <= est.loglik + 1e-9));
        assert!(estimate_blend_range(&obs, &h, ModelKind::Model1, &g, &BlendSearch::new(0.0, 8.0).unwrap()).is_err());
    }
}
