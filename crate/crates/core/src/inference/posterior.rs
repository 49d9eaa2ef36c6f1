use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::factor::{Factorization, SymbolicFactor};
use crate::ava::ObservationSet;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Draw from `N(0, Q⁻¹)` using a ChaCha20 stream seeded with `seed`.
pub fn sample_gmrf(f: &Factorization, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    f.sample(&mut rng)
}

#[derive(Clone, Debug)]
pub struct PosteriorResult {
    pub mean: Vec<f64>,
    pub q_post: SparseMatrix,
    pub relative_error: Option<f64>,
}

/// `Q_post = Q + GᵀG / σ²`, `E(m | d) = Q_post⁻¹ Gᵀd / σ²`.
pub fn posterior_mean(q_prior: &SparseMatrix, obs: &ObservationSet) -> Result<PosteriorResult> {
    posterior_mean_with(q_prior, obs, None)
}

/// As [`posterior_mean`], reusing a symbolic analysis of `Q_post`'s pattern.
pub fn posterior_mean_with(
    q_prior: &SparseMatrix,
    obs: &ObservationSet,
    symbolic: Option<&SymbolicFactor>,
) -> Result<PosteriorResult> {
    let op = &obs.operator;
    if !(op.sigma2 > 0.0) {
        return Err(Error::domain("posterior mean needs a positive noise variance"));
    }
    if q_prior.nrows() != op.n_latent() || obs.d.len() != op.n_obs() {
        return Err(Error::arg(format!(
            "prior of size {} does not match an operator of shape {}x{} with {} data",
            q_prior.nrows(),
            op.n_obs(),
            op.n_latent(),
            obs.d.len()
        )));
    }
    let q_post = q_prior.add(&op.gtg().scale(1.0 / op.sigma2))?;
    let f = match symbolic {
        Some(s) => s.factorize(&q_post)?,
        None => Factorization::new(&q_post)?,
    };
    let b: Vec<f64> = op.g.tr_mul_vec(&obs.d)?.iter().map(|v| v / op.sigma2).collect();
    let mean = f.solve(&b)?;
    Ok(PosteriorResult { mean, q_post, relative_error: None })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ava::{ObservationKind, ObservationOperator};

    #[test]
    fn scalar_case() {
        let op = Arc::new(ObservationOperator::new(SparseMatrix::identity(1), ObservationKind::Identity, 1.0).unwrap());
        let obs = ObservationSet { d: vec![2.0], operator: op, seed: 0, truth_ref: None };
        let r = posterior_mean(&SparseMatrix::identity(1), &obs).unwrap();
        assert_eq!(r.q_post.get(0, 0), 2.0);
        assert!((r.mean[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_rejected() {
        let op = Arc::new(ObservationOperator::new(SparseMatrix::identity(2), ObservationKind::Identity, 0.0).unwrap());
        let obs = ObservationSet { d: vec![1.0, 2.0], operator: op, seed: 0, truth_ref: None };
        assert!(posterior_mean(&SparseMatrix::identity(2), &obs).is_err());
    }
}
