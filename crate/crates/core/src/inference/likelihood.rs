use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::SymmetricEigen;

use super::factor::FactorCache;
use crate::ava::{ObservationKind, ObservationOperator, ObservationSet};
use crate::discretize::Grid2D;
use crate::error::{Error, Result};
use crate::prior::{build_model, HyperParams, JointModel, ModelKind, PriorScale};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodEval {
    pub loglik: f64,
    /// Maximiser of the likelihood over `σ²` when it was profiled.
    pub profiled_sigma2: Option<f64>,
    /// Maximiser over `τ²` when it was profiled (direct observations only).
    pub profiled_tau2: Option<f64>,
}

/// Marginal log-density of `obs.d` under the prior `kind` with `hyper`.
///
/// * direct observations: `log N(d; 0, Q⁻¹)`;
/// * `PriorScale::Lambda2`: `σ²` profiled out in closed form;
/// * `PriorScale::Tau2`: `σ² = hyper.sigma2` held fixed.
pub fn log_likelihood(hyper: &HyperParams, obs: &ObservationSet, kind: ModelKind, grid: &Grid2D) -> Result<LikelihoodEval> {
    LikelihoodEvaluator::new(std::slice::from_ref(obs), kind, *grid)?.evaluate(hyper)
}

fn same_operator(a: &Arc<ObservationOperator>, b: &Arc<ObservationOperator>) -> bool {
    Arc::ptr_eq(a, b)
        || (a.kind == b.kind
            && a.sigma2 == b.sigma2
            && a.g.nrows() == b.g.nrows()
            && a.g.ncols() == b.g.ncols()
            && a.g.indices() == b.g.indices()
            && a.g.data() == b.g.data())
}

/// Total log-likelihood of a batch of independent replicates observed
/// through one operator. Symbolic factorisations are reused between calls.
pub struct LikelihoodEvaluator<'a> {
    obs: &'a [ObservationSet],
    kind: ModelKind,
    grid: Grid2D,
    op: Arc<ObservationOperator>,
    gtd: Vec<Vec<f64>>,
    dtd: Vec<f64>,
    profile_tau2: bool,
    ltl_cache: FactorCache,
    post_cache: FactorCache,
}

impl<'a> LikelihoodEvaluator<'a> {
    pub fn new(obs: &'a [ObservationSet], kind: ModelKind, grid: Grid2D) -> Result<Self> {
        grid.validate()?;
        let first = obs.first().ok_or_else(|| Error::arg("no observation sets given"))?;
        let op = first.operator.clone();
        if op.n_latent() != 3 * grid.len() {
            return Err(Error::arg(format!(
                "operator acts on {} unknowns, grid has {} nodes x 3 fields",
                op.n_latent(),
                grid.len()
            )));
        }
        let mut gtd = Vec::with_capacity(obs.len());
        let mut dtd = Vec::with_capacity(obs.len());
        for (r, o) in obs.iter().enumerate() {
            if !same_operator(&op, &o.operator) {
                return Err(Error::arg(format!("observation set {r} uses a different operator")));
            }
            if o.d.len() != op.n_obs() {
                return Err(Error::arg(format!("observation set {r} has {} values, expected {}", o.d.len(), op.n_obs())));
            }
            gtd.push(op.g.tr_mul_vec(&o.d)?);
            dtd.push(o.d.iter().map(|v| v * v).sum());
        }
        Ok(LikelihoodEvaluator {
            obs,
            kind,
            grid,
            op,
            gtd,
            dtd,
            profile_tau2: false,
            ltl_cache: FactorCache::new(),
            post_cache: FactorCache::new(),
        })
    }

    /// With direct observations, maximise over `τ²` in closed form and
    /// ignore the scale in `hyper`.
    pub fn profile_tau2(mut self, on: bool) -> Self {
        self.profile_tau2 = on;
        self
    }

    pub fn is_direct(&self) -> bool {
        self.op.is_direct()
    }

    pub fn replicates(&self) -> usize {
        self.obs.len()
    }

    /// Observations per replicate.
    pub fn n_obs(&self) -> usize {
        self.op.n_obs()
    }

    pub fn evaluate(&self, hyper: &HyperParams) -> Result<LikelihoodEval> {
        hyper.validate()?;
        if self.op.is_direct() {
            self.direct(hyper)
        } else {
            self.noisy(hyper)
        }
    }

    /// `log det Q` from the structured formula, factorising only `LᵀL`.
    fn log_det_prior(&self, model: &JointModel) -> Result<f64> {
        let ltl = self.ltl_cache.factorize(&model.operator.gram())?;
        let p = model.n_fields() as f64;
        let n = model.grid.len() as f64;
        Ok(p * n * model.scale.ln() + p * ltl.log_det() + model.blend.sum_log_det_q())
    }

    fn direct(&self, hyper: &HyperParams) -> Result<LikelihoodEval> {
        let mut h = hyper.clone();
        if self.profile_tau2 {
            h.scale = PriorScale::Tau2(1.0);
            h.sigma2 = 1.0;
        }
        let model = build_model(self.kind, &h, &self.grid)?;
        let ld = self.log_det_prior(&model)?;
        let quads = self.obs.iter().map(|o| model.quad_form(&o.d)).collect::<Result<Vec<f64>>>()?;
        let r = self.obs.len() as f64;
        let n = self.op.n_obs() as f64;
        let c = 0.5 * n * (2.0 * PI).ln();
        if self.profile_tau2 {
            let total: f64 = quads.iter().sum();
            if !(total > 0.0) {
                return Err(Error::domain("zero quadratic form: scale is not identifiable"));
            }
            let tau2 = r * n / total;
            let loglik = 0.5 * r * (n * tau2.ln() + ld) - 0.5 * r * n - r * c;
            Ok(LikelihoodEval { loglik, profiled_sigma2: None, profiled_tau2: Some(tau2) })
        } else {
            let loglik = quads.iter().map(|q| 0.5 * ld - 0.5 * q - c).sum();
            Ok(LikelihoodEval { loglik, profiled_sigma2: None, profiled_tau2: None })
        }
    }

    /// With `M = λ²Q̃` and `P = M + GᵀG`, the data covariance is
    /// `σ²(I + G M⁻¹ Gᵀ)`, whose log-determinant is
    /// `N log σ² + log det P − log det M` and whose quadratic form is
    /// `(dᵀd − bᵀP⁻¹b)/σ²` with `b = Gᵀd`.
    fn noisy(&self, hyper: &HyperParams) -> Result<LikelihoodEval> {
        let lambda2 = hyper.lambda2();
        let mut h = hyper.clone();
        h.scale = PriorScale::Tau2(lambda2);
        h.sigma2 = 1.0;
        let model = build_model(self.kind, &h, &self.grid)?;
        let ld_m = self.log_det_prior(&model)?;

        let separable = self.kind == ModelKind::Model1
            && self.op.kind == ObservationKind::Identity
            && self.op.n_obs() == self.op.n_latent();
        let (ld_p, fitted) = if separable { self.separable_terms(&model)? } else { self.general_terms(&model)? };

        let r = self.obs.len() as f64;
        let n = self.op.n_obs() as f64;
        let resid: Vec<f64> = self.dtd.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let ld_c = ld_p - ld_m;
        match hyper.scale {
            PriorScale::Lambda2(_) => {
                let total: f64 = resid.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::domain("non-positive residual sum: noise variance cannot be profiled"));
                }
                let sigma2 = total / (r * n);
                let loglik = -0.5 * r * n * ((2.0 * PI * sigma2).ln() + 1.0) - 0.5 * r * ld_c;
                Ok(LikelihoodEval { loglik, profiled_sigma2: Some(sigma2), profiled_tau2: None })
            }
            PriorScale::Tau2(_) => {
                let s2 = hyper.sigma2;
                let loglik = resid
                    .iter()
                    .map(|s| -0.5 * n * (2.0 * PI * s2).ln() - 0.5 * ld_c - 0.5 * s / s2)
                    .sum();
                Ok(LikelihoodEval { loglik, profiled_sigma2: None, profiled_tau2: None })
            }
        }
    }

    /// `(log det P, [bᵀP⁻¹b per replicate])` from one factorisation of `P`.
    fn general_terms(&self, model: &JointModel) -> Result<(f64, Vec<f64>)> {
        let p = model.q().add(self.op.gtg())?;
        let f = self.post_cache.factorize(&p)?;
        let dim = p.nrows();
        let mut rhs: Vec<f64> = self.gtd.concat();
        f.solve_many_in_place(&mut rhs, self.gtd.len())?;
        let fitted = self
            .gtd
            .iter()
            .zip(rhs.chunks(dim))
            .map(|(b, x)| b.iter().zip(x).map(|(u, v)| u * v).sum())
            .collect();
        Ok((f.log_det(), fitted))
    }

    /// Model 1 with `G = I`: `M = s (Q₀ ⊗ LᵀL)`, so with `Q₀ = V diag(e) Vᵀ`
    /// `P` splits into the blocks `s e_k LᵀL + I`.
    fn separable_terms(&self, model: &JointModel) -> Result<(f64, Vec<f64>)> {
        let n = self.grid.len();
        let p = model.n_fields();
        let q0 = model.blend.q[0].as_matrix().clone();
        let eig = SymmetricEigen::new(q0);
        let ltl = model.operator.gram();
        let mut ld = 0.0;
        let mut fitted = vec![0.0; self.obs.len()];
        for k in 0..p {
            let pk = ltl.scale(model.scale * eig.eigenvalues[k]).add(&SparseMatrix::identity(n))?;
            let f = self.post_cache.factorize(&pk)?;
            ld += f.log_det();
            let mut rhs = Vec::with_capacity(n * self.obs.len());
            for b in &self.gtd {
                rhs.extend((0..n).map(|i| (0..p).map(|a| eig.eigenvectors[(a, k)] * b[a * n + i]).sum::<f64>()));
            }
            let y = rhs.clone();
            f.solve_many_in_place(&mut rhs, self.obs.len())?;
            for (r, acc) in fitted.iter_mut().enumerate() {
                let s = r * n..(r + 1) * n;
                *acc += y[s.clone()].iter().zip(&rhs[s]).map(|(u, v)| u * v).sum::<f64>();
            }
        }
        Ok((ld, fitted))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ava::{assemble_observation_operator, observe, ObservationScheme};
    use crate::prior::Interface;
    use nalgebra::{DMatrix, DVector};

    fn dense_logpdf(cov: &DMatrix<f64>, d: &[f64]) -> f64 {
        let n = d.len() as f64;
        let chol = cov.clone().cholesky().unwrap();
        let x = DVector::from_column_slice(d);
        let ld: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        -0.5 * n * (2.0 * PI).ln() - 0.5 * ld - 0.5 * x.dot(&chol.solve(&x))
    }

    fn hyper(scale: PriorScale) -> HyperParams {
        let mut h = HyperParams::new(0.4, scale);
        h.rho_above = [0.5, -0.2, 0.3];
        h.rho_below = Some([-0.4, 0.1, 0.6]);
        h.interface = Some(Interface::Flat { depth: 1.5 });
        h
    }

    fn data(op: &Arc<ObservationOperator>) -> ObservationSet {
        let m: Vec<f64> = (0..op.n_latent()).map(|i| (i as f64 * 0.37).sin()).collect();
        observe(op, &m, 5).unwrap()
    }

    #[test]
    fn direct_matches_dense() {
        let g = Grid2D::new(3, 4, 1.0).unwrap();
        let op = Arc::new(assemble_observation_operator(&g, &ObservationScheme::Identity, None, 0.0).unwrap());
        let obs = data(&op);
        for kind in [ModelKind::Model1, ModelKind::Model2] {
            let h = hyper(PriorScale::Tau2(3.0));
            let q = build_model(kind, &h, &g).unwrap().q().to_dense();
            let expect = dense_logpdf(&q.try_inverse().unwrap(), &obs.d);
            let got = log_likelihood(&h, &obs, kind, &g).unwrap().loglik;
            assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
        }
    }

    #[test]
    fn noisy_matches_dense() {
        let g = Grid2D::new(3, 4, 1.0).unwrap();
        let w = crate::ava::ricker_wavelet(0.2, 2).unwrap();
        let ava = ObservationScheme::Ava { config: Default::default(), wavelet: None };
        for (scheme, wav) in [(ObservationScheme::Identity, None), (ava, Some(&w))] {
            let op = Arc::new(assemble_observation_operator(&g, &scheme, wav, 0.7).unwrap());
            let obs = data(&op);
            for kind in [ModelKind::Model1, ModelKind::Model2] {
                let mut h = hyper(PriorScale::Tau2(3.0));
                h.sigma2 = 0.7;
                let q = build_model(kind, &h, &g).unwrap().q().to_dense();
                let gd = op.g.to_dense();
                let cov = &gd * q.try_inverse().unwrap() * gd.transpose()
                    + DMatrix::identity(op.n_obs(), op.n_obs()) * 0.7;
                let expect = dense_logpdf(&cov, &obs.d);
                let got = log_likelihood(&h, &obs, kind, &g).unwrap();
                assert!((got.loglik - expect).abs() < 1e-8, "{kind:?}: {} vs {expect}", got.loglik);

                // profiling over σ² at fixed λ² = τ²σ² reaches at least the known-σ² value
                h.scale = PriorScale::Lambda2(3.0 * 0.7);
                let prof = log_likelihood(&h, &obs, kind, &g).unwrap();
                assert!(prof.loglik >= got.loglik - 1e-9);
                let s2 = prof.profiled_sigma2.unwrap();
                let mut at = hyper(PriorScale::Tau2(3.0 * 0.7 / s2));
                at.sigma2 = s2;
                let check = log_likelihood(&at, &obs, kind, &g).unwrap().loglik;
                assert!((check - prof.loglik).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn profiled_tau2_is_the_maximiser() {
        let g = Grid2D::new(4, 4, 1.0).unwrap();
        let op = Arc::new(assemble_observation_operator(&g, &ObservationScheme::Identity, None, 0.0).unwrap());
        let obs = [data(&op)];
        let ev = LikelihoodEvaluator::new(&obs, ModelKind::Model2, g).unwrap().profile_tau2(true);
        let best = ev.evaluate(&hyper(PriorScale::Tau2(1.0))).unwrap();
        let tau2 = best.profiled_tau2.unwrap();
        let fixed = LikelihoodEvaluator::new(&obs, ModelKind::Model2, g).unwrap();
        let at = fixed.evaluate(&hyper(PriorScale::Tau2(tau2))).unwrap().loglik;
        assert!((at - best.loglik).abs() < 1e-9);
        for f in [0.8, 1.25] {
            assert!(fixed.evaluate(&hyper(PriorScale::Tau2(tau2 * f))).unwrap().loglik < at);
        }
    }

    #[test]
    fn shift_lowers_likelihood() {
        let g = Grid2D::new(4, 4, 1.0).unwrap();
        let op = Arc::new(assemble_observation_operator(&g, &ObservationScheme::Identity, None, 0.5).unwrap());
        let obs = data(&op);
        let mut shifted = obs.clone();
        shifted.d.iter_mut().for_each(|v| *v += 3.0);
        let h = hyper(PriorScale::Tau2(2.0));
        let a = log_likelihood(&h, &obs, ModelKind::Model1, &g).unwrap().loglik;
        let b = log_likelihood(&h, &shifted, ModelKind::Model1, &g).unwrap().loglik;
        assert!(b < a);
    }

    #[test]
    fn invalid_correlations_are_domain_errors() {
        let g = Grid2D::new(3, 3, 1.0).unwrap();
        let op = Arc::new(assemble_observation_operator(&g, &ObservationScheme::Identity, None, 0.0).unwrap());
        let mut h = hyper(PriorScale::Tau2(1.0));
        h.rho_above = [0.9, 0.9, -0.9];
        assert!(matches!(log_likelihood(&h, &data(&op), ModelKind::Model1, &g), Err(Error::Domain(_))));
    }
}
