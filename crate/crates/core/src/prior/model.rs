use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::anisotropy::{anisotropy_from_interface, AnisotropySpec};
use super::blend::{build_blend_field, BlendField, BlendSpec};
use super::interface::Interface;
use crate::discretize::{
    assemble_operator, normalization_constant, BoundaryCondition, CoefficientFields, Grid2D, Normalization,
};
use crate::error::{Error, Result};
use crate::inference::Factorization;
use crate::sparse::SparseMatrix;
use crate::spd::SpdMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Stationary, isotropic, one cross-field correlation everywhere.
    Model1,
    /// Stationary, isotropic, correlation switching across an interface.
    Model2,
    /// Model 2 with curve-following anisotropy and a blended transition.
    Model3,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Model1 => "M1",
            ModelKind::Model2 => "M2",
            ModelKind::Model3 => "M3",
        }
    }
}

/// Overall prior precision scale. With noisy data the likelihood is
/// parametrised by `λ² = τ²σ²`, and `τ² = λ² / σ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorScale {
    Tau2(f64),
    Lambda2(f64),
}

fn one() -> f64 {
    1.0
}

/// Everything needed to build a prior of any kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub kappa2: f64,
    pub scale: PriorScale,
    /// Noise variance; the profiled value after fitting.
    #[serde(default = "one")]
    pub sigma2: f64,
    /// Off-diagonal correlations `(ρ12, ρ13, ρ23)` above the interface, or
    /// everywhere for Model 1.
    pub rho_above: [f64; 3],
    #[serde(default)]
    pub rho_below: Option<[f64; 3]>,
    #[serde(default)]
    pub blend_range: f64,
    #[serde(default)]
    pub interface: Option<Interface>,
    #[serde(default)]
    pub anisotropy: Option<AnisotropySpec>,
    #[serde(default)]
    pub boundary: BoundaryCondition,
    #[serde(default)]
    pub normalization: Normalization,
}

impl HyperParams {
    /// Stationary isotropic defaults with zero correlations.
    pub fn new(kappa2: f64, scale: PriorScale) -> Self {
        HyperParams {
            kappa2,
            scale,
            sigma2: 1.0,
            rho_above: [0.0; 3],
            rho_below: None,
            blend_range: 0.0,
            interface: None,
            anisotropy: None,
            boundary: BoundaryCondition::Neumann,
            normalization: Normalization::MedianKappa,
        }
    }

    pub fn tau2(&self) -> f64 {
        match self.scale {
            PriorScale::Tau2(t) => t,
            PriorScale::Lambda2(l) => l / self.sigma2,
        }
    }

    pub fn lambda2(&self) -> f64 {
        match self.scale {
            PriorScale::Tau2(t) => t * self.sigma2,
            PriorScale::Lambda2(l) => l,
        }
    }

    pub fn sigma_above(&self) -> Result<SpdMatrix> {
        let [a, b, c] = self.rho_above;
        SpdMatrix::correlation3(a, b, c)
            .map_err(|e| Error::domain(format!("rho_above does not give a positive definite matrix: {e}")))
    }

    pub fn sigma_below(&self) -> Result<SpdMatrix> {
        let [a, b, c] = self.rho_below.ok_or_else(|| Error::arg("missing parameter `rho_below`"))?;
        SpdMatrix::correlation3(a, b, c)
            .map_err(|e| Error::domain(format!("rho_below does not give a positive definite matrix: {e}")))
    }

    fn interface(&self) -> Result<&Interface> {
        self.interface.as_ref().ok_or_else(|| Error::arg("missing parameter `interface`"))
    }

    /// Checks the scalar parameters; correlation matrices are checked when
    /// the model is built.
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa2 > 0.0) || !self.kappa2.is_finite() {
            return Err(Error::domain(format!("kappa2 must be positive, got {}", self.kappa2)));
        }
        let s = match self.scale {
            PriorScale::Tau2(v) | PriorScale::Lambda2(v) => v,
        };
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::domain(format!("prior scale must be positive, got {s}")));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::domain(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.blend_range >= 0.0) {
            return Err(Error::domain(format!("blend_range must be non-negative, got {}", self.blend_range)));
        }
        Ok(())
    }
}

/// Joint precision over all component fields, stacked field-major
/// `[m₁; m₂; m₃]`, with the pieces it was built from.
///
/// `Q = s · KᵀK` with `s = τ² c h²` and `K` block upper triangular, block
/// `(a, b) = diag(u_ab) L`.
#[derive(Clone, Debug)]
pub struct JointModel {
    q: OnceLock<SparseMatrix>,
    pub grid: Grid2D,
    pub hyper: Option<HyperParams>,
    pub kind: Option<ModelKind>,
    /// Scalar operator `L`.
    pub operator: SparseMatrix,
    pub blend: BlendField,
    /// `τ² c h²`.
    pub scale: f64,
}

impl JointModel {
    /// Assembled joint precision, built on first use.
    pub fn q(&self) -> &SparseMatrix {
        self.q.get_or_init(|| self.assemble().expect("model pieces were validated at construction"))
    }

    fn assemble(&self) -> Result<SparseMatrix> {
        let p = self.n_fields();
        let n = self.grid.len();
        let l = &self.operator;
        let lt = l.transpose();
        let mut blocks: Vec<Vec<Option<SparseMatrix>>> = vec![vec![None; p]; p];
        for a in 0..p {
            for b in a..p {
                let w: Vec<f64> = self.blend.q.iter().map(|q| self.scale * q.get(a, b)).collect();
                let mut m = lt.scale_cols(&w)?.matmul(l)?;
                if a == b {
                    // rounding in the product can leave the block asymmetric
                    m = m.add(&m.transpose())?.scale(0.5);
                } else {
                    blocks[b][a] = Some(m.transpose());
                }
                blocks[a][b] = Some(m);
            }
        }
        let refs: Vec<Vec<Option<&SparseMatrix>>> =
            blocks.iter().map(|r| r.iter().map(Option::as_ref).collect()).collect();
        SparseMatrix::from_blocks(&refs, &vec![n; p], &vec![n; p])
    }

    pub fn n_fields(&self) -> usize {
        self.blend.dim()
    }

    pub fn dim(&self) -> usize {
        self.n_fields() * self.grid.len()
    }

    /// Block operator `K`, so that `Q = scale · KᵀK`.
    pub fn operator_k(&self) -> Result<SparseMatrix> {
        let p = self.n_fields();
        let n = self.grid.len();
        let mut blocks: Vec<Vec<Option<SparseMatrix>>> = vec![vec![None; p]; p];
        for (a, row) in blocks.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate().skip(a) {
                let d: Vec<f64> = self.blend.u.iter().map(|u| u[(a, b)]).collect();
                *slot = Some(self.operator.scale_rows(&d)?);
            }
        }
        let refs: Vec<Vec<Option<&SparseMatrix>>> =
            blocks.iter().map(|r| r.iter().map(Option::as_ref).collect()).collect();
        SparseMatrix::from_blocks(&refs, &vec![n; p], &vec![n; p])
    }

    /// `Lx` for each field of the stacked vector `x`.
    fn apply_operator(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.grid.len();
        if x.len() != self.dim() {
            return Err(Error::arg(format!("vector of length {} does not match model size {}", x.len(), self.dim())));
        }
        x.chunks(n).map(|f| self.operator.mul_vec(f)).collect()
    }

    /// `xᵀ Q x = scale · Σ_s (Lx)(s)ᵀ Q₀(s) (Lx)(s)` without forming `Q`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let lx = self.apply_operator(x)?;
        let p = self.n_fields();
        let mut acc = 0.0;
        for (k, q) in self.blend.q.iter().enumerate() {
            let q = q.as_matrix();
            for a in 0..p {
                let va = lx[a][k];
                acc += q[(a, a)] * va * va;
                for b in (a + 1)..p {
                    acc += 2.0 * q[(a, b)] * va * lx[b][k];
                }
            }
        }
        Ok(self.scale * acc)
    }

    /// `log det Q = p n log(scale) + p log det(LᵀL) + Σ_s log det Q₀(s)`.
    /// Only the `n × n` matrix `LᵀL` is factorised.
    pub fn log_det(&self) -> Result<f64> {
        let ltl = Factorization::new(&self.operator.gram())?;
        let p = self.n_fields() as f64;
        let n = self.grid.len() as f64;
        Ok(p * n * self.scale.ln() + p * ltl.log_det() + self.blend.sum_log_det_q())
    }
}

/// Assembles `Q = τ² c h² KᵀK`, whose `(a, b)` block equals
/// `τ² c h² Lᵀ diag(Q₀(s)_ab) L`.
pub fn assemble_joint_precision(
    grid: &Grid2D,
    blend: &BlendField,
    coeffs: &CoefficientFields,
    tau2: f64,
    bc: BoundaryCondition,
    normalization: Normalization,
) -> Result<JointModel> {
    let model = prior_structure(grid, blend, coeffs, tau2, bc, normalization)?;
    let q = model.assemble()?;
    let _ = model.q.set(q);
    Ok(model)
}

/// As [`assemble_joint_precision`] but defers forming `Q` until
/// [`JointModel::q`] is called.
fn prior_structure(
    grid: &Grid2D,
    blend: &BlendField,
    coeffs: &CoefficientFields,
    tau2: f64,
    bc: BoundaryCondition,
    normalization: Normalization,
) -> Result<JointModel> {
    if blend.len() != grid.len() {
        return Err(Error::arg(format!("blend field has {} nodes, grid has {}", blend.len(), grid.len())));
    }
    if !(tau2 > 0.0) || !tau2.is_finite() {
        return Err(Error::domain(format!("tau2 must be positive, got {tau2}")));
    }
    for (k, u) in blend.u.iter().enumerate() {
        if (0..u.nrows()).any(|a| !(u[(a, a)] > 0.0)) {
            return Err(Error::domain(format!("local precision at node {k} is not positive definite")));
        }
    }
    let l = assemble_operator(grid, coeffs, bc)?;
    let c = normalization_constant(coeffs, normalization)?;
    let scale = tau2 * c * grid.h * grid.h;
    Ok(JointModel { q: OnceLock::new(), grid: *grid, hyper: None, kind: None, operator: l, blend: blend.clone(), scale })
}

/// Coefficients and blend specification for a model kind.
pub fn model_components(kind: ModelKind, params: &HyperParams, grid: &Grid2D) -> Result<(CoefficientFields, BlendSpec)> {
    params.validate()?;
    let above = params.sigma_above()?;
    match kind {
        ModelKind::Model1 => Ok((CoefficientFields::isotropic(grid, params.kappa2), BlendSpec::constant(above))),
        ModelKind::Model2 => {
            let spec = BlendSpec::new(above, params.sigma_below()?, params.blend_range, params.interface()?.clone())?;
            Ok((CoefficientFields::isotropic(grid, params.kappa2), spec))
        }
        ModelKind::Model3 => {
            let interface = params.interface()?.clone();
            let aniso = params.anisotropy.ok_or_else(|| Error::arg("missing parameter `anisotropy`"))?;
            let mut coeffs = anisotropy_from_interface(grid, &interface, &aniso)?;
            coeffs.kappa2 = vec![params.kappa2; grid.len()];
            let spec = BlendSpec::new(above, params.sigma_below()?, params.blend_range, interface)?;
            Ok((coeffs, spec))
        }
    }
}

pub fn build_model(kind: ModelKind, params: &HyperParams, grid: &Grid2D) -> Result<JointModel> {
    let (coeffs, spec) = model_components(kind, params, grid)?;
    let blend = build_blend_field(grid, &spec)?;
    let mut m = prior_structure(grid, &blend, &coeffs, params.tau2(), params.boundary, params.normalization)?;
    m.hyper = Some(params.clone());
    m.kind = Some(kind);
    Ok(m)
}
