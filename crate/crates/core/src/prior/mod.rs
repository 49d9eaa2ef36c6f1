//! Multivariate prior: interface geometry, geodesic blending of the local
//! cross-field correlation, curve-following anisotropy and joint precision
//! assembly.

mod anisotropy;
mod blend;
mod interface;
mod model;

pub use anisotropy::{anisotropy_from_interface, rotated_tensor, AnisotropySpec};
pub use blend::{build_blend_field, BlendField, BlendSpec, Region, CORRELATION_TOL};
pub use interface::{blend_parameter, signed_distance, Interface};
pub use model::{
    assemble_joint_precision, build_model, model_components, HyperParams, JointModel, ModelKind, PriorScale,
};
