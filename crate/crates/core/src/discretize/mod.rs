//! Finite-difference discretisation of `κ²(s) − ∇·A(s)∇` on a regular grid.

mod grid;
mod matern;
mod operator;

pub use grid::{BoundaryCondition, CoefficientFields, Grid2D};
pub use matern::{bessel_k, matern_reference, MaternReference};
pub use operator::{
    assemble_operator, constant_stencil, normalization_constant, precision_from_operator, Normalization, StencilS,
};
