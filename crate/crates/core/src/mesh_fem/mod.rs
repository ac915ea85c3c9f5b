//! Meshes, P1 finite-element assembly, quadrature and norms.

mod assembly;
mod fields;
mod mesh;
mod norms;

pub use assembly::{
    assemble_mass, assemble_stiffness, bilinear, check_ellipticity, matvec, require_elliptic, spmv,
    FemSpace,
};
pub(crate) use assembly::{restricted_combination, SpdFactor};
pub use fields::{MatrixField, Representation, ScalarField, SpaceTimeField, TimeGrid};
pub use mesh::{build_mesh, Domain, Element, Mesh};
pub use norms::{
    frobenius_inner, frobenius_norm, grad_linf, grad_linf_time_l2, norm, spacetime_inner_with,
    NormKind, NormTarget,
};
