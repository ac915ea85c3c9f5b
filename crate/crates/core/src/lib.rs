//! Identification of matrix diffusion coefficients in parabolic equations
//! from noisy observations, by natural linearization, Galerkin-projected
//! Tikhonov regularization and an adaptive balancing-principle parameter choice.

pub mod adaptive_choice;
pub mod error;
pub mod experiments;
pub mod galerkin;
pub mod linearized_operator;
pub mod mesh_fem;
pub mod parabolic_solver;
pub mod smoothing;
pub mod tikhonov;
pub mod uniqueness_check;

pub use error::{Error, Result};
