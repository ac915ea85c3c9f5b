//! Shared fixtures for the criterion benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use parid::linearized_operator::LinearizedOperator;
use parid::mesh_fem::{build_mesh, Domain, FemSpace, MatrixField, SpaceTimeField, TimeGrid};
use parid::parabolic_solver::{ParabolicSolver, StabilityEstimate, TimeScheme};

/// Linearization of the heat equation on the unit square about its
/// slowest decaying mode, with `n` cells per side and `steps` time steps.
pub fn heat_operator(n: usize, steps: usize) -> LinearizedOperator {
    let mesh = Arc::new(build_mesh(Domain::unit_square(), n).expect("mesh"));
    let space = Arc::new(FemSpace::new(mesh.clone()).expect("space"));
    let grid = TimeGrid::uniform(0.1, steps).expect("grid");
    let w = SpaceTimeField::from_fn(&mesh, &grid, |p, t| {
        (-2.0 * PI * PI * t).exp() * (PI * p[0]).sin() * (PI * p[1]).sin()
    });
    let solver = ParabolicSolver::new(space, grid, MatrixField::identity(&mesh), TimeScheme::CrankNicolson).expect("solver");
    let c0 = StabilityEstimate::user_supplied(1.0).expect("c0");
    LinearizedOperator::new(Arc::new(solver), w, c0).expect("operator")
}
