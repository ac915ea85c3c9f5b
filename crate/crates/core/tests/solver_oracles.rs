//! Closed-form checks of the forward, divergence-form and backward solvers.

use std::f64::consts::PI;
use std::sync::Arc;

use parid::mesh_fem::{build_mesh, Domain, FemSpace, MatrixField, ScalarField, SpaceTimeField, TimeGrid};
use parid::parabolic_solver::{ParabolicSolver, Source, TimeScheme};
use proptest::prelude::*;

const PI2: f64 = PI * PI;

fn solver_1d(n: usize, steps: usize, tau: f64) -> ParabolicSolver {
    let mesh = Arc::new(build_mesh(Domain::unit_interval(), n).unwrap());
    let space = Arc::new(FemSpace::new(mesh.clone()).unwrap());
    let grid = TimeGrid::uniform(tau, steps).unwrap();
    ParabolicSolver::new(space, grid, MatrixField::identity(&mesh), TimeScheme::ImplicitEuler).unwrap()
}

fn rel_error(solver: &ParabolicSolver, got: &SpaceTimeField, exact: impl Fn([f64; 2], f64) -> f64) -> f64 {
    let e = SpaceTimeField::from_fn(solver.mesh(), solver.grid(), exact);
    let diff = got.axpby(1.0, &e, -1.0);
    solver.space().spacetime_l2(&diff) / solver.space().spacetime_l2(&e)
}

#[test]
fn heat_eigenmode() {
    let s = solver_1d(64, 256, 0.1);
    let h = ScalarField::from_fn(s.mesh(), |p| (PI * p[0]).sin());
    let u = s.solve_forward(None, &h).unwrap();
    let exact = SpaceTimeField::from_fn(s.mesh(), s.grid(), |p, t| (-PI2 * t).exp() * (PI * p[0]).sin());
    let err = s.space().spacetime_l2(&u.axpby(1.0, &exact, -1.0));
    assert!(err <= 1e-2, "error {err}");
}

#[test]
fn heat_eigenmode_2d_decay() {
    let mesh = Arc::new(build_mesh(Domain::unit_square(), 32).unwrap());
    let space = Arc::new(FemSpace::new(mesh.clone()).unwrap());
    let grid = TimeGrid::uniform(0.05, 50).unwrap();
    let dt = grid.dt(0);
    let s = ParabolicSolver::new(space, grid, MatrixField::identity(&mesh), TimeScheme::ImplicitEuler).unwrap();
    let h = ScalarField::from_fn(&mesh, |p| (PI * p[0]).sin() * (PI * p[1]).sin());
    let u = s.solve_forward(None, &h).unwrap();
    let centre = 16 * 33 + 16;
    let factor = u.levels[11][centre] / u.levels[10][centre];
    let expected = (-2.0 * PI2 * dt).exp();
    assert!((factor - expected).abs() / expected < 5e-3, "{factor} vs {expected}");
}

#[test]
fn divergence_form_closed_form() {
    let s = solver_1d(64, 256, 0.1);
    let c = 0.7;
    let w = SpaceTimeField::from_fn(s.mesh(), s.grid(), |p, t| (-PI2 * t).exp() * (PI * p[0]).sin());
    let v = s.solve_div_form(&MatrixField::constant(s.mesh(), [[c, 0.0], [0.0, 0.0]]), &w).unwrap();
    let err = rel_error(&s, &v, |p, t| -c * PI2 * t * (-PI2 * t).exp() * (PI * p[0]).sin());
    assert!(err <= 2e-2, "relative error {err}");
}

#[test]
fn backward_closed_form() {
    let tau = 0.1;
    let s = solver_1d(64, 256, tau);
    let phi = SpaceTimeField::from_fn(s.mesh(), s.grid(), |p, t| (-PI2 * t).exp() * (PI * p[0]).sin());
    let z = s.solve_backward(&phi).unwrap();
    let err = rel_error(&s, &z, |p, t| {
        ((PI2 * (t - 2.0 * tau)).exp() - (-PI2 * t).exp()) / (2.0 * PI2) * (PI * p[0]).sin()
    });
    assert!(err <= 2e-2, "relative error {err}");
}

#[test]
fn crank_nicolson_is_more_accurate_in_time() {
    let mesh = Arc::new(build_mesh(Domain::unit_interval(), 128).unwrap());
    let space = Arc::new(FemSpace::new(mesh.clone()).unwrap());
    let grid = TimeGrid::uniform(0.1, 16).unwrap();
    let h = ScalarField::from_fn(&mesh, |p| (PI * p[0]).sin());
    let exact = SpaceTimeField::from_fn(&mesh, &grid, |p, t| (-PI2 * t).exp() * (PI * p[0]).sin());
    let err = |scheme| {
        let s = ParabolicSolver::new(space.clone(), grid.clone(), MatrixField::identity(&mesh), scheme).unwrap();
        space.spacetime_l2(&s.solve_forward(None, &h).unwrap().axpby(1.0, &exact, -1.0))
    };
    assert!(err(TimeScheme::CrankNicolson) < 0.2 * err(TimeScheme::ImplicitEuler));
}

#[test]
fn nonuniform_grid_matches_uniform_limit() {
    let mesh = Arc::new(build_mesh(Domain::unit_interval(), 32).unwrap());
    let space = Arc::new(FemSpace::new(mesh.clone()).unwrap());
    let pts: Vec<f64> = (0..=64).map(|m| 0.1 * (m as f64 / 64.0).powf(1.5)).collect();
    let grid = TimeGrid::new(pts).unwrap();
    let s = ParabolicSolver::new(space.clone(), grid.clone(), MatrixField::identity(&mesh), TimeScheme::ImplicitEuler).unwrap();
    let h = ScalarField::from_fn(&mesh, |p| (PI * p[0]).sin());
    let u = s.solve_forward(None, &h).unwrap();
    let exact = SpaceTimeField::from_fn(&mesh, &grid, |p, t| (-PI2 * t).exp() * (PI * p[0]).sin());
    assert!(space.spacetime_l2(&u.axpby(1.0, &exact, -1.0)) < 1e-2);
}

#[test]
fn stability_inequality_on_fresh_data() {
    use parid::parabolic_solver::{estimate_stability_constant, random_stability_data, stability_sample};
    let s = solver_1d(32, 64, 0.1);
    let est = estimate_stability_constant(&s, 60, 11).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..30 {
        let (f, h) = random_stability_data(s.mesh(), s.grid(), 999, i);
        worst = worst.max(stability_sample(&s, f.as_ref(), &h).unwrap().ratio());
    }
    // a sampled lower bound; fresh draws from the same distribution stay near it
    assert!(worst <= 1.05 * est.c0, "{worst} > {}", est.c0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_solver_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 1usize..5, j in 1usize..5) {
        let s = solver_1d(16, 16, 0.1);
        let m = s.mesh();
        let f1 = SpaceTimeField::from_fn(m, s.grid(), |p, t| (k as f64 * PI * p[0]).sin() * (1.0 + t));
        let f2 = SpaceTimeField::from_fn(m, s.grid(), |p, _| p[0] * (1.0 - p[0]));
        let h1 = ScalarField::from_fn(m, |p| (j as f64 * PI * p[0]).sin());
        let h2 = ScalarField::from_fn(m, |p| p[0] * p[0] * (1.0 - p[0]));
        let u1 = s.solve_forward(Some(&f1), &h1).unwrap();
        let u2 = s.solve_forward(Some(&f2), &h2).unwrap();
        let hc: ScalarField = h1.iter().zip(h2.iter()).map(|(x, y)| a * x + b * y).collect::<Vec<_>>().into();
        let uc = s.solve_forward(Some(&f1.axpby(a, &f2, b)), &hc).unwrap();
        let diff = uc.axpby(1.0, &u1.axpby(a, &u2, b), -1.0);
        prop_assert!(diff.max_abs() <= 1e-10 * (1.0 + uc.max_abs()));
    }

    #[test]
    fn div_form_is_linear_in_coefficient(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let s = solver_1d(16, 16, 0.1);
        let m = s.mesh();
        let w = SpaceTimeField::from_fn(m, s.grid(), |p, t| (PI * p[0]).sin() + t * p[0]);
        let c1 = MatrixField::isotropic(m, |p| 1.0 + p[0]);
        let c2 = MatrixField::isotropic(m, |p| (3.0 * p[0]).cos());
        let v1 = s.solve(&Source::Divergence { coeff: c1.clone(), w: w.clone() }, &ScalarField::zeros(m)).unwrap();
        let v2 = s.solve_div_form(&c2, &w).unwrap();
        let vc = s.solve_div_form(&c1.axpby(a, &c2, b).unwrap(), &w).unwrap();
        let diff = vc.axpby(1.0, &v1.axpby(a, &v2, b), -1.0);
        prop_assert!(diff.max_abs() <= 1e-10 * (1.0 + vc.max_abs()));
    }
}
