//! Property tests of the stated invariants.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use parid::adaptive_choice::{build_alpha_grid, select_adaptive, AdaptiveConfig};
use parid::experiments::diagnostics::random_coefficient;
use parid::galerkin::build_basis;
use parid::mesh_fem::{build_mesh, frobenius_inner, Domain};
use parid::smoothing::modified_noise_level;
use parid::tikhonov::{solve_path, NormalSystem, TikhonovSolution};
use proptest::prelude::*;

fn sol(alpha: f64, coeffs: Vec<f64>) -> TikhonovSolution {
    TikhonovSolution {
        alpha,
        coeffs,
        reconstruction: None,
        residual_norm: 0.0,
        solution_norm: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selected_index_is_the_largest_admissible(
        coeffs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..12),
        c in 0.1f64..2.0,
        mu in 1.05f64..3.0,
    ) {
        let sols: Vec<_> = coeffs.into_iter().enumerate().map(|(i, v)| sol(i as f64 + 1.0, v)).collect();
        let n = sols.len();
        let res = select_adaptive(sols, c, mu).unwrap();
        prop_assert!(res.k < n);
        prop_assert!(res.satisfies_rule());
        for i in res.k + 1..n {
            let ok = (0..=i).all(|j| res.distances[i][j] <= 4.0 * c / mu.powi(j as i32));
            prop_assert!(!ok);
        }
    }

    #[test]
    fn alpha_grid_is_geometric(delta in 1e-6f64..1e-1, mu in 1.01f64..4.0, n in 0usize..40, dim in 1usize..3) {
        let cfg = AdaptiveConfig { mu, n, ..AdaptiveConfig::new(delta, dim) };
        let g = build_alpha_grid(&cfg).unwrap();
        prop_assert_eq!(g.len(), n + 1);
        prop_assert!((g[0] - (delta * (dim as f64 + 2.0)).powi(2)).abs() <= 1e-15 * g[0]);
        for w in g.windows(2) {
            prop_assert!((w[1] / w[0] - mu * mu).abs() <= 1e-12 * mu * mu);
        }
    }

    #[test]
    fn tikhonov_path_is_monotone(
        entries in prop::collection::vec(-1.0f64..1.0, 36),
        rhs in prop::collection::vec(-1.0f64..1.0, 6),
        lo in -6.0f64..0.0,
    ) {
        let g = DMatrix::from_vec(6, 6, entries);
        let y = DVector::from_vec(rhs);
        let sys = NormalSystem::from_parts(g.transpose() * &g, DMatrix::identity(6, 6), g.transpose() * &y, y.norm()).unwrap();
        let alphas: Vec<f64> = (0..10).map(|i| 10f64.powf(lo + 0.4 * i as f64)).collect();
        let path = solve_path(&sys, &alphas).unwrap();
        for w in path.windows(2) {
            prop_assert!(w[1].solution_norm <= w[0].solution_norm * (1.0 + 1e-9) + 1e-12);
            prop_assert!(w[1].residual_norm >= w[0].residual_norm * (1.0 - 1e-9) - 1e-12);
        }
    }

    #[test]
    fn effective_noise_level(delta in 0.0f64..1.0, h in 1e-3f64..0.5) {
        let r = modified_noise_level(delta, h).unwrap();
        prop_assert!(r.delta_h >= h);
        prop_assert_eq!(r.delta_h == h, delta / (h * h) <= h);
    }

    #[test]
    fn projection_is_self_adjoint_and_idempotent(seed in 0u64..1000, level in 0usize..3) {
        let mesh = Arc::new(build_mesh(Domain::unit_square(), 4).unwrap());
        let basis = build_basis(mesh.clone(), level).unwrap();
        let c = random_coefficient(&mesh, seed);
        let d = random_coefficient(&mesh, seed + 5000);
        let pc = basis.project(&c).unwrap();
        let pd = basis.project(&d).unwrap();
        let lhs = frobenius_inner(&mesh, &pc, &d).unwrap();
        let rhs = frobenius_inner(&mesh, &c, &pd).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        let ppc = basis.project(&pc).unwrap();
        prop_assert!(ppc.axpby(1.0, &pc, -1.0).unwrap().max_abs() <= 1e-12);
    }
}
