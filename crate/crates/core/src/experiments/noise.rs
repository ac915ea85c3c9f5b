//! Seeded perturbations of exact observations.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::experiments::config::NoiseModel;
use crate::mesh_fem::{FemSpace, SpaceTimeField};

/// Returns `ũ = u + η` where `η` is drawn with `seed` and rescaled so that
/// `‖η‖ = delta` in the norm of the model (space-time L² for raw noise,
/// the mixed norm for smooth noise).
pub fn make_noisy(space: &FemSpace, u: &SpaceTimeField, delta: f64, seed: u64, model: NoiseModel) -> SpaceTimeField {
    if delta == 0.0 {
        return u.clone();
    }
    let eta = match model {
        NoiseModel::Raw => raw_noise(u, seed),
        NoiseModel::Smooth => smooth_noise(space, u, seed),
    };
    let norm = match model {
        NoiseModel::Raw => space.spacetime_l2(&eta),
        NoiseModel::Smooth => space.mixed_assumption(&eta),
    };
    u.axpby(1.0, &eta, delta / norm)
}

fn raw_noise(u: &SpaceTimeField, seed: u64) -> SpaceTimeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = u
        .levels
        .iter()
        .map(|l| {
            l.iter()
                .map(|_| StandardNormal.sample(&mut rng))
                .collect::<Vec<f64>>()
                .into()
        })
        .collect();
    SpaceTimeField {
        grid: u.grid.clone(),
        levels,
    }
}

/// Random combination of low sine modes in space with random cosine
/// modulation in time.
fn smooth_noise(space: &FemSpace, u: &SpaceTimeField, seed: u64) -> SpaceTimeField {
    let mesh = space.mesh();
    let d = mesh.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ([ox, oy], [sx, sy]) = mesh.domain().bounds();
    let modes: Vec<(f64, f64, f64, f64, f64)> = (1..=4)
        .flat_map(|k| (1..=if d == 2 { 4 } else { 1 }).map(move |l| (k, l)))
        .map(|(k, l)| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let freq: f64 = rng.random_range(0.0..3.0);
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            (k as f64, l as f64, a / (k + l) as f64, freq, phase)
        })
        .collect();
    let tau = u.grid.tau();
    SpaceTimeField::from_fn(mesh, &u.grid, |p, t| {
        let (x, y) = ((p[0] - ox) / sx, (p[1] - oy) / sy);
        modes
            .iter()
            .map(|&(k, l, a, freq, phase)| {
                let sy_term = if d == 2 { (l * PI * y).sin() } else { 1.0 };
                a * (k * PI * x).sin() * sy_term * (1.0 + 0.5 * (freq * PI * t / tau + phase).cos())
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::{build_mesh, Domain, TimeGrid};
    use std::sync::Arc;

    fn setup() -> (FemSpace, SpaceTimeField) {
        let mesh = Arc::new(build_mesh(Domain::unit_interval(), 16).unwrap());
        let grid = TimeGrid::uniform(0.1, 8).unwrap();
        let u = SpaceTimeField::from_fn(&mesh, &grid, |p, t| (PI * p[0]).sin() * (1.0 - t));
        (FemSpace::new(mesh).unwrap(), u)
    }

    #[test]
    fn exact_misfit_and_determinism() {
        let (space, u) = setup();
        assert_eq!(make_noisy(&space, &u, 0.0, 3, NoiseModel::Raw), u);
        for (model, delta) in [(NoiseModel::Raw, 1e-3), (NoiseModel::Smooth, 2e-2)] {
            let a = make_noisy(&space, &u, delta, 3, model);
            let b = make_noisy(&space, &u, delta, 3, model);
            assert_eq!(a, b);
            let diff = a.axpby(1.0, &u, -1.0);
            let measured = match model {
                NoiseModel::Raw => space.spacetime_l2(&diff),
                NoiseModel::Smooth => space.mixed_assumption(&diff),
            };
            assert!((measured - delta).abs() <= 1e-10 * delta);
            assert_ne!(make_noisy(&space, &u, delta, 4, model), a);
        }
    }
}
