//! Stand-alone checks exposed through the CLI: the adjoint identity on
//! random pairs and the uniqueness determinant of the exact data.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Result;
use crate::experiments::config::ExperimentConfig;
use crate::experiments::pipeline::{prepare, UniquenessSummary};
use crate::linearized_operator::LinearizedOperator;
use crate::mesh_fem::{frobenius_inner, frobenius_norm, MatrixField, Mesh, Representation, ScalarField, SpaceTimeField, TimeGrid};
use crate::uniqueness_check::{uniqueness_determinant, DerivativeSource};

/// Symmetric element-wise field with standard normal entries.
pub fn random_coefficient(mesh: &Mesh, seed: u64) -> MatrixField {
    let d = mesh.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = vec![vec![0.0; mesh.num_elements()]; d * d];
    for i in 0..d {
        for j in i..d {
            let v: Vec<f64> = (0..mesh.num_elements()).map(|_| StandardNormal.sample(&mut rng)).collect();
            entries[j * d + i] = v.clone();
            entries[i * d + j] = v;
        }
    }
    MatrixField::new(d, Representation::Cellwise, entries).expect("square layout")
}

/// Standard normal values at interior nodes, zero on the boundary.
pub fn random_spacetime(mesh: &Mesh, grid: &TimeGrid, seed: u64) -> SpaceTimeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = (0..grid.len())
        .map(|_| {
            let v: Vec<f64> = (0..mesh.num_nodes())
                .map(|n| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    if mesh.is_boundary(n) {
                        0.0
                    } else {
                        x
                    }
                })
                .collect();
            ScalarField::from(v)
        })
        .collect();
    SpaceTimeField {
        grid: grid.clone(),
        levels,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointReport {
    pub h: f64,
    pub dt: f64,
    /// `|⟨TC, φ⟩ - ⟨C, T*φ⟩| / (‖C‖ ‖φ‖)` per pair.
    pub mismatches: Vec<f64>,
    pub max: f64,
    pub mean: f64,
}

/// Relative adjoint mismatch on `pairs` seeded random `(C, φ)`.
pub fn adjoint_mismatches(op: &LinearizedOperator, pairs: usize, seed: u64) -> Result<AdjointReport> {
    let space = op.solver().space();
    let mesh = space.mesh();
    let grid = op.solver().grid();
    let mismatches = (0..pairs as u64)
        .map(|p| {
            let c = random_coefficient(mesh, seed.wrapping_mul(2).wrapping_add(2 * p));
            let phi = random_spacetime(mesh, grid, seed.wrapping_mul(2).wrapping_add(2 * p + 1));
            let lhs = space.spacetime_inner(&op.apply(&c)?, &phi);
            let rhs = frobenius_inner(mesh, &c, &op.adjoint(&phi)?)?;
            let scale = frobenius_norm(mesh, &c)? * space.spacetime_l2(&phi);
            Ok((lhs - rhs).abs() / (scale + f64::MIN_POSITIVE))
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = mismatches.iter().copied().fold(0.0, f64::max);
    let mean = mismatches.iter().sum::<f64>() / mismatches.len().max(1) as f64;
    Ok(AdjointReport {
        h: mesh.h(),
        dt: grid.max_dt(),
        mismatches,
        max,
        mean,
    })
}

/// Adjoint test of the operator linearized at the exact data of `cfg`.
pub fn adjoint_test(cfg: &ExperimentConfig, pairs: usize, seed: u64) -> Result<AdjointReport> {
    let prep = prepare(cfg)?;
    let op = LinearizedOperator::new(prep.base_solver.clone(), prep.u.clone(), prep.stability)
        .map_err(|e| e.at_stage("operator"))?;
    adjoint_mismatches(&op, pairs, seed)
}

/// Uniqueness determinant of the exact data of `cfg` with recovered
/// derivatives.
pub fn uniqueness_test(cfg: &ExperimentConfig) -> Result<UniquenessSummary> {
    let prep = prepare(cfg)?;
    let mesh: &Arc<Mesh> = &prep.mesh;
    let times = cfg.uniqueness_times(mesh.dim());
    let report = uniqueness_determinant(
        mesh,
        DerivativeSource::Field {
            field: &prep.u,
            recovery: true,
        },
        &times,
        prep.grid.tau(),
    )
    .map_err(|e| e.at_stage("uniqueness"))?;
    Ok(UniquenessSummary::from(&report))
}
