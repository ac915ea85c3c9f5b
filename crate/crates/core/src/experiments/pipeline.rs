//! The identification pipeline: exact data, noise, optional smoothing, the
//! reference solve `v₀`, Galerkin-projected Tikhonov along the α grid,
//! balancing-principle selection and `Ã = A₀ + B̃`.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::adaptive_choice::{build_alpha_grid, select_adaptive, AdaptiveConfig};
use crate::error::{Error, Result};
use crate::experiments::config::ExperimentConfig;
use crate::experiments::noise::make_noisy;
use crate::galerkin::{build_basis, projection_gap, CoeffBasis, ProjectionGap};
use crate::linearized_operator::LinearizedOperator;
use crate::mesh_fem::{frobenius_norm, FemSpace, MatrixField, Mesh, ScalarField, SpaceTimeField, TimeGrid};
use crate::parabolic_solver::{estimate_stability_constant, ParabolicSolver, StabilityEstimate};
use crate::smoothing::{gradient_misfit, measure_constants, modified_noise_level, smooth_spacetime, SmoothingReport};
use crate::tikhonov::{assemble_normal_system, solve_path};
use crate::uniqueness_check::{uniqueness_determinant, DerivativeSource, UniquenessReport};

/// Grid noise level used when the data are exact, so that the α grid is
/// still well defined.
pub const EXACT_DATA_GRID_DELTA: f64 = 1e-8;

/// Everything that does not depend on the noise draw.
pub struct Prepared {
    pub mesh: Arc<Mesh>,
    pub space: Arc<FemSpace>,
    pub grid: TimeGrid,
    pub truth: MatrixField,
    pub guess: MatrixField,
    /// Exact observations `u`.
    pub u: SpaceTimeField,
    /// Solution `v₀` for the base coefficient.
    pub v0: SpaceTimeField,
    pub base_solver: Arc<ParabolicSolver>,
    pub stability: StabilityEstimate,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let mesh = Arc::new(cfg.mesh().map_err(|e| e.at_stage("mesh"))?);
    let grid = cfg.grid().map_err(|e| e.at_stage("mesh"))?;
    let space = Arc::new(FemSpace::new(mesh.clone()).map_err(|e| e.at_stage("mesh"))?);
    let truth = cfg.truth.coefficient.to_field(&mesh)?;
    let guess = cfg.guess.coefficient.to_field(&mesh)?;
    let d = mesh.dim();
    let f = SpaceTimeField::from_fn(&mesh, &grid, |p, t| {
        cfg.truth.source.eval(p, d) * cfg.truth.source_time.eval(t)
    });
    let h = ScalarField::from_fn(&mesh, |p| cfg.truth.initial.eval(p, d));
    let scheme = cfg.domain.scheme;

    let u = ParabolicSolver::new(space.clone(), grid.clone(), truth.clone(), scheme)
        .and_then(|s| s.solve_forward(Some(&f), &h))
        .map_err(|e| e.at_stage("forward solve"))?;
    let base_solver = Arc::new(
        ParabolicSolver::new(space.clone(), grid.clone(), guess.clone(), scheme)
            .map_err(|e| e.at_stage("reference solve"))?,
    );
    let v0 = base_solver
        .solve_forward(Some(&f), &h)
        .map_err(|e| e.at_stage("reference solve"))?;
    let stability = match cfg.stability.c0 {
        Some(c0) => StabilityEstimate::user_supplied(c0),
        None => estimate_stability_constant(&base_solver, cfg.stability.battery, cfg.stability.seed),
    }
    .map_err(|e| e.at_stage("stability"))?;
    Ok(Prepared {
        mesh,
        space,
        grid,
        truth,
        guess,
        u,
        v0,
        base_solver,
        stability,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessSummary {
    pub times: Vec<f64>,
    pub min_abs: f64,
    pub max_abs: f64,
    pub threshold: f64,
    pub fraction_above: f64,
}

impl From<&UniquenessReport> for UniquenessSummary {
    fn from(r: &UniquenessReport) -> Self {
        Self {
            times: r.times.clone(),
            min_abs: r.min_abs,
            max_abs: r.max_abs,
            threshold: r.threshold,
            fraction_above: r.fraction_above(),
        }
    }
}

/// Results of one `(δ, seed)` pipeline run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub delta: f64,
    pub seed: u64,
    pub h: f64,
    pub dt: f64,
    /// Noise level driving the α grid: `δ`, or `δ_h` after smoothing.
    pub effective_delta: f64,
    pub level: usize,
    pub basis_size: usize,
    pub epsilon_n: Option<f64>,
    /// The gap estimate never dropped below the effective noise level.
    pub gap_shortfall: bool,
    pub c0: f64,
    pub operator_bound: f64,
    pub degenerate: bool,
    pub k: usize,
    pub alpha_k: f64,
    pub alphas: Vec<f64>,
    /// `‖A - Ã_α‖` for every grid α (available because the truth is known).
    pub errors: Vec<f64>,
    pub error: f64,
    pub relative_error: f64,
    pub residual: f64,
    pub solution_norm: f64,
    pub smoothing: Option<SmoothingReport>,
    pub uniqueness: Option<UniquenessSummary>,
    pub runtime_s: f64,
}

pub struct RunOutcome {
    pub summary: RunSummary,
    pub estimate: MatrixField,
    pub data: SpaceTimeField,
}

/// One pipeline run at noise level `delta` with noise seed `seed`.
pub fn run_point(prep: &Prepared, cfg: &ExperimentConfig, delta: f64, seed: u64) -> Result<RunOutcome> {
    let start = Instant::now();
    let mesh = &prep.mesh;
    let h = mesh.h();
    let noisy = make_noisy(&prep.space, &prep.u, delta, seed, cfg.noise.model);

    let (data, effective_delta, smoothing) = if cfg.noise.smoothing {
        let smoothed = smooth_spacetime(mesh, &noisy).map_err(|e| e.at_stage("smoothing"))?;
        let mut report = modified_noise_level(delta, h).map_err(|e| e.at_stage("smoothing"))?;
        report.constants = Some(measure_constants(mesh, 3, seed).map_err(|e| e.at_stage("smoothing"))?);
        report.gradient_misfit = gradient_misfit(mesh, &prep.u, &smoothed);
        let dh = report.delta_h;
        (smoothed, dh, Some(report))
    } else {
        (noisy, delta, None)
    };
    let grid_delta = if effective_delta > 0.0 { effective_delta } else { EXACT_DATA_GRID_DELTA };

    let op = LinearizedOperator::new(prep.base_solver.clone(), data.clone(), prep.stability)
        .map_err(|e| e.at_stage("operator"))?;
    let (basis, gap, shortfall) = choose_basis(&op, mesh, cfg, grid_delta).map_err(|e| e.at_stage("galerkin"))?;

    let rhs = data.axpby(1.0, &prep.v0, -1.0);
    let system = assemble_normal_system(&op, &basis, &rhs).map_err(|e| e.at_stage("normal system"))?;

    let bound = op.norm_bound();
    let acfg = AdaptiveConfig {
        delta: grid_delta,
        mu: cfg.adaptive.mu,
        n: cfg.adaptive.n,
        dim: mesh.dim(),
        c: cfg.adaptive.c,
        gamma: (!op.is_degenerate()).then_some(bound * bound),
        source: None,
    };
    let alphas = build_alpha_grid(&acfg).map_err(|e| e.at_stage("adaptive"))?;
    let path = solve_path(&system, &alphas).map_err(|e| e.at_stage("tikhonov"))?;

    let errors = path
        .iter()
        .map(|s| estimate_error(prep, s.reconstruction.as_ref().expect("basis-backed system")).map(|(e, _)| e))
        .collect::<Result<Vec<f64>>>()?;
    let selection = select_adaptive(path, cfg.adaptive.c, cfg.adaptive.mu).map_err(|e| e.at_stage("adaptive"))?;
    let chosen = selection.selected();
    let (error, estimate) = estimate_error(prep, chosen.reconstruction.as_ref().expect("basis-backed system"))?;

    let uniqueness = if cfg.uniqueness.enabled {
        let times = cfg.uniqueness_times(mesh.dim());
        let report = uniqueness_determinant(
            mesh,
            DerivativeSource::Field {
                field: &data,
                recovery: true,
            },
            &times,
            prep.grid.tau(),
        )
        .map_err(|e| e.at_stage("uniqueness"))?;
        Some(UniquenessSummary::from(&report))
    } else {
        None
    };

    let truth_norm = frobenius_norm(mesh, &prep.truth)?;
    let summary = RunSummary {
        delta,
        seed,
        h,
        dt: prep.grid.max_dt(),
        effective_delta,
        level: basis.level().unwrap_or(0),
        basis_size: basis.size(),
        epsilon_n: gap.map(|g| g.epsilon),
        gap_shortfall: shortfall,
        c0: prep.stability.c0,
        operator_bound: bound,
        degenerate: system.is_degenerate(),
        k: selection.k,
        alpha_k: chosen.alpha,
        alphas: selection.alphas.clone(),
        errors,
        error,
        relative_error: error / truth_norm,
        residual: chosen.residual_norm,
        solution_norm: chosen.solution_norm,
        smoothing,
        uniqueness,
        runtime_s: if cfg.output.record_timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
    };
    Ok(RunOutcome {
        summary,
        estimate,
        data,
    })
}

/// `(‖A - (A₀ + B̃)‖, A₀ + B̃)`.
fn estimate_error(prep: &Prepared, b: &MatrixField) -> Result<(f64, MatrixField)> {
    let estimate = prep.guess.to_cellwise(&prep.mesh).axpby(1.0, b, 1.0)?;
    let diff = prep.truth.to_cellwise(&prep.mesh).axpby(1.0, &estimate, -1.0)?;
    Ok((frobenius_norm(&prep.mesh, &diff)?, estimate))
}

/// Fixed level, or the coarsest level whose gap estimate drops below `delta`
/// (falling back to the finest admissible level).
fn choose_basis(
    op: &LinearizedOperator,
    mesh: &Arc<Mesh>,
    cfg: &ExperimentConfig,
    delta: f64,
) -> Result<(CoeffBasis, Option<ProjectionGap>, bool)> {
    let gal = &cfg.galerkin;
    if let Some(level) = gal.level {
        let basis = build_basis(mesh.clone(), level)?;
        let gap = projection_gap(op, &basis, gal.gap_iterations, gal.gap_seed)?;
        return Ok((basis, Some(gap), gap.epsilon >= delta));
    }
    let finest = gal.max_level.unwrap_or(usize::MAX).min(cfg.finest_level());
    let mut last = None;
    for level in 0..=finest {
        let basis = build_basis(mesh.clone(), level)?;
        let gap = projection_gap(op, &basis, gal.gap_iterations, gal.gap_seed)?;
        if gap.epsilon < delta {
            return Ok((basis, Some(gap), false));
        }
        last = Some((basis, gap));
    }
    let (basis, gap) = last.ok_or_else(|| Error::Partition("no admissible level".into()))?;
    Ok((basis, Some(gap), true))
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub nodes: usize,
    pub elements: usize,
    pub h: f64,
    pub dt: f64,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub runs: Vec<RunSummary>,
    pub provenance: Provenance,
}

pub struct PipelineOutput {
    pub report: ReconstructionReport,
    pub estimates: Vec<MatrixField>,
    pub truth: MatrixField,
    pub guess: MatrixField,
    pub mesh: Arc<Mesh>,
}

/// Validates the configuration, then runs every `(δ, repetition)` pair.
pub fn execute(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let points: Vec<(f64, u64)> = cfg
        .noise
        .deltas
        .iter()
        .flat_map(|&d| (0..cfg.noise.repetitions as u64).map(move |r| (d, r)))
        .map(|(d, r)| (d, cfg.noise.seed.wrapping_add(r)))
        .collect();
    let outcomes = points
        .par_iter()
        .map(|&(d, s)| run_point(&prep, cfg, d, s))
        .collect::<Result<Vec<_>>>()?;
    let (runs, estimates) = outcomes.into_iter().map(|o| (o.summary, o.estimate)).unzip();
    Ok(PipelineOutput {
        report: ReconstructionReport {
            runs,
            provenance: Provenance {
                config: cfg.clone(),
                seed: cfg.noise.seed,
                nodes: prep.mesh.num_nodes(),
                elements: prep.mesh.num_elements(),
                h: prep.mesh.h(),
                dt: prep.grid.max_dt(),
                version: env!("CARGO_PKG_VERSION"),
            },
        },
        estimates,
        truth: prep.truth,
        guess: prep.guess,
        mesh: prep.mesh,
    })
}

/// Runs the pipeline and writes `report.json`, `table.csv` and `fields/`
/// into the configured output directory.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ReconstructionReport> {
    let out = execute(cfg)?;
    let dir = cfg.output.dir.as_ref().expect("validated");
    crate::experiments::output::write_run(dir, &out)?;
    Ok(out.report)
}
