//! θ-scheme Galerkin solvers for the forward, divergence-form and backward
//! (adjoint) parabolic problems with homogeneous Dirichlet conditions.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra_sparse::CsrMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh_fem::{
    assemble_stiffness, matvec, require_elliptic, restricted_combination, spmv, FemSpace,
    MatrixField, Mesh, ScalarField, SpaceTimeField, SpdFactor, TimeGrid,
};

/// Time discretization. Implicit Euler is θ = 1, Crank–Nicolson θ = 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

impl TimeScheme {
    pub fn theta(self) -> f64 {
        match self {
            TimeScheme::ImplicitEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }
}

/// Right-hand side of the parabolic problem.
#[derive(Debug, Clone)]
pub enum Source {
    Zero,
    /// `f` sampled at the nodes on every time level.
    Nodal(SpaceTimeField),
    /// `∇·(C ∇w)`, applied weakly as `-∫ C∇w·∇φ_i`.
    Divergence { coeff: MatrixField, w: SpaceTimeField },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    /// Terminal-value adjoint problem `z_t + ∇·A₀∇z = φ`, `z(τ) = 0`.
    Backward,
}

/// Full description of one parabolic solve.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mesh: Arc<Mesh>,
    pub grid: TimeGrid,
    pub coeff: MatrixField,
    pub source: Source,
    pub initial: Option<ScalarField>,
    pub direction: Direction,
    pub scheme: TimeScheme,
}

/// Solves the problem described by `spec`.
pub fn solve(spec: &ProblemSpec) -> Result<SpaceTimeField> {
    let space = Arc::new(FemSpace::new(spec.mesh.clone())?);
    let solver = ParabolicSolver::new(space, spec.grid.clone(), spec.coeff.clone(), spec.scheme)?;
    match spec.direction {
        Direction::Forward => {
            let initial = spec
                .initial
                .clone()
                .unwrap_or_else(|| ScalarField::zeros(&spec.mesh));
            solver.solve(&spec.source, &initial)
        }
        Direction::Backward => {
            if spec.initial.as_ref().is_some_and(|h| h.iter().any(|v| *v != 0.0)) {
                return Err(Error::InvalidParameter(
                    "backward problems take a zero terminal condition".into(),
                ));
            }
            match &spec.source {
                Source::Zero => Ok(SpaceTimeField::zeros(&spec.mesh, &spec.grid)),
                Source::Nodal(phi) => solver.solve_backward(phi),
                Source::Divergence { .. } => Err(Error::InvalidParameter(
                    "backward problems do not accept divergence-form sources".into(),
                )),
            }
        }
    }
}

/// A parabolic operator `∂_t - ∇·(A ∇·)` on a fixed mesh and time grid, with
/// the step matrices factored once per distinct step length.
pub struct ParabolicSolver {
    space: Arc<FemSpace>,
    grid: TimeGrid,
    coeff: MatrixField,
    stiffness: CsrMatrix<f64>,
    theta: f64,
    factors: Vec<(f64, SpdFactor)>,
}

impl ParabolicSolver {
    pub fn new(
        space: Arc<FemSpace>,
        grid: TimeGrid,
        coeff: MatrixField,
        scheme: TimeScheme,
    ) -> Result<Self> {
        let mesh = space.mesh();
        require_elliptic(mesh, &coeff)?;
        let stiffness = assemble_stiffness(mesh, &coeff)?;
        let theta = scheme.theta();
        let ni = mesh.interior_nodes().len();
        let tol = 1e-12 * grid.tau();
        let mut factors: Vec<(f64, SpdFactor)> = Vec::new();
        for m in 0..grid.steps() {
            let dt = grid.dt(m);
            if factors.iter().any(|(k, _)| (k - dt).abs() <= tol) {
                continue;
            }
            let step = restricted_combination(
                space.mass(),
                1.0,
                &stiffness,
                theta * dt,
                space.interior_index(),
                ni,
            );
            factors.push((dt, SpdFactor::new(&step)?));
        }
        Ok(Self {
            space,
            grid,
            coeff,
            stiffness,
            theta,
            factors,
        })
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn mesh(&self) -> &Mesh {
        self.space.mesh()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn coeff(&self) -> &MatrixField {
        &self.coeff
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    /// Forward solve with initial datum `initial` (L²-projected onto the
    /// Dirichlet-zero P1 space).
    pub fn solve(&self, source: &Source, initial: &ScalarField) -> Result<SpaceTimeField> {
        let mesh = self.mesh();
        initial.check(mesh)?;
        let u0 = self.space.project_dirichlet_zero(initial);
        match source {
            Source::Zero => Ok(self.march(&self.grid, u0, |_| None)),
            Source::Nodal(f) => {
                f.check(mesh, &self.grid)?;
                let mass = self.space.mass();
                Ok(self.march(&self.grid, u0, |m| Some(matvec(mass, &f.levels[m]))))
            }
            Source::Divergence { coeff, w } => {
                w.check(mesh, &self.grid)?;
                let kc = assemble_stiffness(mesh, coeff)?;
                Ok(self.march(&self.grid, u0, |m| {
                    let mut load = matvec(&kc, &w.levels[m]);
                    load.iter_mut().for_each(|v| *v = -*v);
                    Some(load)
                }))
            }
        }
    }

    pub fn solve_forward(
        &self,
        f: Option<&SpaceTimeField>,
        initial: &ScalarField,
    ) -> Result<SpaceTimeField> {
        match f {
            Some(f) => self.solve(&Source::Nodal(f.clone()), initial),
            None => self.solve(&Source::Zero, initial),
        }
    }

    /// Solution of `v_t - ∇·A∇v = ∇·C∇w`, `v(0) = 0`.
    pub fn solve_div_form(&self, c: &MatrixField, w: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.solve(
            &Source::Divergence {
                coeff: c.clone(),
                w: w.clone(),
            },
            &ScalarField::zeros(self.mesh()),
        )
    }

    /// Solution of `z_t + ∇·A∇z = φ`, `z(τ) = 0`, obtained by marching
    /// `y(s) = z(τ - s)` forward with source `-φ(τ - s)`.
    pub fn solve_backward(&self, phi: &SpaceTimeField) -> Result<SpaceTimeField> {
        let mesh = self.mesh();
        phi.check(mesh, &self.grid)?;
        let reversed = self.grid.reversed();
        let last = self.grid.len() - 1;
        let mass = self.space.mass();
        let mut levels = self.march(&reversed, vec![0.0; mesh.num_nodes()], |m| {
            let mut load = matvec(mass, &phi.levels[last - m]);
            load.iter_mut().for_each(|v| *v = -*v);
            Some(load)
        });
        levels.levels.reverse();
        levels.grid = self.grid.clone();
        Ok(levels)
    }

    fn factor_for(&self, dt: f64) -> &SpdFactor {
        let tol = 1e-12 * self.grid.tau();
        &self
            .factors
            .iter()
            .find(|(k, _)| (k - dt).abs() <= tol)
            .expect("step length not factored for this grid")
            .1
    }

    fn march(
        &self,
        grid: &TimeGrid,
        u0: Vec<f64>,
        load: impl Fn(usize) -> Option<Vec<f64>>,
    ) -> SpaceTimeField {
        let n = u0.len();
        let theta = self.theta;
        let mass = self.space.mass();
        let mut levels = Vec::with_capacity(grid.len());
        let mut current = u0;
        let mut prev_load = if theta < 1.0 { load(0) } else { None };
        let mut rhs = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for m in 0..grid.steps() {
            let dt = grid.dt(m);
            spmv(mass, &current, &mut rhs);
            if theta < 1.0 {
                spmv(&self.stiffness, &current, &mut tmp);
                for (r, k) in rhs.iter_mut().zip(&tmp) {
                    *r -= (1.0 - theta) * dt * k;
                }
                if let Some(f) = &prev_load {
                    for (r, v) in rhs.iter_mut().zip(f) {
                        *r += (1.0 - theta) * dt * v;
                    }
                }
            }
            let next_load = load(m + 1);
            if let Some(f) = &next_load {
                for (r, v) in rhs.iter_mut().zip(f) {
                    *r += theta * dt * v;
                }
            }
            let interior = self.factor_for(dt).solve(&self.space.restrict(&rhs));
            let next = self.space.extend(&interior);
            levels.push(ScalarField::from(std::mem::replace(&mut current, next)));
            prev_load = next_load;
        }
        levels.push(ScalarField::from(current));
        SpaceTimeField {
            grid: grid.clone(),
            levels,
        }
    }
}

/// Convenience wrapper around [`ParabolicSolver::solve_forward`].
pub fn solve_forward(
    mesh: Arc<Mesh>,
    grid: &TimeGrid,
    coeff: &MatrixField,
    f: Option<&SpaceTimeField>,
    initial: &ScalarField,
    scheme: TimeScheme,
) -> Result<SpaceTimeField> {
    let space = Arc::new(FemSpace::new(mesh)?);
    ParabolicSolver::new(space, grid.clone(), coeff.clone(), scheme)?.solve_forward(f, initial)
}

pub fn solve_div_form(
    mesh: Arc<Mesh>,
    grid: &TimeGrid,
    a0: &MatrixField,
    c: &MatrixField,
    w: &SpaceTimeField,
) -> Result<SpaceTimeField> {
    let space = Arc::new(FemSpace::new(mesh)?);
    ParabolicSolver::new(space, grid.clone(), a0.clone(), TimeScheme::ImplicitEuler)?
        .solve_div_form(c, w)
}

pub fn solve_backward(
    mesh: Arc<Mesh>,
    grid: &TimeGrid,
    a0: &MatrixField,
    phi: &SpaceTimeField,
) -> Result<SpaceTimeField> {
    let space = Arc::new(FemSpace::new(mesh)?);
    ParabolicSolver::new(space, grid.clone(), a0.clone(), TimeScheme::ImplicitEuler)?
        .solve_backward(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityMethod {
    Sampled,
    UserSupplied,
}

/// Working estimate of the constant `C₀` in
/// `‖v‖_{L²(H¹)} + ‖v_t‖_{L²(H⁻¹)} ≤ C₀ (‖f‖_{L²(H⁻¹)} + ‖h‖_{L²})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    pub c0: f64,
    pub method: StabilityMethod,
}

impl StabilityEstimate {
    pub fn user_supplied(c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidParameter(format!("C0 must be positive, got {c0}")));
        }
        Ok(Self {
            c0,
            method: StabilityMethod::UserSupplied,
        })
    }
}

pub const DEFAULT_BATTERY: usize = 24;

/// Both sides of the discrete stability inequality for data `(f, h)`.
#[derive(Debug, Clone, Copy)]
pub struct StabilitySample {
    pub solution_norm: f64,
    pub data_norm: f64,
}

impl StabilitySample {
    pub fn ratio(&self) -> f64 {
        if self.data_norm > 0.0 {
            self.solution_norm / self.data_norm
        } else {
            0.0
        }
    }
}

/// Evaluates `‖v‖_{L²H¹} + ‖v_t‖_{L²H⁻¹}` and `‖f‖_{L²H⁻¹} + ‖h‖_{L²}` where
/// the dual norms are Riesz norms against the full H¹ inner product on the
/// Dirichlet-zero subspace.
pub fn stability_sample(
    solver: &ParabolicSolver,
    f: Option<&SpaceTimeField>,
    h: &ScalarField,
) -> Result<StabilitySample> {
    let space = solver.space();
    let grid = solver.grid();
    let v = solver.solve_forward(f, h)?;
    let weights = grid.trapezoid_weights();

    let v_h1: f64 = weights
        .iter()
        .zip(&v.levels)
        .map(|(w, l)| w * space.h1_norm(l).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut vt_sq = 0.0;
    for m in 0..grid.steps() {
        let dt = grid.dt(m);
        let diff: Vec<f64> = v.levels[m + 1]
            .iter()
            .zip(v.levels[m].iter())
            .map(|(a, b)| (a - b) / dt)
            .collect();
        vt_sq += dt * space.h1_dual_norm(&matvec(space.mass(), &diff)).powi(2);
    }
    let f_norm = match f {
        Some(f) => weights
            .iter()
            .zip(&f.levels)
            .map(|(w, l)| w * space.h1_dual_norm(&matvec(space.mass(), l)).powi(2))
            .sum::<f64>()
            .sqrt(),
        None => 0.0,
    };
    Ok(StabilitySample {
        solution_norm: v_h1 + vt_sq.sqrt(),
        data_norm: f_norm + space.l2_norm(h),
    })
}

/// Random smooth data `(f, h)` for the stability battery: sine modes with
/// decaying random amplitudes and random temporal modulation. Member `index`
/// cycles through source-only, initial-only and combined data.
pub fn random_stability_data(
    mesh: &Mesh,
    grid: &TimeGrid,
    seed: u64,
    index: usize,
) -> (Option<SpaceTimeField>, ScalarField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let modes = random_modes(&mut rng, mesh.dim());
    let (ox, oy, sx, sy) = bounds(mesh);
    let eval = move |coeffs: &[(usize, usize, f64)], p: [f64; 2]| -> f64 {
        let (x, y) = ((p[0] - ox) / sx, (p[1] - oy) / sy);
        coeffs
            .iter()
            .map(|&(k, l, a)| {
                let sy_term = if l == 0 { 1.0 } else { (l as f64 * PI * y).sin() };
                a * (k as f64 * PI * x).sin() * sy_term
            })
            .sum()
    };
    let h_modes = modes.clone();
    let h = ScalarField::from_fn(mesh, |p| eval(&h_modes, p));
    let f_modes = random_modes(&mut rng, mesh.dim());
    let (freq, phase): (f64, f64) = (rng.random_range(0.0..4.0), rng.random_range(0.0..PI));
    let tau = grid.tau();
    let f = SpaceTimeField::from_fn(mesh, grid, |p, t| {
        eval(&f_modes, p) * (1.0 + (freq * PI * t / tau + phase).cos())
    });
    match index % 3 {
        0 => (Some(f), ScalarField::zeros(mesh)),
        1 => (None, h),
        _ => (Some(f), h),
    }
}

fn bounds(mesh: &Mesh) -> (f64, f64, f64, f64) {
    let nodes = mesh.nodes();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in nodes {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (lo[0], lo[1], (hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300))
}

fn random_modes(rng: &mut ChaCha8Rng, dim: usize) -> Vec<(usize, usize, f64)> {
    let mut modes = Vec::new();
    if dim == 1 {
        for k in 1..=8 {
            let a: f64 = rng.random_range(-1.0..1.0);
            modes.push((k, 0, a / k as f64));
        }
    } else {
        for k in 1..=4 {
            for l in 1..=4 {
                let a: f64 = rng.random_range(-1.0..1.0);
                modes.push((k, l, a / (k + l) as f64));
            }
        }
    }
    modes
}

/// Sampled lower bound for `C₀`: the largest stability ratio over a battery
/// of `battery` random data pairs drawn with `seed`.
pub fn estimate_stability_constant(
    solver: &ParabolicSolver,
    battery: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    if battery == 0 {
        return Err(Error::Empty("empty battery".into()));
    }
    let mut c0 = 0.0f64;
    for i in 0..battery {
        let (f, h) = random_stability_data(solver.mesh(), solver.grid(), seed, i);
        c0 = c0.max(stability_sample(solver, f.as_ref(), &h)?.ratio());
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::InvalidParameter(format!("degenerate stability estimate {c0}")));
    }
    Ok(StabilityEstimate {
        c0,
        method: StabilityMethod::Sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::{build_mesh, Domain};

    fn setup(n: usize, steps: usize, tau: f64) -> (Arc<Mesh>, TimeGrid, ParabolicSolver) {
        let mesh = Arc::new(build_mesh(Domain::unit_interval(), n).unwrap());
        let grid = TimeGrid::uniform(tau, steps).unwrap();
        let space = Arc::new(FemSpace::new(mesh.clone()).unwrap());
        let solver = ParabolicSolver::new(
            space,
            grid.clone(),
            MatrixField::identity(&mesh),
            TimeScheme::ImplicitEuler,
        )
        .unwrap();
        (mesh, grid, solver)
    }

    #[test]
    fn zero_data_zero_solution() {
        let (mesh, grid, solver) = setup(8, 8, 0.1);
        let u = solver.solve_forward(None, &ScalarField::zeros(&mesh)).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        let v = solver
            .solve_div_form(&MatrixField::zeros(&mesh), &SpaceTimeField::from_fn(&mesh, &grid, |p, _| p[0]))
            .unwrap();
        assert_eq!(v.max_abs(), 0.0);
        let z = solver.solve_backward(&SpaceTimeField::zeros(&mesh, &grid)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn spatially_constant_w_gives_zero() {
        let (mesh, grid, solver) = setup(8, 8, 0.1);
        let w = SpaceTimeField::from_fn(&mesh, &grid, |_, t| 1.0 + t);
        let v = solver.solve_div_form(&MatrixField::identity(&mesh), &w).unwrap();
        assert!(v.max_abs() < 1e-14);
    }

    #[test]
    fn terminal_level_is_zero() {
        let (mesh, grid, solver) = setup(8, 8, 0.1);
        let phi = SpaceTimeField::from_fn(&mesh, &grid, |p, t| p[0] * (1.0 - p[0]) + t);
        let z = solver.solve_backward(&phi).unwrap();
        assert!(z.levels.last().unwrap().iter().all(|v| *v == 0.0));
        assert!(z.levels[0].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn energy_decays_without_source() {
        let (mesh, _, solver) = setup(16, 20, 0.2);
        let h = ScalarField::from_fn(&mesh, |p| p[0] * (1.0 - p[0]) * (7.0 * p[0]).sin());
        let u = solver.solve_forward(None, &h).unwrap();
        let norms: Vec<f64> = u.levels.iter().map(|l| solver.space().l2_norm(l)).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn crank_nicolson_agrees_with_euler() {
        let (mesh, grid, euler) = setup(32, 64, 0.05);
        let cn = ParabolicSolver::new(
            euler.space().clone(),
            grid.clone(),
            MatrixField::identity(&mesh),
            TimeScheme::CrankNicolson,
        )
        .unwrap();
        let h = ScalarField::from_fn(&mesh, |p| (PI * p[0]).sin());
        let a = euler.solve_forward(None, &h).unwrap();
        let b = cn.solve_forward(None, &h).unwrap();
        let diff = a.axpby(1.0, &b, -1.0);
        assert!(euler.space().spacetime_l2(&diff) < 5e-3);
    }

    #[test]
    fn non_elliptic_and_bad_grid_rejected() {
        let mesh = Arc::new(build_mesh(Domain::unit_interval(), 4).unwrap());
        let space = Arc::new(FemSpace::new(mesh.clone()).unwrap());
        let grid = TimeGrid::uniform(0.1, 4).unwrap();
        let neg = MatrixField::constant(&mesh, [[-1.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(
            ParabolicSolver::new(space, grid, neg, TimeScheme::ImplicitEuler),
            Err(Error::NotElliptic(_))
        ));
        assert!(TimeGrid::new(vec![0.0, 0.2, 0.1]).is_err());
    }

    #[test]
    fn backward_spec_rules() {
        let mesh = Arc::new(build_mesh(Domain::unit_interval(), 4).unwrap());
        let grid = TimeGrid::uniform(0.1, 4).unwrap();
        let spec = ProblemSpec {
            mesh: mesh.clone(),
            grid: grid.clone(),
            coeff: MatrixField::identity(&mesh),
            source: Source::Divergence {
                coeff: MatrixField::identity(&mesh),
                w: SpaceTimeField::zeros(&mesh, &grid),
            },
            initial: None,
            direction: Direction::Backward,
            scheme: TimeScheme::ImplicitEuler,
        };
        assert!(solve(&spec).is_err());
    }

    #[test]
    fn stability_constant_basics() {
        let (_, _, solver) = setup(16, 32, 0.1);
        assert!(matches!(estimate_stability_constant(&solver, 0, 1), Err(Error::Empty(_))));
        let est = estimate_stability_constant(&solver, 6, 1).unwrap();
        assert!(est.c0.is_finite() && est.c0 > 0.0);
        assert_eq!(est.method, StabilityMethod::Sampled);
    }

    #[test]
    fn stability_ratio_is_homogeneous() {
        let (mesh, grid, solver) = setup(16, 32, 0.1);
        let (f, h) = random_stability_data(&mesh, &grid, 3, 2);
        let r1 = stability_sample(&solver, f.as_ref(), &h).unwrap().ratio();
        let f2 = f.as_ref().map(|f| f.scaled(2.0));
        let h2: ScalarField = h.iter().map(|v| 2.0 * v).collect::<Vec<_>>().into();
        let r2 = stability_sample(&solver, f2.as_ref(), &h2).unwrap().ratio();
        assert!((r1 - r2).abs() <= 1e-10 * r1);
    }
}
