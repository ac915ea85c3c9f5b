//! The linearized coefficient-to-data map `T_w C = v`, where
//! `v_t - ∇·A₀∇v = ∇·C∇w`, `v(0) = 0`, together with its adjoint and the
//! a-priori bounds on its norm.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh_fem::{grad_linf_time_l2, MatrixField, Representation, SpaceTimeField};
use crate::parabolic_solver::{ParabolicSolver, StabilityEstimate};

/// `T_w` for a fixed linearization point `w` and base coefficient `A₀`.
pub struct LinearizedOperator {
    solver: Arc<ParabolicSolver>,
    w: SpaceTimeField,
    /// Element gradients of `w`, indexed `[level][element]`.
    grads: Vec<Vec<[f64; 2]>>,
    grad_term: f64,
    stability: StabilityEstimate,
}

impl LinearizedOperator {
    pub fn new(solver: Arc<ParabolicSolver>, w: SpaceTimeField, stability: StabilityEstimate) -> Result<Self> {
        let mesh = solver.mesh();
        w.check(mesh, solver.grid())?;
        let grads = w
            .levels
            .iter()
            .map(|l| (0..mesh.num_elements()).map(|e| mesh.element_gradient(e, l)).collect())
            .collect();
        let grad_term = grad_linf_time_l2(mesh, &w);
        Ok(Self {
            solver,
            w,
            grads,
            grad_term,
            stability,
        })
    }

    pub fn solver(&self) -> &Arc<ParabolicSolver> {
        &self.solver
    }

    pub fn point(&self) -> &SpaceTimeField {
        &self.w
    }

    pub fn stability(&self) -> StabilityEstimate {
        self.stability
    }

    /// `(∫₀^τ ‖∇w‖²_∞ dt)^{1/2}`.
    pub fn gradient_term(&self) -> f64 {
        self.grad_term
    }

    /// True when `∇w` vanishes identically, so that `T_w = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.grad_term == 0.0
    }

    /// `T_w C`.
    pub fn apply(&self, c: &MatrixField) -> Result<SpaceTimeField> {
        c.check(self.solver.mesh())?;
        self.solver.solve_div_form(c, &self.w)
    }

    /// `T_w* φ = ∫₀^τ ∇z (∇w)ᵀ dt` with `z` the backward solution for `φ`,
    /// integrated by the trapezoid rule and returned element-wise.
    pub fn adjoint(&self, phi: &SpaceTimeField) -> Result<MatrixField> {
        let mesh = self.solver.mesh();
        let z = self.solver.solve_backward(phi)?;
        let d = mesh.dim();
        let ne = mesh.num_elements();
        let mut entries = vec![vec![0.0; ne]; d * d];
        for (m, weight) in self.solver.grid().trapezoid_weights().into_iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            let zl = &z.levels[m];
            for e in 0..ne {
                let gz = mesh.element_gradient(e, zl);
                let gw = self.grads[m][e];
                for i in 0..d {
                    for j in 0..d {
                        entries[i * d + j][e] += weight * gz[i] * gw[j];
                    }
                }
            }
        }
        MatrixField::new(d, Representation::Cellwise, entries)
    }

    /// `d √C₀ (∫₀^τ ‖∇w‖²_∞ dt)^{1/2}`.
    pub fn norm_bound(&self) -> f64 {
        self.solver.mesh().dim() as f64 * self.stability.c0.sqrt() * self.grad_term
    }
}

pub fn apply_t(op: &LinearizedOperator, c: &MatrixField) -> Result<SpaceTimeField> {
    op.apply(c)
}

pub fn apply_t_star(op: &LinearizedOperator, phi: &SpaceTimeField) -> Result<MatrixField> {
    op.adjoint(phi)
}

pub fn operator_norm_bound(op: &LinearizedOperator) -> f64 {
    op.norm_bound()
}

/// Bound on `‖T_u - T_ũ‖`: `d √C₀ (∫₀^τ ‖∇u - ∇ũ‖²_∞ dt)^{1/2}`, using the
/// larger of the two stability estimates.
pub fn perturbation_bound(a: &LinearizedOperator, b: &LinearizedOperator) -> Result<f64> {
    let (sa, sb) = (&a.solver, &b.solver);
    if !Arc::ptr_eq(sa.space().mesh_arc(), sb.space().mesh_arc()) && sa.mesh() != sb.mesh() {
        return Err(Error::MeshMismatch("operators live on different meshes".into()));
    }
    if sa.grid() != sb.grid() {
        return Err(Error::TimeGridMismatch("operators use different time grids".into()));
    }
    if sa.coeff() != sb.coeff() {
        return Err(Error::InvalidParameter(
            "perturbation bound requires a common base coefficient".into(),
        ));
    }
    let diff = a.w.axpby(1.0, &b.w, -1.0);
    let c0 = a.stability.c0.max(b.stability.c0);
    Ok(sa.mesh().dim() as f64 * c0.sqrt() * grad_linf_time_l2(sa.mesh(), &diff))
}
