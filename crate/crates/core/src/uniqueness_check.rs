//! Determinant test for identifiability of the diffusion matrix from a
//! single solution observed at `d²(d+1)` instants.
//!
//! Block `D^k_ij` is the `(d+1) x (d+1)` determinant with rows
//! `[∂_1u, …, ∂_du, ∂_i∂_ju]` at times `t_{(k-1)(d+1)+r}`, `r = 1..=d+1`, and
//! `D` is the `d² x d²` determinant with row `k` and columns ordered
//! `(1,1), (1,2), …, (d,d)`. For `d = 2` the columns `(1,2)` and `(2,1)`
//! coincide whenever the Hessian is symmetric, so `D` vanishes there.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh_fem::{Mesh, SpaceTimeField};

pub type Gradient = [f64; 2];
pub type Hessian = [[f64; 2]; 2];

/// First and second spatial derivatives of a space-time function.
pub struct AnalyticDerivatives<'a> {
    pub grad: Box<dyn Fn([f64; 2], f64) -> Gradient + Send + Sync + 'a>,
    pub hess: Box<dyn Fn([f64; 2], f64) -> Hessian + Send + Sync + 'a>,
}

pub enum DerivativeSource<'a> {
    Analytic(&'a AnalyticDerivatives<'a>),
    /// Discrete field; `recovery` must be enabled because P1 second
    /// derivatives vanish element-wise.
    Field { field: &'a SpaceTimeField, recovery: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Analytic,
    Recovered,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub times: Vec<f64>,
    /// `D` at each element barycenter.
    pub values: Vec<f64>,
    pub min_abs: f64,
    pub max_abs: f64,
    /// `s^{(d+1)d²}` with `s` the largest derivative magnitude encountered.
    pub scale: f64,
    pub threshold: f64,
    /// Share of elements with `|D| ≤ threshold`.
    pub fraction_below: f64,
    pub provider: ProviderKind,
}

impl UniquenessReport {
    pub fn fraction_above(&self) -> f64 {
        1.0 - self.fraction_below
    }
}

pub const RELATIVE_THRESHOLD: f64 = 1e-10;

/// Gradient recovery: area-weighted patch averages of element gradients give
/// a continuous nodal gradient, whose element gradients give the Hessian.
pub struct RecoveredDerivatives {
    /// `[level][node]`.
    nodal_grads: Vec<Vec<Gradient>>,
    times: Vec<f64>,
}

impl RecoveredDerivatives {
    pub fn new(mesh: &Mesh, field: &SpaceTimeField) -> Result<Self> {
        field.levels.iter().try_for_each(|l| l.check(mesh))?;
        let patches = mesh.node_patches();
        let nodal_grads = field
            .levels
            .iter()
            .map(|level| {
                let eg: Vec<Gradient> = (0..mesh.num_elements()).map(|e| mesh.element_gradient(e, level)).collect();
                patches
                    .iter()
                    .map(|patch| {
                        let mut g = [0.0; 2];
                        let mut area = 0.0;
                        for &e in patch {
                            let m = mesh.elements()[e].measure;
                            g[0] += m * eg[e][0];
                            g[1] += m * eg[e][1];
                            area += m;
                        }
                        [g[0] / area, g[1] / area]
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            nodal_grads,
            times: field.grid.points().to_vec(),
        })
    }

    fn level_derivatives(&self, mesh: &Mesh, level: usize, e: usize) -> (Gradient, Hessian) {
        let g = &self.nodal_grads[level];
        let gx: Vec<f64> = g.iter().map(|v| v[0]).collect();
        let gy: Vec<f64> = g.iter().map(|v| v[1]).collect();
        let mean = [mesh.element_mean(e, &gx), mesh.element_mean(e, &gy)];
        let hx = mesh.element_gradient(e, &gx);
        let hy = mesh.element_gradient(e, &gy);
        let off = 0.5 * (hx[1] + hy[0]);
        (mean, [[hx[0], off], [off, hy[1]]])
    }

    /// Derivatives on element `e` at time `t`, linear in time between levels.
    pub fn at(&self, mesh: &Mesh, e: usize, t: f64) -> (Gradient, Hessian) {
        let m = match self.times.iter().position(|&s| s >= t) {
            Some(0) => 1,
            Some(m) => m,
            None => self.times.len() - 1,
        };
        let (t0, t1) = (self.times[m - 1], self.times[m]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (g0, h0) = self.level_derivatives(mesh, m - 1, e);
        let (g1, h1) = self.level_derivatives(mesh, m, e);
        let lerp = |a: f64, b: f64| (1.0 - w) * a + w * b;
        (
            [lerp(g0[0], g1[0]), lerp(g0[1], g1[1])],
            [
                [lerp(h0[0][0], h1[0][0]), lerp(h0[0][1], h1[0][1])],
                [lerp(h0[1][0], h1[1][0]), lerp(h0[1][1], h1[1][1])],
            ],
        )
    }
}

/// `D` at one point from the derivatives at the sample times.
pub fn determinant_at(dim: usize, derivs: &[(Gradient, Hessian)]) -> f64 {
    let blocks = dim * dim;
    let mut outer = DMatrix::zeros(blocks, blocks);
    for k in 0..blocks {
        for i in 0..dim {
            for j in 0..dim {
                let mut inner = DMatrix::zeros(dim + 1, dim + 1);
                for r in 0..=dim {
                    let (g, h) = derivs[k * (dim + 1) + r];
                    for c in 0..dim {
                        inner[(r, c)] = g[c];
                    }
                    inner[(r, dim)] = h[i][j];
                }
                outer[(k, i * dim + j)] = inner.determinant();
            }
        }
    }
    outer.determinant()
}

pub fn uniqueness_determinant(
    mesh: &Mesh,
    source: DerivativeSource<'_>,
    times: &[f64],
    tau: f64,
) -> Result<UniquenessReport> {
    let d = mesh.dim();
    let needed = d * d * (d + 1);
    if times.len() != needed {
        return Err(Error::InvalidParameter(format!(
            "need exactly {needed} sample times in dimension {d}, got {}",
            times.len()
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && **t < tau)) {
        return Err(Error::InvalidParameter(format!("sample time {t} outside (0, {tau})")));
    }
    let (provider, eval): (ProviderKind, Box<dyn Fn(usize, f64) -> (Gradient, Hessian) + '_>) = match source {
        DerivativeSource::Analytic(a) => (
            ProviderKind::Analytic,
            Box::new(move |e, t| {
                let p = mesh.elements()[e].barycenter;
                ((a.grad)(p, t), (a.hess)(p, t))
            }),
        ),
        DerivativeSource::Field { recovery: false, .. } => {
            return Err(Error::InvalidParameter(
                "discrete fields need gradient recovery for second derivatives".into(),
            ))
        }
        DerivativeSource::Field { field, recovery: true } => {
            if (field.grid.tau() - tau).abs() > 1e-12 * tau.max(1.0) {
                return Err(Error::TimeGridMismatch(format!(
                    "field ends at {} but τ = {tau}",
                    field.grid.tau()
                )));
            }
            let rec = RecoveredDerivatives::new(mesh, field)?;
            (ProviderKind::Recovered, Box::new(move |e, t| rec.at(mesh, e, t)))
        }
    };

    let mut s = 0.0f64;
    let values: Vec<f64> = (0..mesh.num_elements())
        .map(|e| {
            let derivs: Vec<(Gradient, Hessian)> = times.iter().map(|&t| eval(e, t)).collect();
            for (g, h) in &derivs {
                for i in 0..d {
                    s = s.max(g[i].abs());
                    for j in 0..d {
                        s = s.max(h[i][j].abs());
                    }
                }
            }
            determinant_at(d, &derivs)
        })
        .collect();
    let scale = s.powi(((d + 1) * d * d) as i32);
    let threshold = RELATIVE_THRESHOLD * scale;
    let below = values.iter().filter(|v| v.abs() <= threshold).count();
    let abs = values.iter().map(|v| v.abs());
    Ok(UniquenessReport {
        times: times.to_vec(),
        min_abs: abs.clone().fold(f64::INFINITY, f64::min),
        max_abs: abs.fold(0.0, f64::max),
        fraction_below: below as f64 / values.len() as f64,
        values,
        scale,
        threshold,
        provider,
    })
}
