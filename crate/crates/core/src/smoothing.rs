//! Clément-type quasi-interpolation of raw nodal data and the effective
//! noise level `δ_h = max{h, δ/h²}` of smoothed data.
//!
//! Each output value is the value at the node of the least-squares affine
//! fit over the node's element patch, sampled at the patch vertices and at
//! the element barycenters (where the raw field is taken as the vertex mean).

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh_fem::{assemble_mass, bilinear, grad_linf, Mesh, ScalarField, SpaceTimeField, SpdFactor};

/// The smoothing map as a sparse linear operator on nodal values.
pub struct ClementOperator {
    rows: Vec<Vec<(usize, f64)>>,
}

impl ClementOperator {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let d = mesh.dim();
        let patches = mesh.node_patches();
        let nodes = mesh.nodes();
        let rows = patches
            .iter()
            .enumerate()
            .map(|(i, patch)| {
                let mut verts: Vec<usize> = patch.iter().flat_map(|&e| mesh.element_vertices(e).to_vec()).collect();
                verts.sort_unstable();
                verts.dedup();
                let local = |n: usize| verts.binary_search(&n).unwrap();
                // sample points: vertices, then barycenters
                let count = verts.len() + patch.len();
                let mut a = DMatrix::zeros(count, d + 1);
                let mut s = DMatrix::zeros(count, verts.len());
                let xi = nodes[i];
                for (r, &v) in verts.iter().enumerate() {
                    a[(r, 0)] = 1.0;
                    for c in 0..d {
                        a[(r, c + 1)] = nodes[v][c] - xi[c];
                    }
                    s[(r, r)] = 1.0;
                }
                for (q, &e) in patch.iter().enumerate() {
                    let r = verts.len() + q;
                    let bc = mesh.elements()[e].barycenter;
                    a[(r, 0)] = 1.0;
                    for c in 0..d {
                        a[(r, c + 1)] = bc[c] - xi[c];
                    }
                    let ev = mesh.element_vertices(e);
                    for &v in ev {
                        s[(r, local(v))] = 1.0 / ev.len() as f64;
                    }
                }
                let ata = a.transpose() * &a;
                let mut e1 = DVector::zeros(d + 1);
                e1[0] = 1.0;
                let g = ata
                    .cholesky()
                    .ok_or_else(|| Error::Factorization(format!("degenerate patch at node {i}")))?
                    .solve(&e1);
                let w = (g.transpose() * a.transpose()) * s;
                Ok(verts.iter().enumerate().map(|(k, &v)| (v, w[k])).collect())
            })
            .collect::<Result<Vec<Vec<(usize, f64)>>>>()?;
        Ok(Self { rows })
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * values[j]).sum())
            .collect()
    }
}

pub fn clement_smooth(mesh: &Mesh, raw: &ScalarField) -> Result<ScalarField> {
    raw.check(mesh)?;
    Ok(ClementOperator::new(mesh)?.apply(raw).into())
}

/// Level-wise smoothing; the time grid is unchanged.
pub fn smooth_spacetime(mesh: &Mesh, raw: &SpaceTimeField) -> Result<SpaceTimeField> {
    raw.levels.iter().try_for_each(|l| l.check(mesh))?;
    let op = ClementOperator::new(mesh)?;
    Ok(SpaceTimeField {
        grid: raw.grid.clone(),
        levels: raw.levels.par_iter().map(|l| op.apply(l).into()).collect(),
    })
}

/// `‖u‖_∞ + ‖∇u‖_∞` of a P1 field.
pub fn w1inf_norm(mesh: &Mesh, u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |m, v| m.max(v.abs())) + grad_linf(mesh, u)
}

/// Empirical stability and inverse-estimate constants of the smoother.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasuredConstants {
    /// `max ‖v - Πv‖_{L²} / ‖v‖_{L²}`.
    pub c1: f64,
    /// `max ‖Πv‖_{W^{1,∞}} h² / ‖v‖_{L²}`.
    pub c5: f64,
}

/// Measures the constants on `samples` seeded white-noise nodal fields.
pub fn measure_constants(mesh: &Mesh, samples: usize, seed: u64) -> Result<MeasuredConstants> {
    if samples == 0 {
        return Err(Error::Empty("no samples".into()));
    }
    let op = ClementOperator::new(mesh)?;
    let mass = assemble_mass(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h2 = mesh.h().powi(2);
    let (mut c1, mut c5) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let v: Vec<f64> = (0..mesh.num_nodes()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let pv = op.apply(&v);
        let norm = bilinear(&mass, &v, &v).sqrt();
        let diff: Vec<f64> = v.iter().zip(&pv).map(|(a, b)| a - b).collect();
        c1 = c1.max(bilinear(&mass, &diff, &diff).sqrt() / norm);
        c5 = c5.max(w1inf_norm(mesh, &pv) * h2 / norm);
    }
    Ok(MeasuredConstants { c1, c5 })
}

/// Worst-case counterpart of `c5`: the dual norms, in the mass inner product,
/// of `v ↦ (Πv)(x_i)` and `v ↦ ∇(Πv)|_S`, maximized over nodes and elements,
/// summed and scaled by `h²`. Bounds `‖Πv‖_{W^{1,∞}} h² / ‖v‖_{L²}` for every `v`.
pub fn worst_case_constant(mesh: &Mesh) -> Result<f64> {
    let op = ClementOperator::new(mesh)?;
    let n = mesh.num_nodes();
    let factor = SpdFactor::new(&CscMatrix::from(&assemble_mass(mesh)))?;
    let dual = |g: &[f64]| -> Vec<f64> { factor.solve(g) };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let value = op
        .rows
        .par_iter()
        .map(|row| {
            let mut g = vec![0.0; n];
            row.iter().for_each(|&(j, w)| g[j] += w);
            dot(&g, &dual(&g)).sqrt()
        })
        .reduce(|| 0.0, f64::max);
    let d = mesh.dim();
    let grad = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let el = &mesh.elements()[e];
            let rows: Vec<Vec<f64>> = (0..d)
                .map(|c| {
                    let mut g = vec![0.0; n];
                    for (loc, &v) in mesh.element_vertices(e).iter().enumerate() {
                        op.rows[v].iter().for_each(|&(j, w)| g[j] += el.grads[loc][c] * w);
                    }
                    g
                })
                .collect();
            let sol: Vec<Vec<f64>> = rows.iter().map(|g| dual(g)).collect();
            let lambda = if d == 1 {
                dot(&rows[0], &sol[0])
            } else {
                let (a, b, c) = (dot(&rows[0], &sol[0]), dot(&rows[0], &sol[1]), dot(&rows[1], &sol[1]));
                0.5 * (a + c) + (0.25 * (a - c).powi(2) + b * b).sqrt()
            };
            lambda.max(0.0).sqrt()
        })
        .reduce(|| 0.0, f64::max);
    Ok((value + grad) * mesh.h().powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub h: f64,
    pub delta: f64,
    /// `max{h, δ/h²}`.
    pub delta_h: f64,
    pub constants: Option<MeasuredConstants>,
    /// `2 C̃ δ_h`, once `C̃` has been fitted.
    pub bound: Option<f64>,
    /// `‖∇(u - Π̂ũ)(·, t_m)‖²_∞` per time level, when the truth is known.
    pub gradient_misfit: Vec<f64>,
}

pub fn modified_noise_level(delta: f64, h: f64) -> Result<SmoothingReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("mesh size must be positive, got {h}")));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise level must be non-negative, got {delta}")));
    }
    Ok(SmoothingReport {
        h,
        delta,
        delta_h: h.max(delta / (h * h)),
        constants: None,
        bound: None,
        gradient_misfit: Vec::new(),
    })
}

impl SmoothingReport {
    pub fn with_constant(mut self, c_tilde: f64) -> Self {
        self.bound = Some(2.0 * c_tilde * self.delta_h);
        self
    }
}

/// Mesh size minimizing `max{h, δ/h²}`, namely `δ^{1/3}`.
pub fn optimal_mesh_size(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be positive, got {delta}")));
    }
    Ok(delta.cbrt())
}

/// Per-level `‖∇(u - v)‖²_∞`.
pub fn gradient_misfit(mesh: &Mesh, u: &SpaceTimeField, v: &SpaceTimeField) -> Vec<f64> {
    u.levels
        .iter()
        .zip(&v.levels)
        .map(|(a, b)| {
            let d: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
            grad_linf(mesh, &d).powi(2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::{build_mesh, Domain, TimeGrid};

    #[test]
    fn worst_case_dominates_samples() {
        for mesh in [
            build_mesh(Domain::unit_interval(), 12).unwrap(),
            build_mesh(Domain::unit_square(), 6).unwrap(),
        ] {
            let sup = worst_case_constant(&mesh).unwrap();
            let sampled = measure_constants(&mesh, 10, 5).unwrap().c5;
            assert!(sampled <= sup * (1.0 + 1e-12), "{sampled} > {sup}");
            // a single nodal spike is close to the worst case
            let op = ClementOperator::new(&mesh).unwrap();
            let mass = assemble_mass(&mesh);
            let mut v = vec![0.0; mesh.num_nodes()];
            v[mesh.interior_nodes()[0]] = 1.0;
            let ratio = w1inf_norm(&mesh, &op.apply(&v)) * mesh.h().powi(2) / bilinear(&mass, &v, &v).sqrt();
            assert!(ratio <= sup * (1.0 + 1e-12) && ratio > 0.05 * sup);
        }
    }

    #[test]
    fn reproduces_constants_and_affine() {
        for mesh in [
            build_mesh(Domain::unit_interval(), 7).unwrap(),
            build_mesh(Domain::unit_square(), 5).unwrap(),
        ] {
            let c = ScalarField::from_fn(&mesh, |_| 2.5);
            let sc = clement_smooth(&mesh, &c).unwrap();
            assert!(sc.iter().all(|v| (v - 2.5).abs() < 1e-12));
            let f = |p: [f64; 2]| 1.0 - 2.0 * p[0] + 0.5 * p[1];
            let a = ScalarField::from_fn(&mesh, f);
            let sa = clement_smooth(&mesh, &a).unwrap();
            assert!(sa.iter().zip(a.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn spacetime_smoothing_shapes() {
        let mesh = build_mesh(Domain::unit_square(), 4).unwrap();
        let grid = TimeGrid::uniform(0.1, 3).unwrap();
        let z = SpaceTimeField::zeros(&mesh, &grid);
        let s = smooth_spacetime(&mesh, &z).unwrap();
        assert_eq!(s.num_levels(), 4);
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn delta_h_arithmetic() {
        let r = modified_noise_level(1e-3, 0.1).unwrap();
        assert!((r.delta_h - 0.1).abs() < 1e-15);
        assert_eq!(modified_noise_level(1e-4, 0.1).unwrap().delta_h, 0.1);
        assert_eq!(modified_noise_level(0.0, 0.2).unwrap().delta_h, 0.2);
        assert_eq!(modified_noise_level(1e-2, 0.1).unwrap().delta_h, 1e-2 / (0.1 * 0.1));
        assert!(modified_noise_level(1e-3, 0.0).is_err());
        assert!(optimal_mesh_size(0.0).is_err());
    }

    #[test]
    fn optimal_mesh_size_minimizes_delta_h() {
        for delta in [1e-2, 1e-3, 1e-5] {
            let h = optimal_mesh_size(delta).unwrap();
            let dh = |h: f64| h.max(delta / (h * h));
            let best = (1..4000)
                .map(|i| i as f64 * 1e-4)
                .map(|x| (dh(x), x))
                .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
                .1;
            assert!(h / best < 2.0 && best / h < 2.0);
        }
    }

    #[test]
    fn stability_constant_is_moderate() {
        let mesh = build_mesh(Domain::unit_square(), 8).unwrap();
        let c = measure_constants(&mesh, 5, 1).unwrap();
        assert!(c.c1 > 0.0 && c.c1 < 2.0);
        assert!(c.c5 > 0.0);
    }
}
