//! Nested piecewise-constant coefficient spaces, the induced matrix basis,
//! orthogonal projection onto it and estimates of the projection gap
//! `‖T (I - P_n)‖`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linearized_operator::LinearizedOperator;
use crate::mesh_fem::{frobenius_norm, MatrixField, Mesh, Representation};

/// L²-normalized indicator functions of a partition of the domain into
/// cells that are unions of mesh elements, and the matrix basis `E^l_ij`
/// carrying the `l`-th indicator in slot `(i, j)`.
///
/// Matrix basis element `k` has slot `(i, j) = ((k / n) / d, (k / n) % d)`
/// and scalar index `l = k % n`.
#[derive(Debug, Clone)]
pub struct CoeffBasis {
    mesh: Arc<Mesh>,
    level: Option<usize>,
    cell_of_element: Vec<usize>,
    cell_measure: Vec<f64>,
}

/// Piecewise constants on the dyadic partition with `2^level` cells per axis.
pub fn build_basis(mesh: Arc<Mesh>, level: usize) -> Result<CoeffBasis> {
    let cells = 1usize
        .checked_shl(level as u32)
        .filter(|c| *c <= 1 << 20)
        .ok_or_else(|| Error::Partition(format!("level {level} is too deep")))?;
    let d = mesh.dim();
    let divisions = mesh.divisions();
    for (axis, &n) in divisions.iter().enumerate().take(d) {
        if n % cells != 0 {
            return Err(Error::Partition(format!(
                "{cells} cells per axis do not tile {n} mesh subdivisions on axis {axis}"
            )));
        }
    }
    let ([ox, oy], [sx, sy]) = mesh.domain().bounds();
    let per_axis = [cells, if d == 2 { cells } else { 1 }];
    let cell_of_element: Vec<usize> = mesh
        .elements()
        .iter()
        .map(|el| {
            let cx = (((el.barycenter[0] - ox) / sx * per_axis[0] as f64) as usize).min(per_axis[0] - 1);
            let cy = (((el.barycenter[1] - oy) / sy * per_axis[1] as f64) as usize).min(per_axis[1] - 1);
            cy * per_axis[0] + cx
        })
        .collect();
    CoeffBasis::from_partition(mesh, Some(level), cell_of_element, per_axis[0] * per_axis[1])
}

impl CoeffBasis {
    /// One cell per mesh element: spans the whole discrete P0 coefficient space.
    pub fn per_element(mesh: Arc<Mesh>) -> Result<Self> {
        let ne = mesh.num_elements();
        Self::from_partition(mesh, None, (0..ne).collect(), ne)
    }

    fn from_partition(
        mesh: Arc<Mesh>,
        level: Option<usize>,
        cell_of_element: Vec<usize>,
        cells: usize,
    ) -> Result<Self> {
        let mut cell_measure = vec![0.0; cells];
        for (el, &c) in mesh.elements().iter().zip(&cell_of_element) {
            cell_measure[c] += el.measure;
        }
        if let Some(c) = cell_measure.iter().position(|m| *m <= 0.0) {
            return Err(Error::Partition(format!("cell {c} contains no element")));
        }
        Ok(Self {
            mesh,
            level,
            cell_of_element,
            cell_measure,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Dyadic level, or `None` for the per-element basis.
    pub fn level(&self) -> Option<usize> {
        self.level
    }

    /// Number of scalar basis functions `n`.
    pub fn n(&self) -> usize {
        self.cell_measure.len()
    }

    /// Size `n d²` of the matrix basis.
    pub fn size(&self) -> usize {
        let d = self.mesh.dim();
        self.n() * d * d
    }

    pub fn cell_of_element(&self) -> &[usize] {
        &self.cell_of_element
    }

    /// Element values of the scalar basis function `l`.
    pub fn scalar_function(&self, l: usize) -> Vec<f64> {
        let v = 1.0 / self.cell_measure[l].sqrt();
        self.cell_of_element
            .iter()
            .map(|&c| if c == l { v } else { 0.0 })
            .collect()
    }

    /// `(i, j, l)` for matrix basis index `k`.
    pub fn slot(&self, k: usize) -> (usize, usize, usize) {
        let (n, d) = (self.n(), self.mesh.dim());
        let ij = k / n;
        (ij / d, ij % d, k % n)
    }

    pub fn element(&self, k: usize) -> MatrixField {
        let mut c = vec![0.0; self.size()];
        c[k] = 1.0;
        self.expand(&c)
    }

    /// `Σ_k c_k E_k`.
    pub fn expand(&self, coeffs: &[f64]) -> MatrixField {
        let (n, d) = (self.n(), self.mesh.dim());
        let scale: Vec<f64> = self.cell_measure.iter().map(|m| 1.0 / m.sqrt()).collect();
        let entries = (0..d * d)
            .map(|ij| {
                self.cell_of_element
                    .iter()
                    .map(|&c| coeffs[ij * n + c] * scale[c])
                    .collect()
            })
            .collect();
        MatrixField::new(d, Representation::Cellwise, entries).expect("basis layout")
    }

    /// Coordinates `⟨C, E_k⟩` of the projection of `c`.
    pub fn coefficients(&self, c: &MatrixField) -> Result<Vec<f64>> {
        c.check(&self.mesh)?;
        let c = c.to_cellwise(&self.mesh);
        let (n, d) = (self.n(), self.mesh.dim());
        let mut out = vec![0.0; n * d * d];
        for (ij, entry) in c.entries().iter().enumerate() {
            for ((el, &cell), v) in self.mesh.elements().iter().zip(&self.cell_of_element).zip(entry) {
                out[ij * n + cell] += el.measure * v;
            }
        }
        for (k, o) in out.iter_mut().enumerate() {
            *o /= self.cell_measure[k % n].sqrt();
        }
        Ok(out)
    }

    /// L²-orthogonal projection (cell means of every entry).
    pub fn project(&self, c: &MatrixField) -> Result<MatrixField> {
        Ok(self.expand(&self.coefficients(c)?))
    }
}

pub fn project(basis: &CoeffBasis, c: &MatrixField) -> Result<MatrixField> {
    basis.project(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionGap {
    pub level: Option<usize>,
    /// Power-iteration estimate of `‖T (I - P_n)‖`.
    pub estimate: f64,
    /// `GAP_SAFETY * estimate`.
    pub epsilon: f64,
}

pub const GAP_SAFETY: f64 = 2.0;

/// Estimates `‖T (I - P_n)‖` by `iterations` steps of power iteration on
/// `(I - P_n) T* T (I - P_n)` over the element-wise coefficient space,
/// starting from a seeded random field.
pub fn projection_gap(
    op: &LinearizedOperator,
    basis: &CoeffBasis,
    iterations: usize,
    seed: u64,
) -> Result<ProjectionGap> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("projection gap needs at least one iteration".into()));
    }
    let mesh = basis.mesh();
    let done = |estimate: f64| ProjectionGap {
        level: basis.level(),
        estimate,
        epsilon: GAP_SAFETY * estimate,
    };
    if op.is_degenerate() {
        return Ok(done(0.0));
    }
    let d = mesh.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..d * d)
        .map(|_| (0..mesh.num_elements()).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut x = MatrixField::new(d, Representation::Cellwise, entries)?;
    let complement = |c: &MatrixField| -> Result<MatrixField> { c.axpby(1.0, &basis.project(c)?, -1.0) };

    let mut estimate = 0.0;
    for _ in 0..iterations {
        x = complement(&x)?;
        let norm = frobenius_norm(mesh, &x)?;
        // relative to the start vector, anything this small is the null space
        if norm <= 1e-12 {
            return Ok(done(0.0));
        }
        x = x.scaled(1.0 / norm);
        let tx = op.apply(&x)?;
        estimate = op.solver().space().spacetime_l2(&tx);
        if estimate == 0.0 {
            return Ok(done(0.0));
        }
        x = op.adjoint(&tx)?;
    }
    Ok(done(estimate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::{build_mesh, frobenius_inner, Domain};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn interval(n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(Domain::unit_interval(), n).unwrap())
    }

    #[test]
    fn level_zero_interval() {
        let b = build_basis(interval(8), 0).unwrap();
        assert_eq!((b.n(), b.size()), (1, 1));
        assert!(b.scalar_function(0).iter().all(|v| (*v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn level_two_gram_is_identity() {
        let mesh = interval(16);
        let b = build_basis(mesh.clone(), 2).unwrap();
        assert_eq!(b.n(), 4);
        for k in 0..4 {
            let fk = b.scalar_function(k);
            assert!(fk.iter().all(|v| *v == 0.0 || (*v - 2.0).abs() < 1e-14));
            for l in 0..4 {
                let g: f64 = mesh
                    .elements()
                    .iter()
                    .zip(fk.iter().zip(b.scalar_function(l)))
                    .map(|(e, (x, y))| e.measure * x * y)
                    .sum();
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn square_level_one_has_sixteen_elements() {
        let mesh = Arc::new(build_mesh(Domain::unit_square(), 4).unwrap());
        let b = build_basis(mesh.clone(), 1).unwrap();
        assert_eq!(b.size(), 16);
        for k in 0..16 {
            let e = b.element(k);
            assert!((frobenius_norm(&mesh, &e).unwrap() - 1.0).abs() < 1e-13);
        }
        assert!(matches!(build_basis(mesh, 3), Err(Error::Partition(_))));
    }

    #[test]
    fn sine_projects_to_its_mean() {
        let mesh = interval(256);
        let b = build_basis(mesh.clone(), 0).unwrap();
        let c = MatrixField::nodal_from_fn(&mesh, |p| [[(PI * p[0]).sin(), 0.0], [0.0, 0.0]]);
        let p = b.project(&c).unwrap();
        assert!(p.entry(0, 0).iter().all(|v| (v - 2.0 / PI).abs() < 1e-4));
    }

    #[test]
    fn nested_projection() {
        let mesh = interval(16);
        let c = MatrixField::isotropic(&mesh, |p| (5.0 * p[0]).exp());
        let (b1, b2) = (build_basis(mesh.clone(), 1).unwrap(), build_basis(mesh.clone(), 2).unwrap());
        let lhs = b1.project(&b2.project(&c).unwrap()).unwrap();
        let rhs = b1.project(&c).unwrap();
        assert!(lhs.axpby(1.0, &rhs, -1.0).unwrap().max_abs() < 1e-12);
        let errs: Vec<f64> = (0..=4)
            .map(|l| {
                let b = build_basis(mesh.clone(), l).unwrap();
                frobenius_norm(&mesh, &c.axpby(1.0, &b.project(&c).unwrap(), -1.0).unwrap()).unwrap()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
    }

    fn field(mesh: &Mesh, vals: &[f64]) -> MatrixField {
        let ne = mesh.num_elements();
        let entries = (0..4).map(|k| (0..ne).map(|e| vals[(3 * k + e) % vals.len()]).collect()).collect();
        MatrixField::new(2, Representation::Cellwise, entries).unwrap()
    }

    proptest! {
        #[test]
        fn orthogonal_projection(a in prop::collection::vec(-5.0f64..5.0, 29), b in prop::collection::vec(-5.0f64..5.0, 31), level in 0usize..3) {
            let mesh = Arc::new(build_mesh(Domain::unit_square(), 4).unwrap());
            let basis = build_basis(mesh.clone(), level).unwrap();
            let (c, d) = (field(&mesh, &a), field(&mesh, &b));
            let pc = basis.project(&c).unwrap();
            let ppc = basis.project(&pc).unwrap();
            prop_assert!(pc.axpby(1.0, &ppc, -1.0).unwrap().max_abs() <= 1e-12 * (1.0 + pc.max_abs()));
            let l = frobenius_inner(&mesh, &pc, &d).unwrap();
            let r = frobenius_inner(&mesh, &c, &basis.project(&d).unwrap()).unwrap();
            prop_assert!((l - r).abs() <= 1e-10 * (1.0 + l.abs()));
            prop_assert!(frobenius_norm(&mesh, &pc).unwrap() <= frobenius_norm(&mesh, &c).unwrap() * (1.0 + 1e-12));
        }
    }
}
