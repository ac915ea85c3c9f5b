//! Discrete field containers: nodal scalar fields, space-time fields and
//! matrix-valued coefficient fields.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::mesh_fem::mesh::Mesh;

/// Nodal (P1) values of a scalar function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![0.0; mesh.num_nodes()],
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            values: mesh.nodes().iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.values.len() != mesh.num_nodes() {
            return Err(Error::MeshMismatch(format!(
                "scalar field has {} values, mesh has {} nodes",
                self.values.len(),
                mesh.num_nodes()
            )));
        }
        Ok(())
    }

    /// True when every boundary node carries zero.
    pub fn is_dirichlet_zero(&self, mesh: &Mesh) -> bool {
        mesh.boundary_nodes().iter().all(|&i| self.values[i] == 0.0)
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Time grid `0 = t_0 < t_1 < ... < t_M = tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(tau: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidTimeGrid("need at least one step".into()));
        }
        let dt = tau / steps as f64;
        let mut points: Vec<f64> = (0..=steps).map(|m| m as f64 * dt).collect();
        points[steps] = tau;
        Self::new(points)
    }

    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidTimeGrid("need at least two time levels".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidTimeGrid(format!(
                "grid must start at 0, starts at {}",
                points[0]
            )));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTimeGrid(format!(
                "not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn tau(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Length of step `m` (from level `m` to level `m + 1`).
    pub fn dt(&self, m: usize) -> f64 {
        self.points[m + 1] - self.points[m]
    }

    pub fn max_dt(&self) -> f64 {
        (0..self.steps()).map(|m| self.dt(m)).fold(0.0, f64::max)
    }

    /// Trapezoid-rule weights on the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.points.len();
        let mut w = vec![0.0; n];
        for m in 0..n - 1 {
            let half = 0.5 * self.dt(m);
            w[m] += half;
            w[m + 1] += half;
        }
        w
    }

    /// The reversed grid `s_m = tau - t_{M-m}`.
    pub fn reversed(&self) -> Self {
        let tau = self.tau();
        let mut points: Vec<f64> = self.points.iter().rev().map(|t| tau - t).collect();
        points[0] = 0.0;
        *points.last_mut().unwrap() = tau;
        Self { points }
    }

    pub(crate) fn same_as(&self, other: &TimeGrid) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * self.tau().max(1.0))
    }
}

/// One nodal field per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub grid: TimeGrid,
    pub levels: Vec<ScalarField>,
}

impl SpaceTimeField {
    pub fn zeros(mesh: &Mesh, grid: &TimeGrid) -> Self {
        Self {
            grid: grid.clone(),
            levels: vec![ScalarField::zeros(mesh); grid.len()],
        }
    }

    pub fn from_fn(mesh: &Mesh, grid: &TimeGrid, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let levels = grid
            .points()
            .iter()
            .map(|&t| ScalarField::from_fn(mesh, |p| f(p, t)))
            .collect();
        Self {
            grid: grid.clone(),
            levels,
        }
    }

    pub fn check(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<()> {
        if !self.grid.same_as(grid) || self.levels.len() != grid.len() {
            return Err(Error::TimeGridMismatch(format!(
                "field has {} levels, expected {}",
                self.levels.len(),
                grid.len()
            )));
        }
        self.levels.iter().try_for_each(|l| l.check(mesh))
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self {
            grid: self.grid.clone(),
            levels: self.levels.iter().map(f).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &SpaceTimeField, b: f64) -> Self {
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| a * p + b * q).collect::<Vec<_>>().into())
            .collect();
        Self {
            grid: self.grid.clone(),
            levels,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|l| l.iter().map(|v| s * v).collect::<Vec<_>>().into())
    }

    pub fn max_abs(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Spatial representation of a coefficient entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// One value per mesh node (P1).
    Nodal,
    /// One value per element (P0).
    Cellwise,
}

/// A `d x d` array of scalar coefficient fields on a common mesh, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    dim: usize,
    repr: Representation,
    entries: Vec<Vec<f64>>,
}

impl MatrixField {
    pub fn new(dim: usize, repr: Representation, entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let len = entries[0].len();
        if entries.iter().any(|e| e.len() != len) {
            return Err(Error::InvalidParameter("entries differ in length".into()));
        }
        Ok(Self { dim, repr, entries })
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        let d = mesh.dim();
        Self {
            dim: d,
            repr: Representation::Cellwise,
            entries: vec![vec![0.0; mesh.num_elements()]; d * d],
        }
    }

    /// Element-wise constant field sampled at element barycenters.
    pub fn cellwise_from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> [[f64; 2]; 2]) -> Self {
        let d = mesh.dim();
        let mut entries = vec![vec![0.0; mesh.num_elements()]; d * d];
        for (e, el) in mesh.elements().iter().enumerate() {
            let a = f(el.barycenter);
            for i in 0..d {
                for j in 0..d {
                    entries[i * d + j][e] = a[i][j];
                }
            }
        }
        Self {
            dim: d,
            repr: Representation::Cellwise,
            entries,
        }
    }

    /// Nodal field sampled at mesh nodes.
    pub fn nodal_from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> [[f64; 2]; 2]) -> Self {
        let d = mesh.dim();
        let mut entries = vec![vec![0.0; mesh.num_nodes()]; d * d];
        for (n, &p) in mesh.nodes().iter().enumerate() {
            let a = f(p);
            for i in 0..d {
                for j in 0..d {
                    entries[i * d + j][n] = a[i][j];
                }
            }
        }
        Self {
            dim: d,
            repr: Representation::Nodal,
            entries,
        }
    }

    pub fn constant(mesh: &Mesh, a: [[f64; 2]; 2]) -> Self {
        Self::cellwise_from_fn(mesh, |_| a)
    }

    pub fn identity(mesh: &Mesh) -> Self {
        Self::constant(mesh, [[1.0, 0.0], [0.0, 1.0]])
    }

    /// Scalar multiple of the identity, `s(x) I`.
    pub fn isotropic(mesh: &Mesh, s: impl Fn([f64; 2]) -> f64) -> Self {
        Self::cellwise_from_fn(mesh, |p| {
            let v = s(p);
            [[v, 0.0], [0.0, v]]
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.dim + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.entries[i * d + j]
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        let expected = match self.repr {
            Representation::Nodal => mesh.num_nodes(),
            Representation::Cellwise => mesh.num_elements(),
        };
        if self.dim != mesh.dim() || self.entries[0].len() != expected {
            return Err(Error::MeshMismatch(format!(
                "{}x{} {:?} coefficient with {} values does not fit a {}D mesh",
                self.dim,
                self.dim,
                self.repr,
                self.entries[0].len(),
                mesh.dim()
            )));
        }
        Ok(())
    }

    /// Coefficient matrix at the barycenter of element `e` (the one-point quadrature value).
    pub fn at_element(&self, mesh: &Mesh, e: usize) -> [[f64; 2]; 2] {
        let d = self.dim;
        let mut a = [[0.0; 2]; 2];
        for i in 0..d {
            for j in 0..d {
                let entry = &self.entries[i * d + j];
                a[i][j] = match self.repr {
                    Representation::Cellwise => entry[e],
                    Representation::Nodal => mesh.element_mean(e, entry),
                };
            }
        }
        a
    }

    /// Converts to the element-wise representation by barycentric evaluation.
    pub fn to_cellwise(&self, mesh: &Mesh) -> Self {
        if self.repr == Representation::Cellwise {
            return self.clone();
        }
        let entries = self
            .entries
            .iter()
            .map(|entry| (0..mesh.num_elements()).map(|e| mesh.element_mean(e, entry)).collect())
            .collect();
        Self {
            dim: self.dim,
            repr: Representation::Cellwise,
            entries,
        }
    }

    /// Largest value-wise asymmetry `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i + 1..d {
                for (a, b) in self.entry(i, j).iter().zip(self.entry(j, i)) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        let scale = self.max_abs().max(1.0);
        self.asymmetry() <= 1e-12 * scale
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `a * self + b * other`; both operands must share representation and size.
    pub fn axpby(&self, a: f64, other: &MatrixField, b: f64) -> Result<Self> {
        if self.dim != other.dim
            || self.repr != other.repr
            || self.entries[0].len() != other.entries[0].len()
        {
            return Err(Error::MeshMismatch("matrix fields differ in layout".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        Ok(Self {
            dim: self.dim,
            repr: self.repr,
            entries,
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            repr: self.repr,
            entries: self
                .entries
                .iter()
                .map(|e| e.iter().map(|v| s * v).collect())
                .collect(),
        }
    }
}
