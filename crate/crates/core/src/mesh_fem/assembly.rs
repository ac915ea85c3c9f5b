//! P1 finite-element assembly of mass and coefficient-weighted stiffness matrices.

use std::sync::Arc;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::mesh_fem::fields::MatrixField;
use crate::mesh_fem::mesh::Mesh;

/// Consistent mass matrix `M_ij = ∫ φ_i φ_j`.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix<f64> {
    let n = mesh.num_nodes();
    let nv = mesh.dim() + 1;
    // ∫ λ_a λ_b = |e| (1 + δ_ab) / ((d + 1)(d + 2))
    let denom = (nv * (nv + 1)) as f64;
    let mut coo = CooMatrix::new(n, n);
    for (e, el) in mesh.elements().iter().enumerate() {
        let verts = mesh.element_vertices(e);
        for (a, &i) in verts.iter().enumerate() {
            for (b, &j) in verts.iter().enumerate() {
                let w = if a == b { 2.0 } else { 1.0 };
                coo.push(i, j, el.measure * w / denom);
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Stiffness matrix `K_ij = ∫ coeff ∇φ_j · ∇φ_i` with one-point (barycentric) quadrature.
pub fn assemble_stiffness(mesh: &Mesh, coeff: &MatrixField) -> Result<CsrMatrix<f64>> {
    coeff.check(mesh)?;
    let n = mesh.num_nodes();
    let d = mesh.dim();
    let mut coo = CooMatrix::new(n, n);
    for (e, el) in mesh.elements().iter().enumerate() {
        let a = coeff.at_element(mesh, e);
        let verts = mesh.element_vertices(e);
        for (p, &i) in verts.iter().enumerate() {
            for (q, &j) in verts.iter().enumerate() {
                let (gi, gj) = (el.grads[p], el.grads[q]);
                let mut s = 0.0;
                for r in 0..d {
                    for c in 0..d {
                        s += gi[r] * a[r][c] * gj[c];
                    }
                }
                coo.push(i, j, el.measure * s);
            }
        }
    }
    Ok(CsrMatrix::from(&coo))
}

/// Smallest eigenvalue of the coefficient over all quadrature points.
///
/// A positive value certifies discrete uniform ellipticity; the caller decides
/// whether a non-positive value is acceptable.
pub fn check_ellipticity(mesh: &Mesh, coeff: &MatrixField) -> Result<f64> {
    coeff.check(mesh)?;
    if !coeff.is_symmetric() {
        return Err(Error::Asymmetric(coeff.asymmetry()));
    }
    let q0 = (0..mesh.num_elements())
        .map(|e| min_eigenvalue(coeff.at_element(mesh, e), mesh.dim()))
        .fold(f64::INFINITY, f64::min);
    Ok(q0)
}

/// Checks symmetry and positive ellipticity, returning `q0`.
pub fn require_elliptic(mesh: &Mesh, coeff: &MatrixField) -> Result<f64> {
    let q0 = check_ellipticity(mesh, coeff)?;
    if q0 > 0.0 {
        Ok(q0)
    } else {
        Err(Error::NotElliptic(q0))
    }
}

fn min_eigenvalue(a: [[f64; 2]; 2], dim: usize) -> f64 {
    if dim == 1 {
        return a[0][0];
    }
    let mean = 0.5 * (a[0][0] + a[1][1]);
    let half_diff = 0.5 * (a[0][0] - a[1][1]);
    let off = 0.5 * (a[0][1] + a[1][0]);
    mean - half_diff.hypot(off)
}

/// `out = A x` for a CSR matrix.
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let (offsets, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in offsets[i]..offsets[i + 1] {
            s += vals[k] * x[cols[k]];
        }
        *o = s;
    }
}

pub fn matvec(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    spmv(a, x, &mut out);
    out
}

/// Quadratic form `xᵀ A y`.
pub fn bilinear(a: &CsrMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let (offsets, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    let mut total = 0.0;
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let mut s = 0.0;
        for k in offsets[i]..offsets[i + 1] {
            s += vals[k] * y[cols[k]];
        }
        total += xi * s;
    }
    total
}

/// Entry-wise `alpha * A + beta * B` restricted to the rows and columns in `keep`.
pub(crate) fn restricted_combination(
    a: &CsrMatrix<f64>,
    alpha: f64,
    b: &CsrMatrix<f64>,
    beta: f64,
    index: &[Option<usize>],
    size: usize,
) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(size, size);
    for (mat, s) in [(a, alpha), (b, beta)] {
        if s == 0.0 {
            continue;
        }
        for (i, j, v) in mat.triplet_iter() {
            if let (Some(r), Some(c)) = (index[i], index[j]) {
                coo.push(r, c, s * v);
            }
        }
    }
    CscMatrix::from(&coo)
}

/// Sparse Cholesky factor of an SPD matrix.
pub(crate) struct SpdFactor {
    chol: CscCholesky<f64>,
    size: usize,
}

impl SpdFactor {
    pub fn new(matrix: &CscMatrix<f64>) -> Result<Self> {
        let chol = CscCholesky::factor(matrix)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self {
            chol,
            size: matrix.nrows(),
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.size);
        if self.size == 0 {
            return Vec::new();
        }
        let b = DMatrix::from_column_slice(self.size, 1, rhs);
        self.chol.solve(&b).as_slice().to_vec()
    }
}

/// Mass and Laplace operators of a mesh together with the factorizations
/// needed for projections and discrete dual norms.
pub struct FemSpace {
    mesh: Arc<Mesh>,
    mass: CsrMatrix<f64>,
    laplace: CsrMatrix<f64>,
    interior_index: Vec<Option<usize>>,
    mass_interior: SpdFactor,
    h1_interior: SpdFactor,
}

impl FemSpace {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let mass = assemble_mass(&mesh);
        let laplace = assemble_stiffness(&mesh, &MatrixField::identity(&mesh))?;
        let mut interior_index = vec![None; mesh.num_nodes()];
        for (k, &i) in mesh.interior_nodes().iter().enumerate() {
            interior_index[i] = Some(k);
        }
        let ni = mesh.interior_nodes().len();
        let mass_interior =
            SpdFactor::new(&restricted_combination(&mass, 1.0, &mass, 0.0, &interior_index, ni))?;
        let h1_interior =
            SpdFactor::new(&restricted_combination(&mass, 1.0, &laplace, 1.0, &interior_index, ni))?;
        Ok(Self {
            mesh,
            mass,
            laplace,
            interior_index,
            mass_interior,
            h1_interior,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn mass(&self) -> &CsrMatrix<f64> {
        &self.mass
    }

    /// Stiffness matrix of the identity coefficient.
    pub fn laplace(&self) -> &CsrMatrix<f64> {
        &self.laplace
    }

    pub(crate) fn interior_index(&self) -> &[Option<usize>] {
        &self.interior_index
    }

    pub(crate) fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.mesh.interior_nodes().iter().map(|&i| full[i]).collect()
    }

    pub(crate) fn extend(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.num_nodes()];
        for (k, &i) in self.mesh.interior_nodes().iter().enumerate() {
            full[i] = interior[k];
        }
        full
    }

    /// L²-projection of a nodal function onto the Dirichlet-zero P1 space.
    pub fn project_dirichlet_zero(&self, values: &[f64]) -> Vec<f64> {
        let load = self.restrict(&matvec(&self.mass, values));
        self.extend(&self.mass_interior.solve(&load))
    }

    /// Dual norm of the functional `φ ↦ rᵀφ` over Dirichlet-zero P1 functions,
    /// measured against the full H¹ norm. `residual` is a full-length load vector.
    pub fn h1_dual_norm(&self, residual: &[f64]) -> f64 {
        let r = self.restrict(residual);
        let x = self.h1_interior.solve(&r);
        r.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }
}
