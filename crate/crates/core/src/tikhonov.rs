//! Galerkin-projected Tikhonov regularization: assembly of the normal
//! equations `(U + αD) c = b` and their solution along an α grid.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::galerkin::CoeffBasis;
use crate::linearized_operator::LinearizedOperator;
use crate::mesh_fem::{FemSpace, MatrixField, SpaceTimeField};

/// `U_kl = ⟨T E_k, T E_l⟩`, `D_kl = ⟨E_k, E_l⟩`, `b_k = ⟨rhs, T E_k⟩`.
pub struct NormalSystem {
    u: DMatrix<f64>,
    d: DMatrix<f64>,
    b: DVector<f64>,
    rhs_norm: f64,
    basis: Option<CoeffBasis>,
    images: Option<Images>,
    degenerate: bool,
}

struct Images {
    space: Arc<FemSpace>,
    fields: Vec<SpaceTimeField>,
    rhs: SpaceTimeField,
}

/// Applies `T` to every basis element (in parallel) and forms the Gram
/// matrices by space-time inner products.
pub fn assemble_normal_system(
    op: &LinearizedOperator,
    basis: &CoeffBasis,
    rhs: &SpaceTimeField,
) -> Result<NormalSystem> {
    let solver = op.solver();
    let mesh = solver.mesh();
    if basis.mesh().as_ref() != mesh {
        return Err(Error::MeshMismatch("basis and operator meshes differ".into()));
    }
    rhs.check(mesh, solver.grid())?;
    let size = basis.size();
    let fields = (0..size)
        .into_par_iter()
        .map(|k| op.apply(&basis.element(k)))
        .collect::<Result<Vec<_>>>()?;
    let space = solver.space().clone();

    let u_entries: Vec<(usize, usize, f64)> = (0..size)
        .into_par_iter()
        .flat_map_iter(|k| {
            let fields = &fields;
            let space = &space;
            (k..size).map(move |l| (k, l, space.spacetime_inner(&fields[k], &fields[l])))
        })
        .collect();
    let mut u = DMatrix::zeros(size, size);
    for (k, l, v) in u_entries {
        u[(k, l)] = v;
        u[(l, k)] = v;
    }
    let b = DVector::from_vec(fields.par_iter().map(|f| space.spacetime_inner(rhs, f)).collect());
    let d = gram(basis);
    let degenerate = u.iter().all(|v| *v == 0.0);
    Ok(NormalSystem {
        u,
        d,
        b,
        rhs_norm: space.spacetime_l2(rhs),
        basis: Some(basis.clone()),
        images: Some(Images {
            space,
            fields,
            rhs: rhs.clone(),
        }),
        degenerate,
    })
}

fn gram(basis: &CoeffBasis) -> DMatrix<f64> {
    let mesh = basis.mesh();
    let (n, size) = (basis.n(), basis.size());
    let mut cell_sum = vec![0.0; n];
    let mut d = DMatrix::zeros(size, size);
    for l in 0..n {
        let f = basis.scalar_function(l);
        cell_sum[l] = mesh.elements().iter().zip(&f).map(|(e, v)| e.measure * v * v).sum();
    }
    for k in 0..size {
        d[(k, k)] = cell_sum[k % n];
    }
    d
}

impl NormalSystem {
    /// A system given directly by its matrices; `rhs_norm` is `‖rhs‖` so
    /// residuals can be evaluated from the quadratic expansion.
    pub fn from_parts(u: DMatrix<f64>, d: DMatrix<f64>, b: DVector<f64>, rhs_norm: f64) -> Result<Self> {
        let size = u.nrows();
        if u.ncols() != size || d.shape() != (size, size) || b.len() != size || size == 0 {
            return Err(Error::InvalidParameter("normal system dimensions disagree".into()));
        }
        let degenerate = u.iter().all(|v| *v == 0.0);
        Ok(Self {
            u,
            d,
            b,
            rhs_norm,
            basis: None,
            images: None,
            degenerate,
        })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn size(&self) -> usize {
        self.b.len()
    }

    pub fn rhs_norm(&self) -> f64 {
        self.rhs_norm
    }

    pub fn basis(&self) -> Option<&CoeffBasis> {
        self.basis.as_ref()
    }

    pub fn images(&self) -> Option<&[SpaceTimeField]> {
        self.images.as_ref().map(|i| i.fields.as_slice())
    }

    /// All `T`-images vanish (degenerate linearization point).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `‖T Σ c_k E_k - rhs‖`.
    pub fn residual_norm(&self, c: &DVector<f64>) -> f64 {
        match &self.images {
            Some(img) => {
                let mut r = img.rhs.scaled(-1.0);
                for (ck, f) in c.iter().zip(&img.fields) {
                    if *ck != 0.0 {
                        r = r.axpby(1.0, f, *ck);
                    }
                }
                img.space.spacetime_l2(&r)
            }
            None => {
                let q = c.dot(&(&self.u * c)) - 2.0 * c.dot(&self.b) + self.rhs_norm.powi(2);
                q.max(0.0).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TikhonovSolution {
    pub alpha: f64,
    pub coeffs: Vec<f64>,
    #[serde(skip)]
    pub reconstruction: Option<MatrixField>,
    pub residual_norm: f64,
    pub solution_norm: f64,
}

impl TikhonovSolution {
    /// Distance in the coefficient norm; equals the Frobenius L² distance of
    /// the reconstructions because the basis is orthonormal.
    pub fn distance(&self, other: &TikhonovSolution) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn solve_at_alpha(sys: &NormalSystem, alpha: f64) -> Result<TikhonovSolution> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let a = &sys.u + &sys.d * alpha;
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::Factorization(format!("U + αD not positive definite at α = {alpha:e}"))
    })?;
    let c = chol.solve(&sys.b);
    let solution_norm = c.dot(&(&sys.d * &c)).max(0.0).sqrt();
    Ok(TikhonovSolution {
        alpha,
        residual_norm: sys.residual_norm(&c),
        solution_norm,
        reconstruction: sys.basis.as_ref().map(|b| b.expand(c.as_slice())),
        coeffs: c.as_slice().to_vec(),
    })
}

pub fn solve_path(sys: &NormalSystem, alphas: &[f64]) -> Result<Vec<TikhonovSolution>> {
    if alphas.is_empty() {
        return Err(Error::Empty("alpha grid".into()));
    }
    if alphas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("alpha grid must be ascending".into()));
    }
    alphas.par_iter().map(|&a| solve_at_alpha(sys, a)).collect()
}
