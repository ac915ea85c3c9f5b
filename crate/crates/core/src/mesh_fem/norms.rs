//! Norms and inner products on scalar, space-time and matrix fields.

use crate::error::{Error, Result};
use crate::mesh_fem::assembly::{assemble_mass, assemble_stiffness, bilinear, FemSpace};
use crate::mesh_fem::fields::{MatrixField, Representation, ScalarField, SpaceTimeField};
use crate::mesh_fem::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    /// `max_e |∇u|_e`; exact for P1 fields since gradients are element-wise constant.
    GradLinf,
    /// Trapezoid rule in time of the level-wise squared L² norms.
    SpacetimeL2,
    /// `‖u‖_{L²(L²)} + (∫ ‖∇u‖²_∞ dt)^{1/2}`.
    MixedAssumption,
    /// `(Σ_ij ‖c_ij‖²_{L²})^{1/2}`.
    FrobeniusL2,
}

#[derive(Debug, Clone, Copy)]
pub enum NormTarget<'a> {
    Scalar(&'a ScalarField),
    SpaceTime(&'a SpaceTimeField),
    Matrix(&'a MatrixField),
}

/// Evaluates a norm, assembling whatever operators the kind requires.
pub fn norm(mesh: &Mesh, target: NormTarget<'_>, kind: NormKind) -> Result<f64> {
    use NormKind::*;
    use NormTarget::*;
    match (target, kind) {
        (Scalar(u), L2) => {
            u.check(mesh)?;
            Ok(bilinear(&assemble_mass(mesh), u, u).max(0.0).sqrt())
        }
        (Scalar(u), H1) => {
            u.check(mesh)?;
            let k = assemble_stiffness(mesh, &MatrixField::identity(mesh))?;
            let m = assemble_mass(mesh);
            Ok((bilinear(&m, u, u) + bilinear(&k, u, u)).max(0.0).sqrt())
        }
        (Scalar(u), GradLinf) => {
            u.check(mesh)?;
            Ok(grad_linf(mesh, u))
        }
        (SpaceTime(u), SpacetimeL2) => {
            check_levels(mesh, u)?;
            let m = assemble_mass(mesh);
            Ok(spacetime_inner_with(&m, u, u).max(0.0).sqrt())
        }
        (SpaceTime(u), MixedAssumption) => {
            check_levels(mesh, u)?;
            let m = assemble_mass(mesh);
            Ok(spacetime_inner_with(&m, u, u).max(0.0).sqrt() + grad_linf_time_l2(mesh, u))
        }
        (Matrix(c), FrobeniusL2) => {
            c.check(mesh)?;
            Ok(frobenius_inner(mesh, c, c)?.max(0.0).sqrt())
        }
        (t, k) => Err(Error::IncompatibleNorm(format!(
            "{k:?} is not defined for {} targets",
            match t {
                Scalar(_) => "scalar",
                SpaceTime(_) => "space-time",
                Matrix(_) => "matrix",
            }
        ))),
    }
}

fn check_levels(mesh: &Mesh, u: &SpaceTimeField) -> Result<()> {
    u.levels.iter().try_for_each(|l| l.check(mesh))
}

/// `max_e |∇u|_e` (Euclidean length of the element gradient).
pub fn grad_linf(mesh: &Mesh, u: &[f64]) -> f64 {
    (0..mesh.num_elements())
        .map(|e| {
            let g = mesh.element_gradient(e, u);
            g[0].hypot(g[1])
        })
        .fold(0.0, f64::max)
}

/// `(∫₀^τ ‖∇u(·,t)‖²_∞ dt)^{1/2}` with the trapezoid rule.
pub fn grad_linf_time_l2(mesh: &Mesh, u: &SpaceTimeField) -> f64 {
    u.grid
        .trapezoid_weights()
        .iter()
        .zip(&u.levels)
        .map(|(w, l)| w * grad_linf(mesh, l).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Space-time L² inner product with a given mass matrix.
pub fn spacetime_inner_with(
    mass: &nalgebra_sparse::CsrMatrix<f64>,
    a: &SpaceTimeField,
    b: &SpaceTimeField,
) -> f64 {
    a.grid
        .trapezoid_weights()
        .iter()
        .zip(a.levels.iter().zip(&b.levels))
        .map(|(w, (x, y))| if *w == 0.0 { 0.0 } else { w * bilinear(mass, x, y) })
        .sum()
}

/// Inner product `⟨C, D⟩ = Σ_ij ⟨c_ij, d_ij⟩_{L²}`.
pub fn frobenius_inner(mesh: &Mesh, c: &MatrixField, d: &MatrixField) -> Result<f64> {
    c.check(mesh)?;
    d.check(mesh)?;
    if c.representation() != d.representation() {
        let (c, d) = (c.to_cellwise(mesh), d.to_cellwise(mesh));
        return frobenius_inner(mesh, &c, &d);
    }
    Ok(match c.representation() {
        Representation::Cellwise => {
            let measures: Vec<f64> = mesh.elements().iter().map(|e| e.measure).collect();
            c.entries()
                .iter()
                .zip(d.entries())
                .map(|(x, y)| {
                    x.iter()
                        .zip(y)
                        .zip(&measures)
                        .map(|((p, q), m)| p * q * m)
                        .sum::<f64>()
                })
                .sum()
        }
        Representation::Nodal => {
            let mass = assemble_mass(mesh);
            c.entries()
                .iter()
                .zip(d.entries())
                .map(|(x, y)| bilinear(&mass, x, y))
                .sum()
        }
    })
}

pub fn frobenius_norm(mesh: &Mesh, c: &MatrixField) -> Result<f64> {
    norm(mesh, NormTarget::Matrix(c), NormKind::FrobeniusL2)
}

impl FemSpace {
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        bilinear(self.mass(), u, u).max(0.0).sqrt()
    }

    pub fn h1_norm(&self, u: &[f64]) -> f64 {
        (bilinear(self.mass(), u, u) + bilinear(self.laplace(), u, u))
            .max(0.0)
            .sqrt()
    }

    pub fn spacetime_inner(&self, a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
        spacetime_inner_with(self.mass(), a, b)
    }

    pub fn spacetime_l2(&self, u: &SpaceTimeField) -> f64 {
        self.spacetime_inner(u, u).max(0.0).sqrt()
    }

    pub fn mixed_assumption(&self, u: &SpaceTimeField) -> f64 {
        self.spacetime_l2(u) + grad_linf_time_l2(self.mesh(), u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::fields::TimeGrid;
    use crate::mesh_fem::mesh::{build_mesh, Domain};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn basic_norm_values() {
        let m = build_mesh(Domain::unit_interval(), 16).unwrap();
        let one = ScalarField::from_fn(&m, |_| 1.0);
        assert!((norm(&m, NormTarget::Scalar(&one), NormKind::L2).unwrap() - 1.0).abs() < 1e-14);

        let fine = build_mesh(Domain::unit_interval(), 256).unwrap();
        let s = ScalarField::from_fn(&fine, |p| (PI * p[0]).sin());
        let l2 = norm(&fine, NormTarget::Scalar(&s), NormKind::L2).unwrap();
        assert!((l2 - 0.5f64.sqrt()).abs() <= 1e-3);

        let grid = TimeGrid::uniform(0.1, 8).unwrap();
        let zero = SpaceTimeField::zeros(&m, &grid);
        assert_eq!(norm(&m, NormTarget::SpaceTime(&zero), NormKind::MixedAssumption).unwrap(), 0.0);
    }

    #[test]
    fn grad_linf_is_exact_for_affine() {
        let m = build_mesh(Domain::unit_square(), 4).unwrap();
        let u = ScalarField::from_fn(&m, |p| 3.0 * p[0] + 4.0 * p[1]);
        let g = norm(&m, NormTarget::Scalar(&u), NormKind::GradLinf).unwrap();
        assert!((g - 5.0).abs() < 1e-12);
    }

    #[test]
    fn incompatible_kinds() {
        let m = build_mesh(Domain::unit_interval(), 4).unwrap();
        let u = ScalarField::zeros(&m);
        assert!(matches!(
            norm(&m, NormTarget::Scalar(&u), NormKind::SpacetimeL2),
            Err(Error::IncompatibleNorm(_))
        ));
        let c = MatrixField::identity(&m);
        assert!(norm(&m, NormTarget::Matrix(&c), NormKind::L2).is_err());
    }

    #[test]
    fn frobenius_of_identity_is_sqrt_d_times_area() {
        let m = build_mesh(Domain::unit_square(), 3).unwrap();
        let f = frobenius_norm(&m, &MatrixField::identity(&m)).unwrap();
        assert!((f - 2f64.sqrt()).abs() < 1e-14);
        let nodal = MatrixField::nodal_from_fn(&m, |_| [[1.0, 0.0], [0.0, 1.0]]);
        assert!((frobenius_norm(&m, &nodal).unwrap() - 2f64.sqrt()).abs() < 1e-13);
    }

    fn random_matrix_field(m: &Mesh, vals: &[f64]) -> MatrixField {
        let ne = m.num_elements();
        let entries = (0..4).map(|k| (0..ne).map(|e| vals[(k * ne + e) % vals.len()]).collect()).collect();
        MatrixField::new(2, Representation::Cellwise, entries).unwrap()
    }

    proptest! {
        #[test]
        fn frobenius_parallelogram_law(a in prop::collection::vec(-3.0f64..3.0, 37), b in prop::collection::vec(-3.0f64..3.0, 41)) {
            let m = build_mesh(Domain::unit_square(), 3).unwrap();
            let (c, d) = (random_matrix_field(&m, &a), random_matrix_field(&m, &b));
            let n = |x: &MatrixField| frobenius_norm(&m, x).unwrap().powi(2);
            let lhs = n(&c.axpby(1.0, &d, 1.0).unwrap()) + n(&c.axpby(1.0, &d, -1.0).unwrap());
            let rhs = 2.0 * n(&c) + 2.0 * n(&d);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
        }
    }
}
