//! Named analytic profiles used to describe coefficients, sources and
//! initial data in experiment configurations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh_fem::{MatrixField, Mesh, Representation};

fn one() -> f64 {
    1.0
}

fn unit_freq() -> [f64; 2] {
    [1.0, 1.0]
}

/// A scalar function of space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `offset + amplitude Π_i sin(frequency_i π x_i + phase_i)`.
    Sinusoid {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default = "unit_freq")]
        frequency: [f64; 2],
        #[serde(default)]
        phase: [f64; 2],
    },
    /// `base + height` on the box `lo ≤ x ≤ hi`, `base` elsewhere.
    Bump {
        #[serde(default = "one")]
        base: f64,
        height: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `value + slope · x`.
    Affine {
        value: f64,
        #[serde(default)]
        slope: [f64; 2],
    },
}

impl Profile {
    pub fn eval(&self, p: [f64; 2], dim: usize) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Sinusoid {
                amplitude,
                offset,
                frequency,
                phase,
            } => {
                let prod: f64 = (0..dim)
                    .map(|i| (frequency[i] * PI * p[i] + phase[i]).sin())
                    .product();
                offset + amplitude * prod
            }
            Profile::Bump { base, height, lo, hi } => {
                let inside = (0..dim).all(|i| p[i] >= lo[i] && p[i] <= hi[i]);
                if inside {
                    base + height
                } else {
                    *base
                }
            }
            Profile::Affine { value, slope } => value + (0..dim).map(|i| slope[i] * p[i]).sum::<f64>(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Profile::Bump { lo, hi, .. } = self {
            if lo.len() < dim || hi.len() < dim {
                return Err(Error::Config(format!("bump bounds need {dim} components")));
            }
        }
        Ok(())
    }
}

/// A scalar function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFactor {
    Constant { value: f64 },
    /// `e^{rate t}`.
    Exponential { rate: f64 },
    /// `a + b t`.
    Linear { a: f64, b: f64 },
    /// `offset + amplitude cos(frequency π t)`.
    Cosine {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl Default for TimeFactor {
    fn default() -> Self {
        TimeFactor::Constant { value: 1.0 }
    }
}

impl TimeFactor {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Constant { value } => value,
            TimeFactor::Exponential { rate } => (rate * t).exp(),
            TimeFactor::Linear { a, b } => a + b * t,
            TimeFactor::Cosine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (frequency * PI * t).cos(),
        }
    }
}

/// A `d x d` coefficient built from profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    /// `profile(x) I`.
    Isotropic { profile: Profile },
    /// Diagonal with one profile per axis.
    Diagonal { entries: Vec<Profile> },
    /// Row-major `d²` entries.
    Full { entries: Vec<Profile> },
}

impl CoefficientSpec {
    /// Element-wise field sampled at barycenters.
    pub fn to_field(&self, mesh: &Mesh) -> Result<MatrixField> {
        let d = mesh.dim();
        let profile_at = |i: usize, j: usize| -> Option<&Profile> {
            match self {
                CoefficientSpec::Isotropic { profile } => (i == j).then_some(profile),
                CoefficientSpec::Diagonal { entries } => (i == j).then(|| &entries[i]),
                CoefficientSpec::Full { entries } => Some(&entries[i * d + j]),
            }
        };
        match self {
            CoefficientSpec::Isotropic { profile } => profile.validate(d)?,
            CoefficientSpec::Diagonal { entries } | CoefficientSpec::Full { entries } => {
                let want = if matches!(self, CoefficientSpec::Diagonal { .. }) { d } else { d * d };
                if entries.len() != want {
                    return Err(Error::Config(format!("expected {want} coefficient entries, got {}", entries.len())));
                }
                entries.iter().try_for_each(|p| p.validate(d))?;
            }
        }
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(
                    mesh.elements()
                        .iter()
                        .map(|el| profile_at(i, j).map_or(0.0, |p| p.eval(el.barycenter, d)))
                        .collect(),
                );
            }
        }
        MatrixField::new(d, Representation::Cellwise, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::{build_mesh, Domain};

    #[test]
    fn profile_values() {
        let s = Profile::Sinusoid {
            amplitude: 2.0,
            offset: 1.0,
            frequency: [1.0, 1.0],
            phase: [0.0, 0.0],
        };
        assert!((s.eval([0.5, 0.0], 1) - 3.0).abs() < 1e-15);
        let b = Profile::Bump {
            base: 1.0,
            height: 0.5,
            lo: vec![0.25],
            hi: vec![0.75],
        };
        assert_eq!(b.eval([0.3, 9.0], 1), 1.5);
        assert_eq!(b.eval([0.8, 0.0], 1), 1.0);
        let a = Profile::Affine { value: 1.0, slope: [2.0, 3.0] };
        assert_eq!(a.eval([1.0, 1.0], 2), 6.0);
        assert_eq!(TimeFactor::Linear { a: 1.0, b: 2.0 }.eval(0.5), 2.0);
    }

    #[test]
    fn coefficient_fields() {
        let m = build_mesh(Domain::unit_square(), 4).unwrap();
        let c = CoefficientSpec::Diagonal {
            entries: vec![Profile::Constant { value: 2.0 }, Profile::Constant { value: 3.0 }],
        }
        .to_field(&m)
        .unwrap();
        assert!(c.entry(0, 1).iter().all(|v| *v == 0.0));
        assert!(c.entry(1, 1).iter().all(|v| *v == 3.0));
        let bad = CoefficientSpec::Full {
            entries: vec![Profile::Constant { value: 1.0 }],
        };
        assert!(bad.to_field(&m).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let spec: CoefficientSpec = toml::from_str(
            r#"
            kind = "isotropic"
            profile = { kind = "bump", height = 0.5, lo = [0.25], hi = [0.75] }
            "#,
        )
        .unwrap();
        let back: CoefficientSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
    }
}
