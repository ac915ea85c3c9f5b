//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::profiles::{CoefficientSpec, Profile, TimeFactor};
use crate::mesh_fem::{build_mesh, require_elliptic, Domain, Mesh, TimeGrid};
use crate::parabolic_solver::TimeScheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSection,
    pub truth: TruthSection,
    pub guess: GuessSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub galerkin: GalerkinSection,
    #[serde(default)]
    pub adaptive: AdaptiveSection,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub uniqueness: UniquenessSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSection {
    #[serde(flatten)]
    pub domain: Domain,
    /// Subdivisions per axis.
    pub resolution: usize,
    pub time_steps: usize,
    pub tau: f64,
    #[serde(default)]
    pub scheme: TimeScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    pub coefficient: CoefficientSpec,
    #[serde(default = "zero_profile")]
    pub source: Profile,
    #[serde(default)]
    pub source_time: TimeFactor,
    pub initial: Profile,
}

fn zero_profile() -> Profile {
    Profile::Constant { value: 0.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuessSection {
    pub coefficient: CoefficientSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Gaussian nodal noise with a prescribed space-time L² norm.
    #[default]
    Raw,
    /// Random smooth perturbation with a prescribed mixed norm
    /// `‖·‖_{L²(L²)} + (∫ ‖∇·‖²_∞ dt)^{1/2}`.
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: NoiseModel,
    #[serde(default)]
    pub smoothing: bool,
    /// Independent noise draws per δ (seeds `seed, seed + 1, …`).
    #[serde(default = "one_usize")]
    pub repetitions: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GalerkinSection {
    /// Fixed dyadic level; `None` picks the coarsest level with `ε_n < δ`.
    pub level: Option<usize>,
    pub max_level: Option<usize>,
    pub gap_iterations: usize,
    pub gap_seed: u64,
}

impl Default for GalerkinSection {
    fn default() -> Self {
        Self {
            level: None,
            max_level: None,
            gap_iterations: 12,
            gap_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveSection {
    pub mu: f64,
    /// Grid has `n + 1` points.
    pub n: usize,
    pub c: f64,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        Self { mu: 1.5, n: 30, c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub battery: usize,
    pub seed: u64,
    /// Use this value instead of sampling.
    pub c0: Option<f64>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            battery: crate::parabolic_solver::DEFAULT_BATTERY,
            seed: 0,
            c0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct UniquenessSection {
    #[serde(default)]
    pub enabled: bool,
    /// Sample times; defaults to `d²(d+1)` evenly spaced interior instants.
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Write wall-clock times; disable for byte-identical tables.
    pub record_timing: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            record_timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mesh(&self) -> Result<Mesh> {
        build_mesh(self.domain.domain, self.domain.resolution)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        if !(self.domain.tau > 0.0 && self.domain.tau.is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("τ must be positive, got {}", self.domain.tau)));
        }
        TimeGrid::uniform(self.domain.tau, self.domain.time_steps)
    }

    pub fn uniqueness_times(&self, dim: usize) -> Vec<f64> {
        self.uniqueness.times.clone().unwrap_or_else(|| {
            let count = dim * dim * (dim + 1);
            (1..=count)
                .map(|r| self.domain.tau * r as f64 / (count + 1) as f64)
                .collect()
        })
    }

    /// Checks everything that can be checked without solving a PDE.
    pub fn validate(&self) -> Result<()> {
        let mesh = self.mesh()?;
        self.grid()?;
        require_elliptic(&mesh, &self.truth.coefficient.to_field(&mesh)?)
            .map_err(|e| e.at_stage("truth coefficient"))?;
        require_elliptic(&mesh, &self.guess.coefficient.to_field(&mesh)?)
            .map_err(|e| e.at_stage("guess coefficient"))?;
        self.truth.source.validate(mesh.dim())?;
        self.truth.initial.validate(mesh.dim())?;
        if self.noise.deltas.is_empty() {
            return Err(Error::Config("noise.deltas is empty".into()));
        }
        if let Some(d) = self.noise.deltas.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("noise level {d} must be non-negative")));
        }
        if self.noise.repetitions == 0 {
            return Err(Error::Config("noise.repetitions must be at least 1".into()));
        }
        if !(self.adaptive.mu > 1.0) || !(self.adaptive.c > 0.0) {
            return Err(Error::Config("adaptive.mu must exceed 1 and adaptive.c be positive".into()));
        }
        if self.galerkin.gap_iterations == 0 {
            return Err(Error::Config("galerkin.gap_iterations must be at least 1".into()));
        }
        if self.output.dir.is_none() {
            return Err(Error::Config("output.dir is not set".into()));
        }
        Ok(())
    }

    /// Deepest dyadic level the mesh supports.
    pub fn finest_level(&self) -> usize {
        let n = self.domain.resolution;
        n.trailing_zeros() as usize
    }
}

/// A small 1D configuration used by tests, benchmarks and `--help` examples.
pub fn example_config() -> ExperimentConfig {
    ExperimentConfig::from_toml(EXAMPLE_TOML).expect("example config parses")
}

pub const EXAMPLE_TOML: &str = r#"
[domain]
kind = "interval"
a = 0.0
b = 1.0
resolution = 32
time_steps = 64
tau = 0.1

[truth]
coefficient = { kind = "isotropic", profile = { kind = "bump", base = 1.0, height = 0.5, lo = [0.25], hi = [0.75] } }
source = { kind = "constant", value = 1000.0 }
initial = { kind = "sinusoid", amplitude = 100.0, frequency = [1.0, 1.0] }

[guess]
coefficient = { kind = "isotropic", profile = { kind = "constant", value = 1.0 } }

[noise]
deltas = [1e-3]
seed = 1
model = "smooth"

[galerkin]
gap_iterations = 8
gap_seed = 0

[adaptive]
mu = 1.5
n = 30
c = 1.0

[output]
dir = "out"
record_timing = true
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_parses_and_validates() {
        let cfg = example_config();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.finest_level(), 5);
        assert_eq!(cfg.uniqueness_times(1).len(), 2);
        assert_eq!(cfg.uniqueness_times(2).len(), 12);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = example_config();
        cfg.output.dir = None;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = example_config();
        cfg.guess.coefficient = CoefficientSpec::Isotropic {
            profile: Profile::Constant { value: -1.0 },
        };
        assert!(matches!(cfg.validate(), Err(Error::Stage { .. })));
        assert!(ExperimentConfig::from_toml("[domain]\nkind = \"interval\"").is_err());
    }
}
