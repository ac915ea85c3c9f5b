//! Configuration-driven experiments: the full identification pipeline,
//! convergence studies and stand-alone diagnostics.

pub mod config;
pub mod diagnostics;
pub mod noise;
pub mod output;
pub mod pipeline;
pub mod profiles;
pub mod study;

pub use config::{example_config, ExperimentConfig, NoiseModel};
pub use diagnostics::{adjoint_mismatches, adjoint_test, uniqueness_test, AdjointReport};
pub use noise::make_noisy;
pub use pipeline::{execute, prepare, run_pipeline, run_point, ReconstructionReport, RunSummary};
pub use study::{convergence_study, write_study, StudyReport, Sweep};
