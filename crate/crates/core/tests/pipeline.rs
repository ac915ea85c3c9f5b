//! End-to-end runs of the configured pipeline and its on-disk outputs.

use std::fs;
use std::sync::Arc;

use parid::experiments::output::read_field;
use parid::experiments::profiles::Profile;
use parid::experiments::{convergence_study, example_config, run_pipeline, write_study, NoiseModel, Sweep};
use parid::mesh_fem::{build_mesh, Domain, FemSpace, SpaceTimeField, TimeGrid};
use parid::smoothing::smooth_spacetime;
use parid::Error;

#[test]
fn missing_output_dir_fails_before_solving() {
    let mut cfg = example_config();
    cfg.output.dir = None;
    match run_pipeline(&cfg) {
        Err(Error::Config(msg)) => assert!(msg.contains("output.dir")),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn run_writes_report_table_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = example_config();
    cfg.output.dir = Some(dir.path().to_path_buf());
    cfg.noise.deltas = vec![1e-3, 1e-4];
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!(report.runs.len(), 2);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);
    assert_eq!(json["provenance"]["nodes"], 33);
    let table = fs::read_to_string(dir.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("delta,seed,h,dt,alpha_k,error,residual,epsilon_n,delta_h,runtime_s"));
    let (rows, cols, vals) = read_field(&dir.path().join("fields/estimate_001_11.txt")).unwrap();
    assert_eq!((rows, cols), (1, 32));
    assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(dir.path().join("fields/truth_11.txt").exists());
    for r in &report.runs {
        assert!(r.k < r.alphas.len());
        assert_eq!(r.errors.len(), r.alphas.len());
        assert!(r.relative_error.is_finite());
    }
}

#[test]
fn repeated_runs_write_identical_tables() {
    let mut cfg = example_config();
    cfg.output.record_timing = false;
    cfg.noise.repetitions = 2;
    let tables: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            cfg.output.dir = Some(dir.path().to_path_buf());
            run_pipeline(&cfg).unwrap();
            fs::read(dir.path().join("table.csv")).unwrap()
        })
        .collect();
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn singleton_sweep_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let study = convergence_study(&example_config(), &Sweep::Delta(vec![1e-3])).unwrap();
    assert_eq!(study.runs.len(), 1);
    assert_eq!(study.summary.error_vs_delta, None);
    write_study(dir.path(), &study).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("table.csv")).unwrap().lines().count(), 2);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn resolution_sweep_reports_one_row_per_mesh() {
    let mut cfg = example_config();
    cfg.noise.deltas = vec![1e-4];
    let study = convergence_study(&cfg, &Sweep::Resolution(vec![16, 32])).unwrap();
    let hs: Vec<f64> = study.runs.iter().map(|r| r.h).collect();
    assert_eq!(hs, vec![1.0 / 16.0, 1.0 / 32.0]);
    assert!(study.summary.error_vs_h.is_some());
}

/// Smoothed raw data with `h ≈ δ^{1/3}`, so that `δ_h = h`: the error
/// follows the shrinking effective noise level. The data are scaled up so
/// that `δ_h` stays small relative to them.
#[test]
fn smoothing_sweep_tracks_mesh_size() {
    let mut cfg = example_config();
    cfg.truth.source = Profile::Constant { value: 1e5 };
    cfg.truth.initial = Profile::Sinusoid {
        amplitude: 1e4,
        offset: 0.0,
        frequency: [1.0, 1.0],
        phase: [0.0, 0.0],
    };
    cfg.noise.model = NoiseModel::Raw;
    cfg.noise.smoothing = true;
    let mut errors = Vec::new();
    for n in [8usize, 16, 32] {
        let h = 1.0 / n as f64;
        cfg.domain.resolution = n;
        cfg.noise.deltas = vec![h * h * h];
        let study = convergence_study(&cfg, &Sweep::Delta(vec![h * h * h])).unwrap();
        let run = &study.runs[0];
        assert_eq!(run.effective_delta, h);
        errors.push(run.error);
    }
    for w in errors.windows(2) {
        assert!(w[1] <= w[0], "errors {errors:?}");
    }
}

#[test]
fn smoothing_misfit_of_exact_data_is_first_order() {
    let misfits: Vec<f64> = [8usize, 16, 32]
        .iter()
        .map(|&n| {
            let mesh = Arc::new(build_mesh(Domain::unit_square(), n).unwrap());
            let space = FemSpace::new(mesh.clone()).unwrap();
            let grid = TimeGrid::uniform(0.1, 4).unwrap();
            let u = SpaceTimeField::from_fn(&mesh, &grid, |p, t| {
                (1.0 + t) * (p[0] * p[0] * p[1] + (2.0 * p[1]).sin() * p[0])
            });
            let s = smooth_spacetime(&mesh, &u).unwrap();
            space.mixed_assumption(&u.axpby(1.0, &s, -1.0))
        })
        .collect();
    for w in misfits.windows(2) {
        assert!(w[0] / w[1] >= 1.6, "misfits {misfits:?}");
    }
}
