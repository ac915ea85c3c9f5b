//! Convergence studies over noise levels or mesh resolutions.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::config::ExperimentConfig;
use crate::experiments::output::{write_json, write_table};
use crate::experiments::pipeline::{execute, RunSummary};

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Delta(Vec<f64>),
    /// Space resolutions; the time grid is kept as configured.
    Resolution(Vec<usize>),
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub points: usize,
    /// Least-squares slope of `log error` against `log δ`.
    pub error_vs_delta: Option<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub error_vs_h: Option<f64>,
    /// Median error per swept value, in sweep order.
    pub medians: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub summary: StudySummary,
    pub runs: Vec<RunSummary>,
}

pub fn convergence_study(cfg: &ExperimentConfig, sweep: &Sweep) -> Result<StudyReport> {
    let runs = match sweep {
        Sweep::Delta(deltas) => {
            let mut c = cfg.clone();
            c.noise.deltas = deltas.clone();
            execute(&c)?.report.runs
        }
        Sweep::Resolution(res) => {
            if res.is_empty() {
                return Err(Error::Empty("resolution sweep".into()));
            }
            let mut all = Vec::new();
            for &r in res {
                let mut c = cfg.clone();
                c.domain.resolution = r;
                all.extend(execute(&c)?.report.runs);
            }
            all
        }
    };
    let pairs = |x: fn(&RunSummary) -> f64| -> Vec<(f64, f64)> { runs.iter().map(|r| (x(r), r.error)).collect() };
    let keys: Vec<f64> = match sweep {
        Sweep::Delta(d) => d.clone(),
        Sweep::Resolution(r) => r.iter().map(|&n| n as f64).collect(),
    };
    let key_of = |r: &RunSummary| match sweep {
        Sweep::Delta(_) => r.delta,
        Sweep::Resolution(_) => r.h.recip().round(),
    };
    let medians = keys
        .iter()
        .map(|&k| {
            let errs: Vec<f64> = runs.iter().filter(|r| key_of(r) == k).map(|r| r.error).collect();
            (k, median(errs))
        })
        .collect();
    let summary = StudySummary {
        points: runs.len(),
        error_vs_delta: matches!(sweep, Sweep::Delta(_)).then(|| loglog_slope(&pairs(|r| r.delta))).flatten(),
        error_vs_h: matches!(sweep, Sweep::Resolution(_)).then(|| loglog_slope(&pairs(|r| r.h))).flatten(),
        medians,
    };
    Ok(StudyReport { summary, runs })
}

pub fn write_study(dir: &Path, study: &StudyReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_table(&dir.join("table.csv"), &study.runs)?;
    write_json(&dir.join("summary.json"), &study.summary)?;
    write_json(&dir.join("report.json"), study)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`, skipping
/// non-positive points. `None` with fewer than two distinct abscissae.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_and_median() {
        let pts: Vec<(f64, f64)> = [1e-3, 1e-2, 1e-1].iter().map(|&x: &f64| (x, 3.0 * x.powf(0.5))).collect();
        assert!((loglog_slope(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(1.0, 1.0)]), None);
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
