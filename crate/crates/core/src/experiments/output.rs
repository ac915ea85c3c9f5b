//! On-disk artifacts: `report.json`, `table.csv` and plain-text coefficient
//! grids under `fields/`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::pipeline::{PipelineOutput, RunSummary};
use crate::mesh_fem::{MatrixField, Mesh};

/// One row of `table.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub delta: f64,
    pub seed: u64,
    pub h: f64,
    pub dt: f64,
    pub alpha_k: f64,
    pub error: f64,
    pub residual: f64,
    pub epsilon_n: Option<f64>,
    pub delta_h: Option<f64>,
    pub runtime_s: f64,
}

impl From<&RunSummary> for TableRow {
    fn from(r: &RunSummary) -> Self {
        Self {
            delta: r.delta,
            seed: r.seed,
            h: r.h,
            dt: r.dt,
            alpha_k: r.alpha_k,
            error: r.error,
            residual: r.residual,
            epsilon_n: r.epsilon_n,
            delta_h: r.smoothing.as_ref().map(|s| s.delta_h),
            runtime_s: r.runtime_s,
        }
    }
}

pub fn write_table(path: &Path, runs: &[RunSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in runs {
        w.serialize(TableRow::from(r)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Writes element values as a grid: a `rows cols` header, then one line per
/// row. In 2D each mesh row of cells gives `2 nx` triangle values; in 1D the
/// grid is a single row.
pub fn write_field(path: &Path, mesh: &Mesh, values: &[f64]) -> Result<()> {
    if values.len() != mesh.num_elements() {
        return Err(Error::MeshMismatch(format!(
            "{} values for {} elements",
            values.len(),
            mesh.num_elements()
        )));
    }
    let [nx, ny] = mesh.divisions();
    let (rows, cols) = if mesh.dim() == 1 { (1, nx) } else { (ny, 2 * nx) };
    let mut out = fs::File::create(path)?;
    writeln!(out, "{rows} {cols}")?;
    for row in values.chunks(cols) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Reads a grid written by [`write_field`], returning the values row-major.
pub fn read_field(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    let mut next_usize = || -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Config(format!("{}: bad header", path.display())))
    };
    let (rows, cols) = (next_usize()?, next_usize()?);
    let values = text
        .split_whitespace()
        .skip(2)
        .map(|t| t.parse::<f64>().map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != rows * cols {
        return Err(Error::Config(format!("{}: expected {} values", path.display(), rows * cols)));
    }
    Ok((rows, cols, values))
}

fn write_matrix(dir: &Path, stem: &str, mesh: &Mesh, c: &MatrixField) -> Result<()> {
    let c = c.to_cellwise(mesh);
    let d = c.dim();
    for i in 0..d {
        for j in 0..d {
            write_field(&dir.join(format!("{stem}_{}{}.txt", i + 1, j + 1)), mesh, c.entry(i, j))?;
        }
    }
    Ok(())
}

pub fn write_run(dir: &Path, out: &PipelineOutput) -> Result<()> {
    let fields = dir.join("fields");
    fs::create_dir_all(&fields)?;
    write_json(&dir.join("report.json"), &out.report)?;
    write_table(&dir.join("table.csv"), &out.report.runs)?;
    write_matrix(&fields, "truth", &out.mesh, &out.truth)?;
    write_matrix(&fields, "guess", &out.mesh, &out.guess)?;
    for (r, est) in out.estimates.iter().enumerate() {
        write_matrix(&fields, &format!("estimate_{r:03}"), &out.mesh, est)?;
    }
    Ok(())
}
