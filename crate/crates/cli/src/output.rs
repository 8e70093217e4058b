//! Artifact writers. Called from the coordinating thread only.

use std::fs;
use std::path::Path;

use encalign::matrixio::{write_matrix, Matrix};
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult, Context};
use crate::session::RunRecord;

fn output_err(path: &Path, message: impl ToString) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| output_err(dir, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))? + "\n";
    fs::write(path, text).map_err(|e| output_err(path, e))
}

/// JSON object `{"run": record, ...fields}`.
pub fn with_run(record: &RunRecord, fields: serde_json::Value) -> serde_json::Value {
    let mut obj = serde_json::Map::new();
    obj.insert("run".into(), record.to_value());
    if let serde_json::Value::Object(more) = fields {
        obj.extend(more);
    }
    serde_json::Value::Object(obj)
}

/// CSV with a leading `# run: {...}` comment line.
pub fn write_csv(path: &Path, record: &RunRecord, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).map_err(|e| output_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| output_err(path, e))?;
    }
    let body = w.into_inner().map_err(|e| output_err(path, e))?;
    let mut text = format!(
        "# run: {}\n",
        serde_json::to_string(&record.to_value()).expect("run record serializes")
    )
    .into_bytes();
    text.extend(body);
    fs::write(path, text).map_err(|e| output_err(path, e))
}

pub fn write_dmatrix(path: &Path, m: &DMatrix<f64>) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let m = Matrix::from_dmatrix(m).context(|| format!("encoding {}", path.display()))?;
    write_matrix(&m, path).context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip decimal; empty for undefined values.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn fmt4(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.4}"),
        _ => "n/a".into(),
    }
}
