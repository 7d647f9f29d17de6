//! Atomic file output and report rendering.

use std::io::Write;
use std::path::Path;

use gmra::experiments::Report;
use gmra::pointset::{write_binary, write_csv, PointFormat};
use gmra::PointCloud;
use serde_json::Value;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("cannot write {}: {e}", path.display()))
}

/// Writes through a temporary file in the target directory, then renames it
/// over `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w).map_err(|e| io_err(path, e))?;
        w.flush().map_err(|e| io_err(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, |w| w.write_all(bytes))
}

/// Binary unless the extension is `.csv`.
pub fn write_points(path: &Path, cloud: &PointCloud) -> Result<(), CliError> {
    match PointFormat::from_path(path) {
        PointFormat::Binary => write_atomic(path, |mut w| write_binary(&mut w, cloud)),
        PointFormat::Csv => write_atomic(path, |mut w| write_csv(&mut w, cloud)),
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

/// Rows of a report as CSV under its declared columns.
pub fn report_csv(report: &Report) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(format!("csv output failed: {e}"));
    w.write_record(&report.columns).map_err(csv_err)?;
    for row in &report.rows {
        w.write_record(report.columns.iter().map(|c| cell(row.get(c))))
            .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Data(format!("csv output failed: {e}")))
}

/// JSON to stdout without a path; CSV rows for a `.csv` path, JSON otherwise.
pub fn emit_report(report: &Report, out: Option<&Path>) -> Result<(), CliError> {
    let json = || serde_json::to_vec_pretty(report).expect("reports serialize");
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(&json()).and_then(|_| stdout.write_all(b"\n")) {
                // a closed pipe (`| head`) is not a failure
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Data(format!("cannot write to stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
        Some(path) if PointFormat::from_path(path) == PointFormat::Csv => write_bytes(path, &report_csv(report)?),
        Some(path) => {
            let mut bytes = json();
            bytes.push(b'\n');
            write_bytes(path, &bytes)
        }
    }
}
