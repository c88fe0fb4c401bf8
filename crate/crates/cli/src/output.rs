//! Output files: atomic writes, the convergence trace and result documents.

use std::io::Write;
use std::path::Path;

use osp_core::mm::IterationRecord;

use crate::CliError;

/// Header of the convergence trace.
pub const TRACE_HEADER: &str = "iter,criterion,inner_iters,step_norm,floor_hits,wall_ms";

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let err = |e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

/// Lossless float formatting used in CSV files (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// The trace as CSV. Wall times are written only when `timing` is set and
/// are zero otherwise, so traces are reproducible byte for byte.
pub fn trace_csv(trace: &[IterationRecord], timing: bool) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let wall = if timing { r.elapsed.as_secs_f64() * 1e3 } else { 0.0 };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter,
            fmt_f64(r.criterion),
            r.inner_iters,
            fmt_f64(r.step_norm),
            r.floor_hits,
            fmt_f64(wall)
        ));
    }
    out
}

pub fn to_toml<T: serde::Serialize>(doc: &T) -> Result<String, CliError> {
    toml::to_string(doc).map_err(|e| CliError::Output(e.to_string()))
}
