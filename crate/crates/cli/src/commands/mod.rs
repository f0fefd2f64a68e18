pub mod bench;
pub mod eval;
pub mod generate;
pub mod report;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{io_err, CliResult};

/// `<out>/<category>/<label>`.
pub fn run_dir(out: &Path, category: &str, label: &str) -> PathBuf {
    out.join(category).join(label)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

pub fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn fmt_short(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}
