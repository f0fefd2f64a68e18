//! Reproducibility manifests: resolved settings plus artifact hashes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliResult};
use crate::settings::Common;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Hardware {
    pub os: &'static str,
    pub arch: &'static str,
    pub logical_cpus: usize,
    pub cpu_model: Option<String>,
}

impl Hardware {
    pub fn detect() -> Self {
        let cpu_model = fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        });
        Hardware {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cpu_model,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{} ({} logical CPUs, {}/{})",
            self.cpu_model.as_deref().unwrap_or("unknown CPU"),
            self.logical_cpus,
            self.os,
            self.arch
        )
    }
}

#[derive(Clone, Debug, Serialize)]
struct Artifact {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    argv: Vec<String>,
    settings: &'a Common,
    hardware: Hardware,
    artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `<dir>/<command>-manifest.json` listing every artifact with its
/// hash. Paths are stored relative to `dir` when possible.
pub fn write(dir: &Path, command: &str, settings: &Common, artifacts: &[PathBuf]) -> CliResult<PathBuf> {
    let mut entries = Vec::with_capacity(artifacts.len());
    let mut sorted = artifacts.to_vec();
    sorted.sort();
    sorted.dedup();
    for p in sorted {
        let bytes = fs::metadata(&p).map_err(io_err(&p))?.len();
        entries.push(Artifact {
            path: p.strip_prefix(dir).unwrap_or(&p).to_string_lossy().replace('\\', "/"),
            sha256: sha256_file(&p)?,
            bytes,
        });
    }
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        argv: std::env::args().collect(),
        settings,
        hardware: Hardware::detect(),
        artifacts: entries,
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(format!("{command}-manifest.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}

/// Every regular file below `dir`, sorted.
pub fn files_under(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(io_err(&d))? {
            let p = entry.map_err(io_err(&d))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let m = write(dir.path(), "test", &Common::default(), &[p]).unwrap();
        let text = fs::read_to_string(m).unwrap();
        assert!(text.contains("\"path\": \"abc.txt\""));
    }
}
