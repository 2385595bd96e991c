use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("PQSIM_GIT_DESCRIBE"), ")");

/// Provenance block embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct Meta<'a, C: Serialize> {
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a C,
}

pub fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn push_line<T: Serialize>(buf: &mut Vec<u8>, value: &T) -> Result<(), CliError> {
    serde_json::to_writer(&mut *buf, value).map_err(|e| CliError::Io(e.to_string()))?;
    buf.push(b'\n');
    Ok(())
}

/// One JSON document per line: the metadata header, then each row.
pub fn write_jsonl<M: Serialize, T: Serialize>(path: &Path, meta: &M, rows: &[T]) -> Result<PathBuf, CliError> {
    let mut buf = Vec::new();
    push_line(&mut buf, meta)?;
    for r in rows {
        push_line(&mut buf, r)?;
    }
    write_atomic(path, &buf)
}

/// CSV with `#`-prefixed provenance lines ahead of the header.
pub fn write_csv<M: Serialize, T: Serialize>(path: &Path, meta: &M, rows: &[T]) -> Result<PathBuf, CliError> {
    let mut buf = Vec::new();
    let header = serde_json::to_string(meta).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(buf, "# {header}")?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    write_atomic(path, &buf)
}
