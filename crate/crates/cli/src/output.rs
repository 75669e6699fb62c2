//! Artifact writers. Every JSON file carries `schema_version`; every CSV row
//! starts with a `schema_version` column.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Output directory with `diagnostics/` and `tables/` subdirectories.
pub struct OutDir {
    root: PathBuf,
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

impl OutDir {
    pub fn create(root: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&root).map_err(|e| write_err(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> CliResult<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| write_err(parent, e))?;
        }
        Ok(p)
    }

    pub fn json<T: Serialize>(&self, rel: &str, kind: &str, body: &T) -> CliResult<PathBuf> {
        let p = self.path(rel)?;
        let v = Versioned {
            schema_version: SCHEMA_VERSION,
            kind,
            body,
        };
        let text = serde_json::to_string_pretty(&v).map_err(|e| write_err(&p, e))?;
        fs::write(&p, text + "\n").map_err(|e| write_err(&p, e))?;
        Ok(p)
    }

    /// Writes `rows` under a header; the schema column is prepended.
    pub fn csv(&self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
        let p = self.path(rel)?;
        let mut w = csv::Writer::from_path(&p).map_err(|e| write_err(&p, e))?;
        let mut head = vec!["schema_version"];
        head.extend_from_slice(header);
        w.write_record(&head).map_err(|e| write_err(&p, e))?;
        for r in rows {
            let mut rec = vec![SCHEMA_VERSION.to_string()];
            rec.extend(r.iter().cloned());
            w.write_record(&rec).map_err(|e| write_err(&p, e))?;
        }
        w.flush().map_err(|e| write_err(&p, e))?;
        Ok(p)
    }

    pub fn text(&self, rel: &str, text: &str) -> CliResult<PathBuf> {
        let p = self.path(rel)?;
        fs::write(&p, text).map_err(|e| write_err(&p, e))?;
        Ok(p)
    }
}

/// Hex SHA-256 of the canonical serialization of a config.
pub fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Shortest round-trip text of a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<usize>) -> String {
    v.map(|e| e.to_string()).unwrap_or_default()
}
