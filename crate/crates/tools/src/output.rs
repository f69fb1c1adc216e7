//! Artifact writers. Every CSV starts with a `# config_sha256=<hex>` line
//! followed by a header row whose column names carry their units.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Result, ToolError};

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(ToolError::io(&tmp))?;
    file.write_all(bytes).map_err(ToolError::io(&tmp))?;
    file.sync_all().map_err(ToolError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(ToolError::io(path))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(ToolError::io(dir))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of `value`.
pub fn canonical_hash<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("config types serialize"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact types serialize");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Shortest round-trip form, in scientific notation.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// A CSV table under construction.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self, config_hash: &str) -> Vec<u8> {
        let mut out = format!("# config_sha256={config_hash}\n").into_bytes();
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row).expect("writing to memory");
        }
        w.flush().expect("writing to memory");
        drop(w);
        out
    }

    pub fn write(&self, path: &Path, config_hash: &str) -> Result<()> {
        write_atomic(path, &self.to_bytes(config_hash))
    }
}
