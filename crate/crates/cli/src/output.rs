//! File writers. Every CSV starts with a `# config_hash: …` line followed by
//! the header row; every JSON object carries a `config_hash` field.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub struct OutDir {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path, hash: String) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), hash, written: Vec::new() })
    }

    /// Names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, body: String) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn csv<R>(&mut self, name: &str, header: &[String], rows: R) -> Result<()>
    where
        R: IntoIterator<Item = Vec<Cell>>,
    {
        let mut s = format!("# config_hash: {}\n{}\n", self.hash, header.join(","));
        for row in rows {
            for (j, c) in row.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                c.write(&mut s);
            }
            s.push('\n');
        }
        self.put(name, s)
    }

    /// Writes `value` (which must serialize to an object) with the hash added.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        match &mut v {
            Value::Object(map) => {
                map.insert("config_hash".into(), Value::String(self.hash.clone()));
            }
            _ => anyhow::bail!("{name}: top-level JSON value must be an object"),
        }
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        self.put(name, s)
    }
}

/// One CSV field.
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
}

impl Cell {
    fn write(&self, s: &mut String) {
        // Both forms are the shortest representation that round-trips.
        let _ = match self {
            Cell::F(v) if *v != 0.0 && v.is_finite() && !(1e-4..1e15).contains(&v.abs()) => write!(s, "{v:e}"),
            Cell::F(v) => write!(s, "{v}"),
            Cell::U(v) => write!(s, "{v}"),
            Cell::S(v) => write!(s, "{v}"),
        };
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

/// `["x", "v_0", "v_1", …]`.
pub fn header(first: &[&str], prefix: &str, d: usize) -> Vec<String> {
    let mut h: Vec<String> = first.iter().map(|s| s.to_string()).collect();
    h.extend((0..d).map(|i| format!("{prefix}_{i}")));
    h
}
