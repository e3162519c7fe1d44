//! Versioned JSON and CSV files.
//!
//! JSON artifacts are objects with a top-level `schema_version`. CSV
//! artifacts start with a `# schema_version <n>` line followed by the column
//! header.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Output directory that creates itself on first write.
#[derive(Clone, Debug)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<fs::File>> {
        fs::create_dir_all(&self.root).map_err(|e| CliError::io(&self.root, e))?;
        let path = self.path(name);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(BufWriter::new(file))
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut out = self.create(name)?;
        serde_json::to_writer_pretty(
            &mut out,
            &Versioned {
                schema_version: SCHEMA_VERSION,
                body,
            },
        )
        .map_err(|e| CliError::Artifact {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        writeln!(out)
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut out = self.create(name)?;
        writeln!(out, "# schema_version {SCHEMA_VERSION}").map_err(|e| CliError::io(&path, e))?;
        let mut writer = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| CliError::Artifact {
            path: path.display().to_string(),
            detail: e.to_string(),
        };
        writer.write_record(columns).map_err(fail)?;
        for row in rows {
            writer.write_record(row).map_err(fail)?;
        }
        writer.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Field snapshot in the core CSV layout.
    pub fn snapshot(
        &self,
        name: &str,
        grid: &funnel_core::MappedGrid64,
        field: &funnel_core::Field64,
    ) -> Result<PathBuf> {
        let path = self.path(name);
        let mut out = self.create(name)?;
        funnel_core::snapshot::write_csv(grid, field, &mut out)?;
        out.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(name);
        let mut out = self.create(name)?;
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Shortest round-trip text of a float, in exponent form when tiny or huge;
/// `nan` for NaN.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

/// Parsed CSV artifact.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |detail: String| CliError::Artifact {
            path: path.display().to_string(),
            detail,
        };
        let (first, rest) = text
            .split_once('\n')
            .ok_or_else(|| bad("empty file".into()))?;
        let version = first
            .trim()
            .strip_prefix('#')
            .map(str::split_whitespace)
            .and_then(|mut w| match (w.next(), w.next()) {
                (Some("schema_version"), Some(v)) => v.parse::<u32>().ok(),
                _ => None,
            })
            .ok_or_else(|| bad("missing schema_version line".into()))?;
        if version != SCHEMA_VERSION {
            return Err(bad(format!("schema version {version} is not supported")));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(rest.as_bytes());
        let columns = reader
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(|s| s.trim().to_string()).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()
            .map_err(|e| bad(e.to_string()))?;
        Ok(Self { columns, rows })
    }

    /// Numeric column by name; unparsable cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r.get(k).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN))
                .collect(),
        )
    }

    pub fn text_column(&self, name: &str) -> Option<Vec<String>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r.get(k).cloned().unwrap_or_default())
                .collect(),
        )
    }
}

/// Reads a JSON artifact and checks its version.
pub fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |detail: String| CliError::Artifact {
        path: path.display().to_string(),
        detail,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => Ok(value),
        Some(v) => Err(bad(format!("schema version {v} is not supported"))),
        None => Err(bad("missing schema_version".into())),
    }
}
