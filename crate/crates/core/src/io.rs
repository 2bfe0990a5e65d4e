//! Artifact files: schema-tagged CSV tables and run manifests.
//!
//! Every CSV starts with a `# fqcp-schema: <name>/<version>` line, followed by
//! a header row. Undefined values are written as empty cells. Floats use the
//! shortest representation that round-trips.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, FqcpError, Result};
use crate::series::{ObservableSeries, SeriesPoint};

const SCHEMA_PREFIX: &str = "# fqcp-schema: ";
pub const SCHEMA_VERSION: u32 = 1;

/// Table layouts exchanged between subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    /// t, mean, stderr, n_samples
    Series,
    /// t, observable, value, flagged
    Observables,
    /// t, r, n
    Profile,
    /// t, delta_l2, delta_N, delta_P
    Ledger,
    /// L, p, D, D_O, re_eps1, im_eps1, tau, converged, sweeps
    Gap,
    /// p, t, delta, stderr
    Exponents,
    /// t, p_c, delta, p_lo, p_hi, wide_bracket
    Crossings,
    /// t, r, x, y
    Collapse,
    /// L, variant, mean_ratio, ratios_used, ratios_skipped
    Levels,
    /// t, p, mean_activated_tq, total_tq, fraction_tq, mean_activated_mr, total_mr, fraction_mr
    Resources,
    /// t, o_1x, stderr_1x, o_3x, stderr_3x, o_zne, stderr_zne
    Zne,
}

impl Schema {
    pub fn name(self) -> &'static str {
        match self {
            Self::Series => "series",
            Self::Observables => "observables",
            Self::Profile => "profile",
            Self::Ledger => "ledger",
            Self::Gap => "gap",
            Self::Exponents => "exponents",
            Self::Crossings => "crossings",
            Self::Collapse => "collapse",
            Self::Levels => "levels",
            Self::Resources => "resources",
            Self::Zne => "zne",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::Series => &["t", "mean", "stderr", "n_samples"],
            Self::Observables => &["t", "observable", "value", "flagged"],
            Self::Profile => &["t", "r", "n"],
            Self::Ledger => &["t", "delta_l2", "delta_N", "delta_P"],
            Self::Gap => &["L", "p", "D", "D_O", "re_eps1", "im_eps1", "tau", "converged", "sweeps"],
            Self::Exponents => &["p", "t", "delta", "stderr"],
            Self::Crossings => &["t", "p_c", "delta", "p_lo", "p_hi", "wide_bracket"],
            Self::Collapse => &["t", "r", "x", "y"],
            Self::Levels => &["L", "variant", "mean_ratio", "ratios_used", "ratios_skipped"],
            Self::Resources => &[
                "t",
                "p",
                "mean_activated_tq",
                "total_tq",
                "fraction_tq",
                "mean_activated_mr",
                "total_mr",
                "fraction_mr",
            ],
            Self::Zne => &["t", "o_1x", "stderr_1x", "o_3x", "stderr_3x", "o_zne", "stderr_zne"],
        }
    }

    fn tag(self) -> String {
        format!("{}/{}", self.name(), SCHEMA_VERSION)
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A table in memory: rows of cells in the column order of its schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: Schema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.schema.columns().len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "{SCHEMA_PREFIX}{}", self.schema.tag())?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(self.schema.columns())?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn read(path: &Path, schema: Schema) -> Result<Self> {
        let file = fs::File::open(path)?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let found = first.trim_end().strip_prefix(SCHEMA_PREFIX).unwrap_or(first.trim_end());
        let mismatch = |found: &str| FqcpError::Schema {
            path: path.display().to_string(),
            expected: schema.tag(),
            found: found.to_string(),
        };
        if found != schema.tag() {
            return Err(mismatch(found));
        }
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != schema.columns() {
            return Err(mismatch(&header.join(",")));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { schema, rows })
    }

    /// Cell `col` of `row`, by column name.
    pub fn cell<'a>(&self, row: &'a [String], col: &str) -> Result<&'a str> {
        let i = self
            .schema
            .columns()
            .iter()
            .position(|c| *c == col)
            .ok_or_else(|| FqcpError::Config(format!("no column {col} in {}", self.schema.name())))?;
        Ok(&row[i])
    }

    pub fn f64(&self, row: &[String], col: &str) -> Result<f64> {
        self.opt_f64(row, col)?
            .ok_or_else(|| FqcpError::Config(format!("empty {col} cell in {} table", self.schema.name())))
    }

    pub fn opt_f64(&self, row: &[String], col: &str) -> Result<Option<f64>> {
        let s = self.cell(row, col)?;
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| FqcpError::Config(format!("bad number `{s}` in column {col}")))
    }

    pub fn usize(&self, row: &[String], col: &str) -> Result<usize> {
        let s = self.cell(row, col)?;
        s.parse()
            .map_err(|_| FqcpError::Config(format!("bad integer `{s}` in column {col}")))
    }
}

pub fn series_table(series: &ObservableSeries) -> Table {
    let mut t = Table::new(Schema::Series);
    for p in &series.points {
        t.push(vec![
            p.t.to_string(),
            fmt_opt(p.value),
            fmt_f64(p.stderr),
            p.count.to_string(),
        ]);
    }
    t
}

/// Read a series table; the series is named after the file stem.
pub fn read_series(path: &Path) -> Result<ObservableSeries> {
    let table = Table::read(path, Schema::Series)?;
    let points = table
        .rows
        .iter()
        .map(|row| {
            Ok(SeriesPoint {
                t: table.usize(row, "t")?,
                value: table.opt_f64(row, "mean")?,
                stderr: table.f64(row, "stderr")?,
                count: table.usize(row, "n_samples")? as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    ObservableSeries::new(name, path.display().to_string(), points)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
}

/// Written next to the artifacts of every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub artifacts: Vec<ArtifactRecord>,
    /// Hash over the config and every artifact hash, in file-name order.
    pub content_hash: String,
    pub wall_time_s: f64,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// An output directory that refuses to replace existing files unless forced.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    force: bool,
    written: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>, force: bool) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        if !root.is_dir() {
            return config(format!("{} is not a directory", root.display()));
        }
        Ok(Self {
            root,
            force,
            written: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    /// Fail before any work if one of `files` would be overwritten.
    pub fn check_free(&self, files: &[&str]) -> Result<()> {
        if self.force {
            return Ok(());
        }
        for f in files.iter().copied().chain([MANIFEST_FILE]) {
            let p = self.path(f);
            if p.exists() {
                return Err(FqcpError::Overwrite(p.display().to_string()));
            }
        }
        Ok(())
    }

    pub fn write_bytes(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(file);
        if path.exists() && !self.force && !self.written.contains_key(file) {
            return Err(FqcpError::Overwrite(path.display().to_string()));
        }
        let tmp = self.path(&format!(".{file}.partial"));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        self.written.insert(file.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_table(&mut self, file: &str, table: &Table) -> Result<PathBuf> {
        self.write_bytes(file, &table.to_bytes()?)
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(file, &bytes)
    }

    pub fn written(&self) -> impl Iterator<Item = (&str, &str)> {
        self.written.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Record everything written so far in `manifest.json`.
    pub fn finish(
        &mut self,
        command: &str,
        config: serde_json::Value,
        wall_time_s: f64,
        notes: BTreeMap<String, String>,
    ) -> Result<Manifest> {
        let artifacts: Vec<ArtifactRecord> = self
            .written
            .iter()
            .filter(|(f, _)| f.as_str() != MANIFEST_FILE)
            .map(|(f, h)| ArtifactRecord {
                file: f.clone(),
                sha256: h.clone(),
            })
            .collect();
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&config)?);
        for a in &artifacts {
            hasher.update(a.file.as_bytes());
            hasher.update(a.sha256.as_bytes());
        }
        let manifest = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            artifacts,
            content_hash: hex::encode(hasher.finalize()),
            wall_time_s,
            notes,
        };
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(manifest)
    }
}
