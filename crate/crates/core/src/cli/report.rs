//! Tables, identity checks and the manifest written by every command.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Map, Number, Value};

use crate::numerics::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Float(f64),
    Int(u64),
    Bool(bool),
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

/// 17 significant digits: enough to round-trip any f64.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_owned()
    } else if x > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Float(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Float(x) if x.is_finite() => Value::Number(
                format_float(*x)
                    .parse::<Number>()
                    .expect("valid JSON number"),
            ),
            Cell::Float(_) => Value::Null,
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
        }
    }
}

/// One output table with a fixed column set.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        Self {
            name,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width for table {}",
            self.name
        );
        self.rows.push(row);
    }

    fn write(&self, dir: &Path, format: Format) -> Result<PathBuf> {
        let path = dir.join(format!("{}.{}", self.name, format.extension()));
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_path(&path)
                    .with_context(|| format!("cannot create {}", path.display()))?;
                w.write_record(self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::text))?;
                }
                w.flush()?;
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| ((*c).to_owned(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let doc = json!({ "table": self.name, "columns": self.columns, "rows": rows });
                write_json(&path, &doc)?;
            }
        }
        Ok(path)
    }
}

fn write_json(path: &Path, doc: &Value) -> Result<()> {
    let mut f =
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, doc)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// A named numerical check against a tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub subject: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        subject: impl Into<String>,
        residual: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            subject: subject.into(),
            residual,
            tolerance,
        }
    }

    pub fn pass(&self) -> bool {
        self.residual <= self.tolerance
    }
}

/// Everything one command produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportBundle {
    pub command: String,
    pub scenario: String,
    pub seed: Option<u64>,
    pub tolerances: Vec<(&'static str, f64)>,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl ReportBundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            super::EXIT_OK
        } else {
            super::EXIT_IDENTITY
        }
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(
            "identity_checks",
            &["check", "subject", "residual", "tolerance", "pass"],
        );
        for c in &self.checks {
            t.push(vec![
                c.name.as_str().into(),
                c.subject.as_str().into(),
                c.residual.into(),
                c.tolerance.into(),
                c.pass().into(),
            ]);
        }
        t
    }

    /// Writes every table plus `manifest.json` into `dir`. Output is a pure
    /// function of the bundle: no timestamps or host details.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let mut tables: Vec<&Table> = self.tables.iter().collect();
        let checks = self.checks_table();
        if !self.checks.is_empty() {
            tables.push(&checks);
        }
        let mut written = Vec::new();
        let mut files = Vec::new();
        for t in tables {
            let path = t.write(dir, format)?;
            files.push(json!({
                "table": t.name,
                "file": path.file_name().map(|n| n.to_string_lossy().into_owned()),
                "columns": t.columns,
                "rows": t.rows.len(),
            }));
            written.push(path);
        }
        let tolerances: Map<String, Value> = self
            .tolerances
            .iter()
            .map(|(k, v)| ((*k).to_owned(), Cell::Float(*v).json()))
            .collect();
        let manifest = json!({
            "tool": "quasidet",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "scenario": self.scenario,
            "seed": self.seed,
            "format": format.extension(),
            "tolerances": tolerances,
            "checks_passed": self.all_pass(),
            "exit_code": self.exit_code(),
            "files": files,
        });
        let path = dir.join("manifest.json");
        write_json(&path, &manifest)?;
        written.push(path);
        Ok(written)
    }
}

pub fn re_im(z: C64) -> [Cell; 2] {
    [z.re.into(), z.im.into()]
}
