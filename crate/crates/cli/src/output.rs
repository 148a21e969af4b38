//! Output documents: pretty JSON with the run configuration, plus fixed-header
//! CSV tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use stellar_core::wigner::WignerGrid;
use stellar_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct Sink {
    /// Output file; with `--format both`, the stem for `.json` and `.csv`.
    /// Standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Everything needed to regenerate an output. No timestamps, so identical
/// runs give identical bytes.
#[derive(Debug, Serialize)]
pub struct Document {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
}

impl Document {
    pub fn new(command: &'static str, config: Value, result: Value) -> Self {
        Self {
            tool: "stellar",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialize");
        s.push('\n');
        s
    }
}

fn csv_text(header: [&str; 2], rows: &[[String; 2]]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

impl Sink {
    pub fn write(&self, doc: &Document, table: Option<([&str; 2], Vec<[String; 2]>)>) -> Result<()> {
        let csv = match (&table, self.format) {
            (None, Format::Csv | Format::Both) => {
                bail!(Error::InvalidSpec(format!("`{}` has no CSV output; use --format json", doc.command)))
            }
            (Some((header, rows)), _) => Some(csv_text(*header, rows)?),
            (None, Format::Json) => None,
        };
        match (self.format, &self.out) {
            (Format::Json, None) => to_stdout(&doc.to_json())?,
            (Format::Json, Some(p)) => write_file(p, &doc.to_json())?,
            (Format::Csv, None) => to_stdout(&csv.expect("checked above"))?,
            (Format::Csv, Some(p)) => write_file(p, &csv.expect("checked above"))?,
            (Format::Both, None) => {
                bail!(Error::InvalidSpec("--format both needs --out".into()))
            }
            (Format::Both, Some(stem)) => {
                write_file(&stem.with_extension("json"), &doc.to_json())?;
                write_file(&stem.with_extension("csv"), &csv.expect("checked above"))?;
            }
        }
        Ok(())
    }
}

/// A closed pipe (`stellar … | head`) is not an error.
fn to_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// `x, p, w` rows of a Wigner grid.
pub fn write_grid_csv(path: &Path, grid: &WignerGrid) -> Result<()> {
    let axis = grid.axis();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["x", "p", "w"])?;
    for (i, p) in axis.iter().enumerate() {
        for (j, x) in axis.iter().enumerate() {
            let v = grid.values[i * grid.resolution + j];
            w.write_record([format!("{x}"), format!("{p}"), format!("{v}")])?;
        }
    }
    w.flush()?;
    Ok(())
}
