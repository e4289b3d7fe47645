//! CSV and JSON output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use qgs_core::{JointPND, TwoPointParams};
use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, ScanConfig};
use crate::error::{CliError, CliResult};
use crate::scan::ScanRow;

pub const CSV_HEADER: &str = "separation,N,M,g2_tilde,log2_g2_tilde,classical_g2,tail_mass,flags";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seventeen significant digits, enough to recover the `f64` exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: ScanConfig,
    pub seed: Option<u64>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanDocument {
    pub metadata: Metadata,
    pub rows: Vec<ScanRow>,
}

impl ScanDocument {
    pub fn new(config: &ScanConfig, rows: Vec<ScanRow>) -> Self {
        Self {
            metadata: Metadata {
                config: config.clone(),
                seed: config.mc.as_ref().map(|mc| mc.seed),
                version: VERSION.to_string(),
            },
            rows,
        }
    }
}

pub fn to_csv(rows: &[ScanRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_float(r.separation),
            r.n,
            r.m,
            fmt_opt(r.g2_tilde),
            fmt_opt(r.log2_g2_tilde),
            fmt_opt(r.classical_g2),
            fmt_opt(r.tail_mass),
            r.flags.join(";"),
        );
    }
    out
}

pub fn to_json(config: &ScanConfig, rows: &[ScanRow]) -> CliResult<String> {
    let doc = ScanDocument::new(config, rows.to_vec());
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> CliResult<ScanDocument> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("scan document: {e}")))
}

/// Scan output in the requested format.
pub fn render(config: &ScanConfig, rows: &[ScanRow], format: OutputFormat) -> CliResult<String> {
    if rows.is_empty() {
        return Err(CliError::Config("nothing to emit: the scan produced no rows".into()));
    }
    match format {
        OutputFormat::Csv => Ok(to_csv(rows)),
        OutputFormat::Json => to_json(config, rows),
    }
}

/// Writes `text` to `path`, or to standard output when there is none.
pub fn write_output(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PndCell {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub probability: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PndDocument {
    pub separation: f64,
    pub params: TwoPointParams,
    pub n_max: usize,
    pub tail_mass: f64,
    pub version: String,
    pub cells: Vec<PndCell>,
}

pub fn render_pnd(pnd: &JointPND, separation: f64, format: OutputFormat) -> CliResult<String> {
    let dim = pnd.n_max + 1;
    let cells: Vec<PndCell> = (0..dim * dim)
        .map(|i| PndCell {
            n: i / dim,
            m: i % dim,
            probability: pnd.p[i],
            error: pnd.errors[i],
        })
        .collect();
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("N,M,probability,error\n");
            for c in &cells {
                let _ = writeln!(out, "{},{},{},{}", c.n, c.m, fmt_float(c.probability), fmt_float(c.error));
            }
            Ok(out)
        }
        OutputFormat::Json => {
            let doc = PndDocument {
                separation,
                params: pnd.params,
                n_max: pnd.n_max,
                tail_mass: pnd.tail_mass,
                version: VERSION.to_string(),
                cells,
            };
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Config(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
    }
}
