//! Output files. Every file starts with a `# entropic <version> config=<hash>` line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use entropic_core::{BridgeSolution, CheckResult};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::GridConfig;
use crate::error::CliError;

pub const SOLUTION_FILE: &str = "solution.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const INTERP_FILE: &str = "interp.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const REPORT_FILE: &str = "report.txt";

const HASH_PREFIX_LEN: usize = 16;

pub fn config_hash(raw: &[u8]) -> String {
    let digest = Sha256::digest(raw);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    hex[..HASH_PREFIX_LEN].to_string()
}

pub fn header_line(raw_config: &[u8]) -> String {
    format!("# entropic {} config={}\n", env!("CARGO_PKG_VERSION"), config_hash(raw_config))
}

/// Writes files under one output directory, each prefixed by the same header.
pub struct OutputDir {
    dir: PathBuf,
    header: String,
}

impl OutputDir {
    pub fn create(dir: &Path, raw_config: &[u8]) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header: header_line(raw_config),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, format!("{}{}", self.header, body))?;
        Ok(path)
    }
}

/// Shortest digits that round-trip; exponent form outside `[1e-4, 1e15)`.
pub fn csv_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn csv_table(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| csv_number(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn diagnostics_csv(solution: &BridgeSolution) -> String {
    let rows: Vec<Vec<f64>> = solution
        .history()
        .iter()
        .map(|r| vec![r.iteration as f64, r.residual0, r.residual1])
        .collect();
    csv_table(&["iteration", "residual0", "residual1"], &rows)
}

/// 17 significant digits; non-finite entries become `null`.
fn json_array(values: &[f64]) -> String {
    let mut out = String::from("[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if v.is_finite() {
            let _ = write!(out, "{v:.16e}");
        } else {
            out.push_str("null");
        }
    }
    out.push(']');
    out
}

#[derive(Serialize)]
struct SolutionMeta<'a> {
    grid: &'a GridConfig,
    eps: f64,
    iterations: usize,
    converged: bool,
    residual0: f64,
    residual1: f64,
}

pub fn solution_json(grid: &GridConfig, solution: &BridgeSolution) -> String {
    let meta = SolutionMeta {
        grid,
        eps: solution.eps(),
        iterations: solution.iterations(),
        converged: solution.converged(),
        residual0: solution.residual0(),
        residual1: solution.residual1(),
    };
    let meta = serde_json::to_string(&meta).expect("solution metadata serializes");
    let open = meta.strip_suffix('}').expect("object");
    format!(
        "{open},\"log_f\":{},\"log_g\":{}}}\n",
        json_array(solution.log_f().values()),
        json_array(solution.log_g().values())
    )
}

#[derive(Serialize)]
struct Report<'a> {
    all_passed: bool,
    checks: &'a [CheckResult],
}

pub fn report_json(results: &[CheckResult]) -> String {
    let report = Report {
        all_passed: results.iter().all(|r| r.passed),
        checks: results,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    text
}
