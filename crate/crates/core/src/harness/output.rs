//! CSV emission and the run manifest.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::harness::runner::{Row, SweepResult};

pub const CSV_HEADER: &str =
    "sweep_variable,sweep_value,series_variable,series_value,estimator,metric,value,stderr,trials,degenerate";

/// Real number with 17 significant digits.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn optional(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

pub fn csv_line(r: &Row) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        field(&r.sweep_variable),
        optional(r.sweep_value),
        field(&r.series_variable),
        optional(r.series_value),
        field(&r.estimator),
        field(&r.metric),
        format_real(r.value),
        format_real(r.stderr),
        r.trials,
        r.degenerate
    )
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut s = String::with_capacity(64 * (result.rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &result.rows {
        s.push_str(&csv_line(r));
        s.push('\n');
    }
    s
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_csv(result)).map_err(|e| {
        std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub rows: usize,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

impl Manifest {
    pub fn new(config_text: &str, seed: u64, threads: usize, wall_time_s: f64, result: &SweepResult) -> Self {
        Self {
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            wall_time_s,
            rows: result.rows.len(),
            warnings: result.warnings.clone(),
            failures: result.failures.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_sha256 = {}", self.config_sha256);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "wall_time_s = {:.3}", self.wall_time_s);
        let _ = writeln!(s, "rows = {}", self.rows);
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        for f in &self.failures {
            let _ = writeln!(s, "failure = {f}");
        }
        s
    }
}

/// `results.csv` → `results.csv.manifest`.
pub fn manifest_path(csv: &Path) -> std::path::PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".manifest");
    name.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: &str, value: f64) -> Row {
        Row {
            sweep_variable: "noise_power_uw".into(),
            sweep_value: Some(0.2),
            series_variable: String::new(),
            series_value: None,
            estimator: "mdc".into(),
            metric: metric.into(),
            value,
            stderr: 0.0,
            trials: 10,
            degenerate: 0,
        }
    }

    #[test]
    fn empty_result_is_header_only() {
        assert_eq!(to_csv(&SweepResult::default()), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn reals_keep_seventeen_digits() {
        let s = format_real(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(format_real(f64::NAN), "NaN");
    }

    #[test]
    fn lines_and_quoting() {
        let mut r = SweepResult::default();
        r.rows.push(row("mse", 1.5));
        r.rows.push(row("a,\"b\"", 2.0));
        let csv = to_csv(&r);
        assert!(!csv.contains('\r'));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[1],
            "noise_power_uw,2.0000000000000001e-1,,,mdc,mse,1.5000000000000000e0,0.0000000000000000e0,10,0"
        );
        assert!(lines[2].contains("\"a,\"\"b\"\"\""));
        assert_eq!(to_csv(&r), csv);
    }

    #[test]
    fn manifest_hash() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            manifest_path(Path::new("out/x.csv")),
            Path::new("out/x.csv.manifest")
        );
    }
}
