//! Error metrics, convergence-rate estimation and the CSV run report.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{DdmError, Result};

/// `(Σ|u_* - u_h|² / Σ|u_*|²)^{1/2}`
pub fn relative_l2_error(u_h: &[f64], u_star: &[f64]) -> Result<f64> {
    if u_h.len() != u_star.len() || u_h.is_empty() {
        return Err(DdmError::Metric(format!(
            "need equal non-empty lengths, got {} and {}",
            u_h.len(),
            u_star.len()
        )));
    }
    let (num, den) = u_h.iter().zip(u_star).fold((0.0, 0.0), |(n, d), (h, s)| {
        (n + (s - h) * (s - h), d + s * s)
    });
    if den == 0.0 {
        return Err(DdmError::Metric(
            "exact solution vanishes on the test set".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Schwarz contraction factor `e^{-k_min δ}`.
pub fn analytic_factor(overlap: f64, k_min: f64) -> f64 {
    (-k_min * overlap).exp()
}

/// Geometric mean of the successive ratios `E_{i+1} / E_i`, skipping the
/// first ratio.
pub fn observed_rate(history: &[f64]) -> Result<f64> {
    if history.len() < 3 {
        return Err(DdmError::Metric(format!(
            "need at least 3 errors, got {}",
            history.len()
        )));
    }
    if let Some(bad) = history.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(DdmError::Metric(format!(
            "non-positive error {bad} in history"
        )));
    }
    let ratios = history.len() - 2;
    let log_sum: f64 = history[1..].windows(2).map(|w| (w[1] / w[0]).ln()).sum();
    Ok((log_sum / ratios as f64).exp())
}

/// One CSV data row: one subdomain at one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub outer_iter: usize,
    pub subdomain: usize,
    pub epochs: usize,
    pub final_loss: f64,
    pub interface_rel_change: f64,
    pub interior_rel_change: f64,
    pub rel_l2_error: f64,
    pub lr: f64,
    pub wall_ms: f64,
}

pub const COLUMNS: [&str; 9] = [
    "outer_iter",
    "subdomain",
    "epochs",
    "final_loss",
    "interface_rel_change",
    "interior_rel_change",
    "rel_l2_error",
    "lr",
    "wall_ms",
];

/// Everything written to a report file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Header lines, written after `# `.
    pub header: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub status: String,
    pub observed_rate: Option<f64>,
    pub analytic_rho: Option<f64>,
}

impl RunReport {
    /// An empty report with status `not-run`.
    pub fn empty(header: Vec<String>) -> Self {
        RunReport {
            header,
            rows: Vec::new(),
            status: "not-run".into(),
            observed_rate: None,
            analytic_rho: None,
        }
    }

    /// The report as CSV text.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in &self.header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.outer_iter,
                r.subdomain,
                r.epochs,
                fmt17(r.final_loss),
                fmt17(r.interface_rel_change),
                fmt17(r.interior_rel_change),
                fmt17(r.rel_l2_error),
                fmt17(r.lr),
                fmt17(r.wall_ms),
            );
        }
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        let _ = writeln!(
            out,
            "summary,{},{},{}",
            self.status,
            opt(self.observed_rate),
            opt(self.analytic_rho)
        );
        out
    }

    /// Parses text produced by [`to_csv`](Self::to_csv).
    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let bad = |msg: String| DdmError::Format {
            path: path.to_path_buf(),
            msg,
        };
        let mut header = Vec::new();
        let mut rows = Vec::new();
        let mut summary = None;
        let mut saw_columns = false;
        for (i, line) in text.lines().enumerate() {
            if let Some(h) = line.strip_prefix('#') {
                header.push(h.strip_prefix(' ').unwrap_or(h).to_string());
                continue;
            }
            if !saw_columns {
                if line != COLUMNS.join(",") {
                    return Err(bad(format!("line {}: expected column header", i + 1)));
                }
                saw_columns = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields[0] == "summary" {
                if fields.len() != 4 {
                    return Err(bad(format!("line {}: summary needs 4 fields", i + 1)));
                }
                let opt = |s: &str| -> Result<Option<f64>> {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse()
                            .map(Some)
                            .map_err(|_| bad(format!("line {}: bad number `{s}`", i + 1)))
                    }
                };
                summary = Some((fields[1].to_string(), opt(fields[2])?, opt(fields[3])?));
                continue;
            }
            if fields.len() != COLUMNS.len() {
                return Err(bad(format!(
                    "line {}: expected {} fields",
                    i + 1,
                    COLUMNS.len()
                )));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| bad(format!("line {}: bad integer `{s}`", i + 1)))
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("line {}: bad number `{s}`", i + 1)))
            };
            rows.push(ReportRow {
                outer_iter: int(fields[0])?,
                subdomain: int(fields[1])?,
                epochs: int(fields[2])?,
                final_loss: num(fields[3])?,
                interface_rel_change: num(fields[4])?,
                interior_rel_change: num(fields[5])?,
                rel_l2_error: num(fields[6])?,
                lr: num(fields[7])?,
                wall_ms: num(fields[8])?,
            });
        }
        let (status, observed_rate, analytic_rho) =
            summary.ok_or_else(|| bad("missing summary row".into()))?;
        Ok(RunReport {
            header,
            rows,
            status,
            observed_rate,
            analytic_rho,
        })
    }
}

/// `v` with 17 significant digits, enough to reproduce any `f64`.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place, so `path` never holds a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| DdmError::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| DdmError::config(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        DdmError::io(path, e)
    })
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    write_atomic(path, &report.to_csv())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| DdmError::io(path, e))?;
    RunReport::from_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_examples() {
        let u = [1.0, -2.0, 3.0];
        assert_eq!(relative_l2_error(&u, &u).unwrap(), 0.0);
        assert_eq!(relative_l2_error(&[0.0; 3], &u).unwrap(), 1.0);
        let scaled: Vec<f64> = u.iter().map(|v| 1.1 * v).collect();
        assert!((relative_l2_error(&scaled, &u).unwrap() - 0.1).abs() < 1e-12);
        assert!(relative_l2_error(&[1.0], &[0.0]).is_err());
        assert!(relative_l2_error(&[1.0], &[]).is_err());
    }

    #[test]
    fn analytic_factor_examples() {
        use std::f64::consts::PI;
        assert_eq!(analytic_factor(0.0, PI), 1.0);
        assert!((analytic_factor(0.2, PI) - 0.5335).abs() < 5e-5);
        assert!((analytic_factor(0.4, PI) - 0.2846).abs() < 5e-5);
        assert!((analytic_factor(0.8, PI) - 0.0810).abs() < 5e-5);
    }

    #[test]
    fn observed_rate_examples() {
        assert!((observed_rate(&[1.0, 0.5, 0.25, 0.125]).unwrap() - 0.5).abs() < 1e-15);
        assert!((observed_rate(&[0.3; 5]).unwrap() - 1.0).abs() < 1e-15);
        assert!((observed_rate(&[1.0, 0.9, 0.45, 0.225]).unwrap() - 0.5).abs() < 1e-15);
        assert!(observed_rate(&[1.0, 0.5]).is_err());
        assert!(observed_rate(&[1.0, 0.0, 0.5]).is_err());
    }

    #[test]
    fn empty_report() {
        let r = RunReport::empty(vec!["problem = model".into()]);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.ends_with("summary,not-run,,\n"));
        assert_eq!(RunReport::from_csv(&csv, Path::new("x")).unwrap(), r);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
