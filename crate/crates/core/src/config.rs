//! Experiment configuration: a flat `key = value` text format with `#`
//! comments. Omitted keys take the defaults of the reference experiments.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{DdmError, Result};
use crate::pde::{interface_problem, model_problem, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemName {
    Model,
    Interface,
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemName::Model => "model",
            ProblemName::Interface => "interface",
        })
    }
}

impl FromStr for ProblemName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "model" => Ok(ProblemName::Model),
            "interface" => Ok(ProblemName::Interface),
            _ => Err(format!("expected `model` or `interface`, got `{s}`")),
        }
    }
}

/// Whether subdomain training runs on one thread or one thread per
/// subdomain. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Single,
    PerSubdomain,
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Threads::Single => "1",
            Threads::PerSubdomain => "per-subdomain",
        })
    }
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "1" => Ok(Threads::Single),
            "per-subdomain" => Ok(Threads::PerSubdomain),
            _ => Err(format!("expected `1` or `per-subdomain`, got `{s}`")),
        }
    }
}

/// Every tunable of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemName,
    /// Coefficient contrast; used by the interface problem only.
    pub alpha: f64,
    pub subdomains: usize,
    pub overlap: f64,
    /// Number of hidden layers.
    pub layers: usize,
    /// Width of every hidden layer.
    pub units: usize,
    /// Interior points over the whole domain.
    pub n_f: usize,
    /// Boundary points per full edge of the global rectangle.
    pub n_g_per_edge: usize,
    /// Points per interface.
    pub n_gamma: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_base: f64,
    pub decay_every: u64,
    pub tol_loss: f64,
    pub eta: usize,
    pub max_epochs: usize,
    pub max_epochs_single: usize,
    pub tol_gamma: f64,
    pub tol_omega: f64,
    pub max_outer: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub threads: Threads,
}

/// Interface points used for the circle when `n_gamma` is not given.
pub const CIRCLE_N_GAMMA: usize = 200;

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemName::Model,
            alpha: 2.0,
            subdomains: 2,
            overlap: 0.2,
            layers: 3,
            units: 20,
            n_f: 2500,
            n_g_per_edge: 50,
            n_gamma: 50,
            batch_size: 64,
            lr0: 1e-3,
            decay_base: 0.999,
            decay_every: 10,
            tol_loss: 5e-3,
            eta: 100,
            max_epochs: 10_000,
            max_epochs_single: 50_000,
            tol_gamma: 1e-2,
            tol_omega: 1e-2,
            max_outer: 30,
            seed: 0,
            output: PathBuf::from("output"),
            threads: Threads::PerSubdomain,
        }
    }
}

/// Keys in serialization order.
pub const KEYS: [&str; 23] = [
    "problem",
    "alpha",
    "subdomains",
    "overlap",
    "layers",
    "units",
    "n_f",
    "n_g_per_edge",
    "n_gamma",
    "batch_size",
    "lr0",
    "decay_base",
    "decay_every",
    "tol_loss",
    "eta",
    "max_epochs",
    "max_epochs_single",
    "tol_gamma",
    "tol_omega",
    "max_outer",
    "seed",
    "output",
    "threads",
];

fn parse_value<T: FromStr>(key: &str, line: usize, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse().map_err(|e: T::Err| DdmError::ConfigKey {
        key: key.to_string(),
        line,
        msg: format!("cannot parse `{raw}`: {e}"),
    })
}

impl ExperimentConfig {
    /// Reads and validates a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DdmError::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses config text. Errors name the offending key and its line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut lines: Vec<(&'static str, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(DdmError::ConfigKey {
                    key: content.to_string(),
                    line,
                    msg: "expected `key = value`".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(DdmError::ConfigKey {
                    key: key.to_string(),
                    line,
                    msg: "unknown key".into(),
                });
            };
            if let Some((_, first)) = lines.iter().find(|(k, _)| *k == known) {
                return Err(DdmError::ConfigKey {
                    key: key.to_string(),
                    line,
                    msg: format!("duplicate key, first set on line {first}"),
                });
            }
            cfg.set(known, value, line)?;
            lines.push((known, line));
        }
        let line_of = |key: &str| lines.iter().find(|(k, _)| *k == key).map(|(_, l)| *l);
        if cfg.problem == ProblemName::Interface {
            if line_of("n_gamma").is_none() {
                cfg.n_gamma = CIRCLE_N_GAMMA;
            }
            if line_of("overlap").is_none() {
                cfg.overlap = 0.0;
            }
        }
        cfg.validate_with(|key| line_of(key).unwrap_or(0))?;
        Ok(cfg)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        match key {
            "problem" => self.problem = parse_value(key, line, value)?,
            "alpha" => self.alpha = parse_value(key, line, value)?,
            "subdomains" => self.subdomains = parse_value(key, line, value)?,
            "overlap" => self.overlap = parse_value(key, line, value)?,
            "layers" => self.layers = parse_value(key, line, value)?,
            "units" => self.units = parse_value(key, line, value)?,
            "n_f" => self.n_f = parse_value(key, line, value)?,
            "n_g_per_edge" => self.n_g_per_edge = parse_value(key, line, value)?,
            "n_gamma" => self.n_gamma = parse_value(key, line, value)?,
            "batch_size" => self.batch_size = parse_value(key, line, value)?,
            "lr0" => self.lr0 = parse_value(key, line, value)?,
            "decay_base" => self.decay_base = parse_value(key, line, value)?,
            "decay_every" => self.decay_every = parse_value(key, line, value)?,
            "tol_loss" => self.tol_loss = parse_value(key, line, value)?,
            "eta" => self.eta = parse_value(key, line, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, line, value)?,
            "max_epochs_single" => self.max_epochs_single = parse_value(key, line, value)?,
            "tol_gamma" => self.tol_gamma = parse_value(key, line, value)?,
            "tol_omega" => self.tol_omega = parse_value(key, line, value)?,
            "max_outer" => self.max_outer = parse_value(key, line, value)?,
            "seed" => self.seed = parse_value(key, line, value)?,
            "output" => {
                if value.is_empty() {
                    return Err(DdmError::ConfigKey {
                        key: key.into(),
                        line,
                        msg: "empty path".into(),
                    });
                }
                self.output = PathBuf::from(value)
            }
            "threads" => self.threads = parse_value(key, line, value)?,
            _ => {
                return Err(DdmError::ConfigKey {
                    key: key.to_string(),
                    line,
                    msg: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Checks every invariant; errors carry line 0 since no file is involved.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_| 0)
    }

    fn validate_with(&self, line_of: impl Fn(&str) -> usize) -> Result<()> {
        let fail = |key: &str, msg: String| {
            Err(DdmError::ConfigKey {
                key: key.to_string(),
                line: line_of(key),
                msg,
            })
        };
        let counts = [
            ("subdomains", self.subdomains),
            ("layers", self.layers),
            ("units", self.units),
            ("n_f", self.n_f),
            ("n_g_per_edge", self.n_g_per_edge),
            ("n_gamma", self.n_gamma),
            ("batch_size", self.batch_size),
            ("eta", self.eta),
            ("max_epochs", self.max_epochs),
            ("max_epochs_single", self.max_epochs_single),
            ("max_outer", self.max_outer),
        ];
        for (key, v) in counts {
            if v == 0 {
                return fail(key, "must be at least 1".into());
            }
        }
        if self.decay_every == 0 {
            return fail("decay_every", "must be at least 1".into());
        }
        let positive = [
            ("lr0", self.lr0),
            ("tol_loss", self.tol_loss),
            ("tol_gamma", self.tol_gamma),
            ("tol_omega", self.tol_omega),
            ("alpha", self.alpha),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(key, format!("must be positive and finite, got {v}"));
            }
        }
        if !(self.decay_base > 0.0 && self.decay_base <= 1.0) {
            return fail(
                "decay_base",
                format!("must lie in (0, 1], got {}", self.decay_base),
            );
        }
        if !(self.overlap >= 0.0 && self.overlap.is_finite()) {
            return fail(
                "overlap",
                format!("must be non-negative, got {}", self.overlap),
            );
        }
        match self.problem {
            ProblemName::Interface => {
                if self.subdomains != 2 {
                    return fail(
                        "subdomains",
                        "the interface problem uses exactly 2 subdomains".into(),
                    );
                }
                if self.overlap != 0.0 {
                    return fail("overlap", "the interface problem has no overlap".into());
                }
            }
            ProblemName::Model => {
                let width = std::f64::consts::PI / self.subdomains as f64;
                if self.subdomains > 1 && self.overlap >= 2.0 * width {
                    return fail(
                        "overlap",
                        format!(
                            "{} too large for {} strips of width {width:.4}",
                            self.overlap, self.subdomains
                        ),
                    );
                }
            }
        }
        Ok(())
    }

    /// `[2, units, ..., units, 1]` with `layers` hidden layers.
    pub fn network_dims(&self) -> Vec<usize> {
        let mut dims = vec![2];
        dims.extend(std::iter::repeat_n(self.units, self.layers));
        dims.push(1);
        dims
    }

    pub fn problem_instance(&self) -> Result<ProblemInstance> {
        match self.problem {
            ProblemName::Model => Ok(model_problem()),
            ProblemName::Interface => interface_problem(self.alpha),
        }
    }

    /// Value of `key` as it would be written to a config file.
    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "problem" => self.problem.to_string(),
            "alpha" => fmt_f64(self.alpha),
            "subdomains" => self.subdomains.to_string(),
            "overlap" => fmt_f64(self.overlap),
            "layers" => self.layers.to_string(),
            "units" => self.units.to_string(),
            "n_f" => self.n_f.to_string(),
            "n_g_per_edge" => self.n_g_per_edge.to_string(),
            "n_gamma" => self.n_gamma.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "lr0" => fmt_f64(self.lr0),
            "decay_base" => fmt_f64(self.decay_base),
            "decay_every" => self.decay_every.to_string(),
            "tol_loss" => fmt_f64(self.tol_loss),
            "eta" => self.eta.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "max_epochs_single" => self.max_epochs_single.to_string(),
            "tol_gamma" => fmt_f64(self.tol_gamma),
            "tol_omega" => fmt_f64(self.tol_omega),
            "max_outer" => self.max_outer.to_string(),
            "seed" => self.seed.to_string(),
            "output" => self.output.display().to_string(),
            "threads" => self.threads.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// All keys, one `key = value` line each, in [`KEYS`] order.
    pub fn serialize(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_omitted_keys() {
        let cfg = ExperimentConfig::parse("problem=model\nsubdomains=2\noverlap=0.2").unwrap();
        assert_eq!(cfg.subdomains, 2);
        assert_eq!(cfg.overlap, 0.2);
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.tol_gamma, 1e-2);
        assert_eq!(cfg.tol_omega, 1e-2);
        assert_eq!(cfg.tol_loss, 5e-3);
        assert_eq!(cfg.eta, 100);
        assert_eq!(cfg.max_epochs, 10_000);
        assert_eq!(cfg.max_epochs_single, 50_000);
    }

    #[test]
    fn comments_and_spacing() {
        let cfg = ExperimentConfig::parse("# header\n  tol_gamma = 1e-2   # outer\n\nunits=50\n")
            .unwrap();
        assert_eq!(cfg.tol_gamma, 0.01);
        assert_eq!(cfg.units, 50);
    }

    #[test]
    fn errors_name_key_and_line() {
        let err = ExperimentConfig::parse("units=20\noverlap=-0.1").unwrap_err();
        match err {
            DdmError::ConfigKey { key, line, .. } => {
                assert_eq!(key, "overlap");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = ExperimentConfig::parse("\n\nbogus=1").unwrap_err();
        assert!(matches!(err, DdmError::ConfigKey { ref key, line: 3, .. } if key == "bogus"));
        let err = ExperimentConfig::parse("layers=three").unwrap_err();
        assert!(matches!(err, DdmError::ConfigKey { ref key, line: 1, .. } if key == "layers"));
        let err = ExperimentConfig::parse("units=3\nunits=4").unwrap_err();
        assert!(matches!(err, DdmError::ConfigKey { line: 2, .. }));
        assert!(ExperimentConfig::parse("units").is_err());
    }

    #[test]
    fn interface_defaults_and_constraints() {
        let cfg = ExperimentConfig::parse("problem=interface\nalpha=20").unwrap();
        assert_eq!(cfg.subdomains, 2);
        assert_eq!(cfg.overlap, 0.0);
        assert_eq!(cfg.n_gamma, CIRCLE_N_GAMMA);
        assert!(ExperimentConfig::parse("problem=interface\nsubdomains=4").is_err());
        assert!(ExperimentConfig::parse("problem=interface\noverlap=0.2").is_err());
        assert!(ExperimentConfig::parse("problem=interface\nalpha=0").is_err());
    }

    #[test]
    fn overlap_must_keep_strips_proper() {
        assert!(ExperimentConfig::parse("subdomains=4\noverlap=1.6").is_err());
        assert!(ExperimentConfig::parse("subdomains=4\noverlap=0.8").is_ok());
        assert!(ExperimentConfig::parse("subdomains=1\noverlap=5").is_ok());
    }

    #[test]
    fn serialize_round_trip() {
        let cfg = ExperimentConfig::parse("problem=interface\nalpha=0.1\nseed=9\noutput=runs/a b")
            .unwrap();
        let again = ExperimentConfig::parse(&cfg.serialize()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn network_dims() {
        let cfg = ExperimentConfig {
            layers: 3,
            units: 50,
            ..Default::default()
        };
        assert_eq!(cfg.network_dims(), vec![2, 50, 50, 50, 1]);
    }
}
