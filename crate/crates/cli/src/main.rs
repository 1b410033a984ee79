//! `deepddm` command-line driver: solve one config, sweep a grid of configs,
//! or run the analytic verification checks.

mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use deepddm::config::Threads;
use deepddm::ddm::{solve_ddm_with, OuterRecord, SolveOptions};
use deepddm::metrics::write_report;
use deepddm::{solve_single, DdmResult, ExperimentConfig};

use crate::sweep::Axis;

const EXIT_MAX_OUTER: u8 = 2;
const EXIT_ERROR: u8 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "deepddm",
    version,
    about = "Overlapping Schwarz domain decomposition with PINN subdomain solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides shared by `solve` and `sweep`.
#[derive(clap::Args, Debug)]
struct RunFlags {
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// `1` trains subdomains sequentially; any other count runs one worker per subdomain.
    #[arg(long)]
    threads: Option<usize>,
    /// Print one progress line per outer iteration to stderr.
    #[arg(long, short)]
    verbose: bool,
}

impl RunFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(out) = &self.output {
            cfg.output = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.threads {
            cfg.threads = if n <= 1 {
                Threads::Single
            } else {
                Threads::PerSubdomain
            };
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write `<output>/report.csv`.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Write the subdomain networks after every outer iteration to this directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run the Cartesian product of the given axes, one report per cell.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...` over layers, units, overlap, subdomains, n_f, n_g_per_edge or alpha.
        #[arg(long = "axis", required = true)]
        axes: Vec<Axis>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the derivative, manufactured-solution and geometry checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for max_outer here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve {
            config,
            flags,
            checkpoint,
        } => {
            let mut cfg = load(&config)?;
            flags.apply(&mut cfg);
            cfg.validate()?;
            let result = solve(&cfg, checkpoint, flags.verbose)?;
            let path = cfg.output.join("report.csv");
            write_report(&result.report(&cfg), &path)?;
            println!("{} report={}", summary_line(&result), path.display());
            Ok(exit_code(&result))
        }
        Command::Sweep {
            config,
            axes,
            flags,
        } => {
            let mut base = load(&config)?;
            flags.apply(&mut base);
            sweep::run(&base, &axes, flags.verbose)
        }
        Command::Verify { seed } => {
            let checks = deepddm::verify::all_checks(seed);
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            println!("{} checks, {failed} failed", checks.len());
            Ok(if failed == 0 { 0 } else { EXIT_ERROR })
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))
}

/// Single-domain mode when `subdomains = 1`, the outer loop otherwise.
pub(crate) fn solve(
    cfg: &ExperimentConfig,
    checkpoint: Option<PathBuf>,
    verbose: bool,
) -> Result<DdmResult> {
    if cfg.subdomains == 1 && checkpoint.is_none() {
        return Ok(solve_single(cfg)?);
    }
    let options = SolveOptions {
        checkpoint_dir: checkpoint,
    };
    let mut observer = |r: &OuterRecord| {
        if verbose {
            let epochs: Vec<usize> = r.subdomains.iter().map(|s| s.epochs).collect();
            eprintln!(
                "outer {:>3}  rel_l2 {:.3e}  epochs {:?}  {:.1}s",
                r.iteration,
                r.rel_l2_error,
                epochs,
                r.wall_ms / 1e3
            );
        }
    };
    Ok(solve_ddm_with(cfg, &options, &mut observer)?)
}

pub(crate) fn summary_line(result: &DdmResult) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    format!(
        "status={} outer_iterations={} rel_l2_error={:.3e} observed_rate={} analytic_rho={}",
        result.status.label(),
        result.outer_iterations(),
        result.final_error(),
        opt(result.observed_rate()),
        opt(result.analytic_rho()),
    )
}

pub(crate) fn exit_code(result: &DdmResult) -> u8 {
    if result.status.converged() {
        0
    } else {
        EXIT_MAX_OUTER
    }
}
