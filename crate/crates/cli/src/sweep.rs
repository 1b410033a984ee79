//! Cartesian parameter sweeps with one report per cell, an aggregate CSV and
//! an `error(iterations)` text table.

use std::fmt::Write as _;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use deepddm::metrics::{fmt17, write_atomic, write_report};
use deepddm::ExperimentConfig;

/// Keys a sweep may vary.
pub const SWEEP_KEYS: [&str; 7] = [
    "layers",
    "units",
    "overlap",
    "subdomains",
    "n_f",
    "n_g_per_edge",
    "alpha",
];

/// One `--axis key=v1,v2,...` argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (key, list) = s
            .split_once('=')
            .ok_or_else(|| format!("expected key=v1,v2,..., got `{s}`"))?;
        let key = key.trim();
        if !SWEEP_KEYS.contains(&key) {
            return Err(format!(
                "cannot sweep `{key}`; expected one of {}",
                SWEEP_KEYS.join(", ")
            ));
        }
        let values: Vec<String> = list.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(format!("empty value in axis `{s}`"));
        }
        Ok(Axis {
            key: key.to_string(),
            values,
        })
    }
}

/// One grid cell: the chosen value index per axis and its config.
#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    pub choice: Vec<usize>,
    pub config: ExperimentConfig,
}

/// Every cell of the product, last axis varying fastest. Cell `k` uses seed
/// `base.seed + k`. All cells are validated before any runs.
pub fn expand(base: &ExperimentConfig, axes: &[Axis]) -> Result<Vec<Cell>> {
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.key == a.key) {
            bail!("axis `{}` given twice", a.key);
        }
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut cells = Vec::with_capacity(total);
    for index in 0..total {
        let mut rest = index;
        let mut choice = vec![0; axes.len()];
        for (c, a) in choice.iter_mut().zip(axes).rev() {
            *c = rest % a.values.len();
            rest /= a.values.len();
        }
        let mut config = base.clone();
        for (a, &c) in axes.iter().zip(&choice) {
            config.set(&a.key, &a.values[c], 0)?;
        }
        config.seed = base.seed.wrapping_add(index as u64);
        config
            .validate()
            .with_context(|| format!("sweep cell {index} ({})", describe(axes, &choice)))?;
        cells.push(Cell {
            index,
            choice,
            config,
        });
    }
    Ok(cells)
}

fn describe(axes: &[Axis], choice: &[usize]) -> String {
    axes.iter()
        .zip(choice)
        .map(|(a, &c)| format!("{}={}", a.key, a.values[c]))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Outcome of one finished cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub status: String,
    pub rel_l2_error: f64,
    pub outer_iterations: usize,
    pub observed_rate: Option<f64>,
}

pub fn aggregate_csv(axes: &[Axis], cells: &[Cell], outcomes: &[CellOutcome]) -> String {
    let mut out = String::from("cell,");
    for a in axes {
        out.push_str(&a.key);
        out.push(',');
    }
    out.push_str("seed,status,rel_l2_error,outer_iterations,observed_rate\n");
    for (cell, o) in cells.iter().zip(outcomes) {
        let _ = write!(out, "{},", cell.index);
        for (a, &c) in axes.iter().zip(&cell.choice) {
            let _ = write!(out, "{},", a.values[c]);
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            cell.config.seed,
            o.status,
            fmt17(o.rel_l2_error),
            o.outer_iterations,
            o.observed_rate.map(fmt17).unwrap_or_default()
        );
    }
    out
}

/// Grid with the last axis as columns and every combination of the other
/// axes as a row; entries read `error(iterations)`, `-` for cells not run.
pub fn table_text(axes: &[Axis], cells: &[Cell], outcomes: &[CellOutcome]) -> String {
    let entry = |k: usize| {
        outcomes.get(k).map_or_else(
            || "-".to_string(),
            |o| format!("{:.1e}({})", o.rel_l2_error, o.outer_iterations),
        )
    };
    let (row_axes, col_axis) = match axes.split_last() {
        Some((last, rest)) => (rest, Some(last)),
        None => (axes, None),
    };
    let cols = col_axis.map_or(1, |a| a.values.len());
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut head = vec![row_axes
        .iter()
        .map(|a| a.key.as_str())
        .collect::<Vec<_>>()
        .join(" ")];
    match col_axis {
        Some(a) => head.extend(a.values.iter().map(|v| format!("{}={v}", a.key))),
        None => head.push("result".into()),
    }
    grid.push(head);
    for row in cells.chunks(cols) {
        let label = describe(row_axes, &row[0].choice[..row_axes.len()]);
        let mut line = vec![label];
        line.extend(row.iter().map(|c| entry(c.index)));
        grid.push(line);
    }
    let widths: Vec<usize> = (0..=cols)
        .map(|j| grid.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &grid {
        let cells: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Runs every cell in order. Exit code 2 when some cell hit `max_outer`.
pub fn run(base: &ExperimentConfig, axes: &[Axis], verbose: bool) -> Result<u8> {
    let cells = expand(base, axes)?;
    let dir = &base.output;
    let mut outcomes = Vec::with_capacity(cells.len());
    let mut any_unconverged = false;
    for cell in &cells {
        let label = describe(axes, &cell.choice);
        if verbose {
            eprintln!("cell {} ({label})", cell.index);
        }
        let result = crate::solve(&cell.config, None, verbose)
            .with_context(|| format!("sweep cell {} ({label})", cell.index))?;
        write_report(
            &result.report(&cell.config),
            &dir.join(format!("cell_{:04}.csv", cell.index)),
        )?;
        println!(
            "cell {} {label}: {}",
            cell.index,
            crate::summary_line(&result)
        );
        any_unconverged |= !result.status.converged();
        outcomes.push(CellOutcome {
            status: result.status.label().to_string(),
            rel_l2_error: result.final_error(),
            outer_iterations: result.outer_iterations(),
            observed_rate: result.observed_rate(),
        });
        write_atomic(
            &dir.join("sweep.csv"),
            &aggregate_csv(axes, &cells[..outcomes.len()], &outcomes),
        )?;
        write_atomic(&dir.join("sweep.txt"), &table_text(axes, &cells, &outcomes))?;
    }
    print!("{}", table_text(axes, &cells, &outcomes));
    Ok(if any_unconverged {
        crate::EXIT_MAX_OUTER
    } else {
        0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(s: &str) -> Axis {
        s.parse().unwrap()
    }

    #[test]
    fn axis_parsing() {
        assert_eq!(
            axis("overlap=0.05, 0.2,0.8"),
            Axis {
                key: "overlap".into(),
                values: vec!["0.05".into(), "0.2".into(), "0.8".into()]
            }
        );
        assert!("lr0=1e-3".parse::<Axis>().is_err());
        assert!("units".parse::<Axis>().is_err());
        assert!("units=10,,20".parse::<Axis>().is_err());
    }

    #[test]
    fn product_order_and_seeds() {
        let base = ExperimentConfig {
            seed: 7,
            ..Default::default()
        };
        let axes = [axis("overlap=0.05,0.2,0.8"), axis("subdomains=2,4")];
        let cells = expand(&base, &axes).unwrap();
        assert_eq!(cells.len(), 6);
        let got: Vec<(f64, usize, u64)> = cells
            .iter()
            .map(|c| (c.config.overlap, c.config.subdomains, c.config.seed))
            .collect();
        assert_eq!(
            got,
            [
                (0.05, 2, 7),
                (0.05, 4, 8),
                (0.2, 2, 9),
                (0.2, 4, 10),
                (0.8, 2, 11),
                (0.8, 4, 12)
            ]
        );
    }

    #[test]
    fn invalid_cell_rejected_before_running() {
        let axes = [axis("overlap=0.2,-0.1")];
        let err = expand(&ExperimentConfig::default(), &axes).unwrap_err();
        assert!(format!("{err:#}").contains("overlap"), "{err:#}");
        assert!(expand(
            &ExperimentConfig::default(),
            &[axis("units=5"), axis("units=6")]
        )
        .is_err());
    }

    #[test]
    fn table_layout() {
        let axes = [axis("layers=2,3"), axis("units=10,20")];
        let cells = expand(&ExperimentConfig::default(), &axes).unwrap();
        let done = |e: f64, n: usize| CellOutcome {
            status: "converged-interior".into(),
            rel_l2_error: e,
            outer_iterations: n,
            observed_rate: None,
        };
        let outcomes = [done(2.6e-3, 7), done(1.1e-3, 5), done(4.3e-4, 1)];
        let text = table_text(&axes, &cells, &outcomes);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("units=10") && lines[0].contains("units=20"));
        assert!(
            lines[1].starts_with("layers=2")
                && lines[1].contains("2.6e-3(7)")
                && lines[1].contains("1.1e-3(5)")
        );
        assert!(lines[2].contains("4.3e-4(1)") && lines[2].ends_with('-'));
        let csv = aggregate_csv(&axes, &cells, &outcomes);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with(
            "cell,layers,units,seed,status,rel_l2_error,outer_iterations,observed_rate\n"
        ));
    }
}
