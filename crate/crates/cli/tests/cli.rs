use std::path::Path;
use std::process::{Command, Output};

use deepddm::metrics::read_report;

const TINY: &str = "\
problem = model
layers = 1
units = 5
n_f = 64
n_g_per_edge = 8
n_gamma = 8
max_epochs = 4
max_epochs_single = 4
eta = 2
";

fn deepddm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepddm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, format!("{TINY}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_unconverged_exits_2_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "max_outer = 2\ntol_gamma = 1e-14\ntol_omega = 1e-14\n",
    );
    let out = dir.path().join("out");
    let o = deepddm(&[
        "solve",
        &cfg,
        "--output",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "--threads",
        "1",
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("status=max-outer outer_iterations=2"));
    let report = read_report(&out.join("report.csv")).unwrap();
    assert_eq!(report.status, "max-outer");
    assert_eq!(report.rows.len(), 4);
    assert!(report.header.iter().any(|h| h == "seed = 3"));
    assert!(report.header.iter().any(|h| h == "threads = 1"));
}

#[test]
fn solve_single_domain_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "subdomains = 1\noverlap = 0\n");
    let out = dir.path().join("out");
    let o = deepddm(&["solve", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = read_report(&out.join("report.csv")).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.status, "converged-interface");
}

#[test]
fn checkpoints_written_per_outer_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "max_outer = 2\ntol_gamma = 1e-14\ntol_omega = 1e-14\n",
    );
    let out = dir.path().join("out");
    let ck = dir.path().join("ck");
    let o = deepddm(&[
        "solve",
        &cfg,
        "--output",
        out.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let (iteration, nets) = deepddm::ddm::read_checkpoint(&ck.join("outer_0002.ckpt")).unwrap();
    assert_eq!(iteration, 2);
    assert_eq!(nets.len(), 2);
    assert_eq!(nets[0].dims(), &[2, 5, 1]);
}

#[test]
fn config_errors_exit_1_without_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "overlap = -0.1\n");
    let out = dir.path().join("out");
    let o = deepddm(&["solve", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("overlap") && err.contains("line 10"), "{err}");
    assert!(!out.exists());

    let missing = dir.path().join("nope.cfg");
    assert_eq!(
        deepddm(&["solve", missing.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(deepddm(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    assert_eq!(
        deepddm(&["sweep", &cfg, "--axis", "lr0=1e-3,1e-2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(deepddm(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_writes_cells_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "max_outer = 1\n");
    let out = dir.path().join("sweep");
    let o = deepddm(&[
        "sweep",
        &cfg,
        "--axis",
        "overlap=0.1,0.4",
        "--axis",
        "units=3,4",
        "--output",
        out.to_str().unwrap(),
        "--seed",
        "10",
    ]);
    assert!(
        matches!(o.status.code(), Some(0 | 2)),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for k in 0..4 {
        let r = read_report(&out.join(format!("cell_{k:04}.csv"))).unwrap();
        assert!(r.header.iter().any(|h| *h == format!("seed = {}", 10 + k)));
    }
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "cell,overlap,units,seed,status,rel_l2_error,outer_iterations,observed_rate"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("2,0.4,3,12,"));
    let txt = std::fs::read_to_string(out.join("sweep.txt")).unwrap();
    assert_eq!(txt.lines().count(), 3);
    assert!(txt.lines().nth(2).unwrap().starts_with("overlap=0.4"));
    assert!(txt.contains("(1)"));
}

#[test]
fn sweep_rejects_invalid_cell_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("sweep");
    let o = deepddm(&[
        "sweep",
        &cfg,
        "--axis",
        "overlap=0.2,7",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn verify_passes() {
    let o = deepddm(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 50);
    assert!(text.trim_end().ends_with("0 failed"));
}
