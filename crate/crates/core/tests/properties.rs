//! Exact invariants over generated inputs.

use std::path::Path;

use deepddm::config::{ProblemName, Threads};
use deepddm::ddm::{read_checkpoint, solve_ddm, solve_single, write_checkpoint, DdmResult};
use deepddm::geometry::{decompose_strips, Rect, Region};
use deepddm::metrics::{analytic_factor, observed_rate, relative_l2_error, ReportRow, RunReport};
use deepddm::net::MlpNetwork;
use deepddm::optim::make_minibatches;
use deepddm::ExperimentConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minibatches_partition_interior(n in 1usize..3000, bs in 1usize..200, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = make_minibatches(n, bs, &mut rng).unwrap();
        prop_assert_eq!(plan.len(), n.div_ceil(bs));
        prop_assert!(plan.interior.iter().all(|b| !b.is_empty() && b.len() <= bs));
        let mut all: Vec<usize> = plan.interior.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn strips_cover_domain_with_exact_overlap(
        count in 1usize..7,
        frac in 0.0f64..0.999,
        pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 50),
    ) {
        let domain = Rect::new(0.0, std::f64::consts::PI, 0.0, 1.0).unwrap();
        let width = std::f64::consts::PI / count as f64;
        let overlap = if count == 1 { 0.0 } else { frac * 2.0 * width };
        let d = decompose_strips(domain, count, overlap).unwrap();
        prop_assert_eq!(d.len(), count);
        let rects: Vec<Rect> = d.subdomains.iter().map(|s| match s.region {
            Region::Rectangle(r) => r,
            _ => unreachable!("strips are rectangles"),
        }).collect();
        prop_assert_eq!(rects[0].x0, domain.x0);
        prop_assert_eq!(rects[count - 1].x1, domain.x1);
        for w in rects.windows(2) {
            prop_assert!(((w[0].x1 - w[1].x0) - overlap).abs() <= 4.0 * f64::EPSILON * domain.x1);
        }
        for (u, v) in pts {
            let p = [domain.x0 + u * (domain.x1 - domain.x0), v];
            prop_assert!(rects.iter().any(|r| r.contains(p)));
            prop_assert!(rects[d.owner_of(p)].contains(p));
        }
    }

    #[test]
    fn relative_error_is_scale_invariant(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40),
        k in -20i32..20,
        c in 1e-3f64..1e3,
    ) {
        let (h, s): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(s.iter().any(|v| *v != 0.0));
        let e = relative_l2_error(&h, &s).unwrap();
        // powers of two scale every operation exactly
        let p = 2f64.powi(k);
        let scale = |v: &[f64], c: f64| v.iter().map(|x| c * x).collect::<Vec<_>>();
        prop_assert_eq!(relative_l2_error(&scale(&h, p), &scale(&s, p)).unwrap(), e);
        let ec = relative_l2_error(&scale(&h, c), &scale(&s, c)).unwrap();
        prop_assert!((ec - e).abs() <= 1e-13 * e.max(1e-300) + 1e-300);
    }

    #[test]
    fn relative_error_scales_with_the_deviation(
        pairs in prop::collection::vec((-1e3f64..1e3, -1.0f64..1.0), 1..40),
        c in -1e3f64..1e3,
    ) {
        let (s, dev): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(s.iter().any(|v| *v != 0.0));
        let h: Vec<f64> = s.iter().zip(&dev).map(|(u, d)| u + d).collect();
        let hc: Vec<f64> = s.iter().zip(&h).map(|(u, v)| u + c * (v - u)).collect();
        let e = relative_l2_error(&h, &s).unwrap();
        let ec = relative_l2_error(&hc, &s).unwrap();
        // the deviations are formed in floating point, so equality holds to rounding
        prop_assert!((ec - c.abs() * e).abs() <= 1e-9 * c.abs() * e + 1e-12, "{ec} vs {}", c.abs() * e);
    }

    #[test]
    fn analytic_factor_decreases_from_one(a in 0.0f64..5.0, b in 0.0f64..5.0) {
        prop_assert_eq!(analytic_factor(0.0, std::f64::consts::PI), 1.0);
        prop_assume!(a < b);
        prop_assert!(analytic_factor(a, std::f64::consts::PI) > analytic_factor(b, std::f64::consts::PI));
    }

    #[test]
    fn observed_rate_recovers_geometric_ratio(e0 in 1e-6f64..1e2, r in 0.01f64..1.5, len in 3usize..30, lead in 0.1f64..10.0) {
        let mut hist: Vec<f64> = (0..len).map(|i| e0 * r.powi(i as i32)).collect();
        prop_assert!((observed_rate(&hist).unwrap() - r).abs() <= 1e-12 * r);
        // the first ratio is excluded from the estimate
        hist[0] *= lead;
        prop_assert!((observed_rate(&hist).unwrap() - r).abs() <= 1e-12 * r);
    }

    #[test]
    fn config_round_trips(
        interface: bool,
        alpha in 1e-3f64..1e3,
        strips in 1usize..6,
        frac in 0.0f64..0.99,
        layers in 1usize..6,
        units in 1usize..200,
        counts in (1usize..20_000, 1usize..500, 1usize..500, 1usize..512),
        lr in (1e-6f64..1.0, 1e-3f64..=1.0, 1u64..1000),
        tols in (1e-9f64..1.0, 1e-9f64..1.0, 1e-9f64..1.0),
        caps in (1usize..500, 1usize..100_000, 1usize..100_000, 1usize..100),
        seed: u64,
        single: bool,
        out in "[a-z0-9_/]{1,12}",
    ) {
        let (subdomains, overlap) = if interface {
            (2, 0.0)
        } else {
            (strips, if strips == 1 { 0.0 } else { frac * 2.0 * std::f64::consts::PI / strips as f64 })
        };
        let cfg = ExperimentConfig {
            problem: if interface { ProblemName::Interface } else { ProblemName::Model },
            alpha,
            subdomains,
            overlap,
            layers,
            units,
            n_f: counts.0,
            n_g_per_edge: counts.1,
            n_gamma: counts.2,
            batch_size: counts.3,
            lr0: lr.0,
            decay_base: lr.1,
            decay_every: lr.2,
            tol_loss: tols.0,
            eta: caps.0,
            max_epochs: caps.1,
            max_epochs_single: caps.2,
            tol_gamma: tols.1,
            tol_omega: tols.2,
            max_outer: caps.3,
            seed,
            output: out.into(),
            threads: if single { Threads::Single } else { Threads::PerSubdomain },
        };
        cfg.validate().unwrap();
        let text = cfg.serialize();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn report_csv_round_trips(
        header in prop::collection::vec("[ -~]{0,30}", 0..5),
        rows in prop::collection::vec(
            (0usize..100, 0usize..8, 0usize..100_000, prop::array::uniform6(any::<f64>().prop_filter("finite", |v| v.is_finite()))),
            0..20,
        ),
        status in "[a-z-]{1,20}",
        rate in prop::option::of(any::<f64>().prop_filter("finite", |v| v.is_finite())),
        rho in prop::option::of(0.0f64..1.0),
    ) {
        let report = RunReport {
            header,
            rows: rows.into_iter().map(|(i, s, e, v)| ReportRow {
                outer_iter: i,
                subdomain: s,
                epochs: e,
                final_loss: v[0],
                interface_rel_change: v[1],
                interior_rel_change: v[2],
                rel_l2_error: v[3],
                lr: v[4],
                wall_ms: v[5],
            }).collect(),
            status,
            observed_rate: rate,
            analytic_rho: rho,
        };
        let back = RunReport::from_csv(&report.to_csv(), Path::new("mem")).unwrap();
        prop_assert_eq!(back, report);
    }

    #[test]
    fn checkpoint_round_trips(dims in prop::collection::vec(1usize..8, 1..4), seed: u64, iteration in 0usize..1000) {
        let mut full = vec![2];
        full.extend(dims);
        full.push(1);
        let nets: Vec<MlpNetwork> = (0..3).map(|k| MlpNetwork::new(&full, seed.wrapping_add(k)).unwrap()).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        write_checkpoint(&path, iteration, &nets).unwrap();
        let (it, back) = read_checkpoint(&path).unwrap();
        prop_assert_eq!(it, iteration);
        prop_assert_eq!(back, nets);
    }
}

fn tiny(extra: &[(&str, &str)]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        layers: 2,
        units: 6,
        n_f: 200,
        n_g_per_edge: 10,
        n_gamma: 10,
        max_epochs: 6,
        max_epochs_single: 6,
        eta: 2,
        max_outer: 3,
        ..Default::default()
    };
    for (k, v) in extra {
        cfg.set(k, v, 0).unwrap();
    }
    cfg.validate().unwrap();
    cfg
}

/// Everything a run produced except wall-clock times.
fn fingerprint(r: &DdmResult) -> impl PartialEq + std::fmt::Debug {
    let mut records = r.state.records.clone();
    records.iter_mut().for_each(|rec| rec.wall_ms = 0.0);
    (r.networks(), r.state.snapshots.clone(), records, r.status)
}

#[test]
fn one_subdomain_outer_loop_equals_single_domain_solver() {
    for seed in 0..3 {
        let cfg = tiny(&[
            ("subdomains", "1"),
            ("overlap", "0"),
            ("seed", &seed.to_string()),
        ]);
        let ddm = solve_ddm(&cfg).unwrap();
        let single = solve_single(&cfg).unwrap();
        assert_eq!(ddm.outer_iterations(), 1);
        assert_eq!(fingerprint(&ddm), fingerprint(&single), "seed {seed}");
    }
}

#[test]
fn parallel_and_sequential_runs_are_bit_identical() {
    for (problem, s, overlap) in [
        ("model", "2", "0.3"),
        ("model", "4", "0.2"),
        ("interface", "2", "0"),
    ] {
        let seq = tiny(&[
            ("problem", problem),
            ("subdomains", s),
            ("overlap", overlap),
            ("threads", "1"),
        ]);
        let par = ExperimentConfig {
            threads: Threads::PerSubdomain,
            ..seq.clone()
        };
        let a = solve_ddm(&seq).unwrap();
        let b = solve_ddm(&par).unwrap();
        assert_eq!(a.outer_iterations(), b.outer_iterations());
        assert_eq!(fingerprint(&a), fingerprint(&b), "{problem} S={s}");
    }
}
