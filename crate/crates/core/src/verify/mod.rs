//! Analytic oracles: finite-difference derivative checks, manufactured
//! solution audits and geometry invariants.
//!
//! Everything here is independent of the training path: finite differences
//! run on a scalar forward-mode evaluator in double-double arithmetic that
//! shares no code with the batched jet propagation.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    self, decompose_interface, decompose_strips, sample_boundary, sample_interface,
    sample_interior, Decomposition, Disc, Point, Rect, Region, ON_SET_TOL,
};
use crate::net::{
    self, BoundaryBlock, DomainBlock, InterfaceBlock, LossBatch, MlpNetwork, NetJet2,
};
use crate::pde::{
    interface_problem, model_problem, ProblemInstance, TransmissionOp, INTERFACE_CENTER,
    INTERFACE_RADIUS,
};

pub mod dd;
pub mod reference;

use dd::Dd;
use reference::{ref_jet, ref_loss_terms, RefBatch};

/// Central-difference step for input derivatives.
pub const INPUT_FD_STEP: f64 = 1e-6;
/// Central-difference step for parameter derivatives.
pub const PARAM_FD_STEP: f64 = 1e-6;

/// `|analytic - fd| / (|fd| + 1e-12)`
pub fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / (fd.abs() + 1e-12)
}

/// Gradient and Hessian diagonal of `net` at `x` by central differences,
/// evaluated in double-double so roundoff stays far below the truncation
/// error.
pub fn fd_input_jet(net: &MlpNetwork, x: [f64; 2], step: f64) -> NetJet2 {
    let h = Dd::from(step);
    let value = |p: [Dd; 2]| ref_jet(net, p, None).value;
    let xd = [Dd::from(x[0]), Dd::from(x[1])];
    let f0 = value(xd);
    let mut grad_x = Vec::with_capacity(2);
    let mut hess_diag = Vec::with_capacity(2);
    for k in 0..2 {
        let mut xp = xd;
        xp[k] = xd[k] + h;
        let fp = value(xp);
        xp[k] = xd[k] - h;
        let fm = value(xp);
        grad_x.push(((fp - fm) / (Dd::from(2.0) * h)).to_f64());
        hess_diag.push(((fp - Dd::from(2.0) * f0 + fm) / (h * h)).to_f64());
    }
    NetJet2 {
        value: f0.to_f64(),
        grad_x,
        hess_diag,
    }
}

/// `∂term/∂θ_index` of the three loss terms by double-double central
/// differences.
pub fn fd_param_derivative(
    net: &MlpNetwork,
    batch: &RefBatch<'_>,
    index: usize,
    step: f64,
) -> [f64; 3] {
    let h = Dd::from(step);
    let lp = ref_loss_terms(net, batch, Some((index, h)));
    let lm = ref_loss_terms(net, batch, Some((index, -h)));
    let two_h = Dd::from(2.0) * h;
    [
        ((lp[0] - lm[0]) / two_h).to_f64(),
        ((lp[1] - lm[1]) / two_h).to_f64(),
        ((lp[2] - lm[2]) / two_h).to_f64(),
    ]
}

/// Worst relative errors seen by [`derivative_oracles`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DerivativeReport {
    pub cases: usize,
    pub max_grad_x: f64,
    pub max_hess_diag: f64,
    pub max_param_domain: f64,
    pub max_param_boundary: f64,
    pub max_param_interface: f64,
}

impl DerivativeReport {
    pub fn input_ok(&self, tol: f64) -> bool {
        self.max_grad_x < tol && self.max_hess_diag < tol
    }

    pub fn param_ok(&self, tol: f64) -> bool {
        self.max_param_domain < tol
            && self.max_param_boundary < tol
            && self.max_param_interface < tol
    }
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect()
}

/// Compares analytic derivatives with finite differences on `cases` random
/// `(network, point)` pairs drawn from `[2,20,20,1]` networks, and the
/// parameter gradient of each loss term on `param_probes` random parameters
/// per case. Even cases use a Dirichlet interface term, odd cases a flux.
pub fn derivative_oracles(cases: usize, param_probes: usize, seed: u64) -> DerivativeReport {
    const BATCH: usize = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DerivativeReport {
        cases,
        ..Default::default()
    };
    for case in 0..cases {
        let net = MlpNetwork::new(&[2, 20, 20, 1], rng.random()).expect("valid dims");
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let jet = net.input_jet2(&x);
        let fd = fd_input_jet(&net, x, INPUT_FD_STEP);
        for k in 0..2 {
            report.max_grad_x = report.max_grad_x.max(rel_err(jet.grad_x[k], fd.grad_x[k]));
            report.max_hess_diag = report
                .max_hess_diag
                .max(rel_err(jet.hess_diag[k], fd.hess_diag[k]));
        }

        let pts = random_points(&mut rng, BATCH);
        let forcing: Vec<f64> = (0..BATCH).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets: Vec<f64> = (0..BATCH).map(|_| rng.random_range(-1.0..1.0)).collect();
        let normals: Vec<[f64; 2]> = (0..BATCH)
            .map(|i| {
                let t = i as f64 * 0.9;
                [t.cos(), t.sin()]
            })
            .collect();
        let coeff = rng.random_range(0.5..3.0);
        let op = if case % 2 == 0 {
            TransmissionOp::Dirichlet
        } else {
            TransmissionOp::NeumannFlux { coeff }
        };
        let flat_pts = Array2::from_shape_fn((BATCH, 2), |(i, k)| pts[i][k]);
        let flat_normals = Array2::from_shape_fn((BATCH, 2), |(i, k)| normals[i][k]);
        let batch = LossBatch {
            domain: DomainBlock {
                points: flat_pts.view(),
                forcing: &forcing,
                coeff,
            },
            boundary: Some(BoundaryBlock {
                points: flat_pts.view(),
                targets: &targets,
            }),
            interface: Some(InterfaceBlock {
                points: flat_pts.view(),
                normals: flat_normals.view(),
                targets: &targets,
                op,
            }),
        };
        let reference = RefBatch {
            points: &pts,
            forcing: &forcing,
            coeff,
            targets: &targets,
            normals: &normals,
            op,
        };
        let (_, grads) = net::loss_terms_and_grads(&net, &batch).expect("valid batch");
        for _ in 0..param_probes {
            let idx = rng.random_range(0..net.param_count());
            let fd = fd_param_derivative(&net, &reference, idx, PARAM_FD_STEP);
            let errs: Vec<f64> = (0..3).map(|t| rel_err(grads[t].get(idx), fd[t])).collect();
            report.max_param_domain = report.max_param_domain.max(errs[0]);
            report.max_param_boundary = report.max_param_boundary.max(errs[1]);
            report.max_param_interface = report.max_param_interface.max(errs[2]);
        }
    }
    report
}

/// Outcome of one named check: the worst observed value against its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
}

impl Check {
    fn new(name: impl Into<String>, worst: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            worst,
            tol,
        }
    }

    /// Boolean check: `worst` is 0 when it holds, 1 otherwise.
    fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 0.0 } else { 1.0 }, 0.5)
    }

    pub fn passed(&self) -> bool {
        self.worst < self.tol
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {} (worst {:.3e}, bound {:.1e})",
            self.name, self.worst, self.tol
        )
    }
}

/// Derivative-oracle checks with the default case counts.
pub fn derivative_checks(seed: u64) -> Vec<Check> {
    let r = derivative_oracles(100, 20, seed);
    vec![
        Check::new("input gradient vs finite differences", r.max_grad_x, 1e-6),
        Check::new(
            "input Hessian diagonal vs finite differences",
            r.max_hess_diag,
            1e-6,
        ),
        Check::new("domain-loss parameter gradient", r.max_param_domain, 1e-5),
        Check::new(
            "boundary-loss parameter gradient",
            r.max_param_boundary,
            1e-5,
        ),
        Check::new(
            "interface-loss parameter gradient",
            r.max_param_interface,
            1e-5,
        ),
    ]
}

fn model_decomposition() -> Decomposition {
    let (x0, x1, y0, y1) = model_problem().domain_bounds();
    decompose_strips(Rect::new(x0, x1, y0, y1).expect("model domain"), 2, 0.2).expect("two strips")
}

fn interface_decomposition(problem: &ProblemInstance) -> Decomposition {
    let (x0, x1, y0, y1) = problem.domain_bounds();
    let circle = Disc::new(INTERFACE_CENTER, INTERFACE_RADIUS).expect("circle");
    decompose_interface(Rect::new(x0, x1, y0, y1).expect("domain"), circle)
        .expect("interface split")
}

/// Worst `|-a Δu_* - f|` over `n` random points per subdomain, using the
/// closed-form derivatives of the solution branch of each subdomain.
pub fn manufactured_residual(
    problem: &ProblemInstance,
    decomp: &Decomposition,
    n: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for sub in &decomp.subdomains {
        for p in sample_interior(&sub.region, n, &mut rng).expect("sampling") {
            let side = problem.material_index(p);
            let jet = problem.exact_branch(side, p);
            let r =
                -problem.coeff(side) * (jet.hess_diag[0] + jet.hess_diag[1]) - problem.forcing(p);
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Worst `|[u_*]|` and `|[a ∂u_*/∂n]|` over `n` equally spaced circle points.
pub fn interface_jumps(problem: &ProblemInstance, n: usize) -> (f64, f64) {
    let (mut ju, mut jf) = (0.0f64, 0.0f64);
    for k in 0..n {
        let theta = std::f64::consts::TAU * k as f64 / n as f64;
        let normal = [theta.cos(), theta.sin()];
        let p = [
            INTERFACE_CENTER[0] + INTERFACE_RADIUS * normal[0],
            INTERFACE_CENTER[1] + INTERFACE_RADIUS * normal[1],
        ];
        let inner = problem.exact_branch(0, p);
        let outer = problem.exact_branch(1, p);
        let flux =
            |side: usize, g: [f64; 2]| problem.coeff(side) * (g[0] * normal[0] + g[1] * normal[1]);
        ju = ju.max((inner.value - outer.value).abs());
        jf = jf.max((flux(0, inner.grad) - flux(1, outer.grad)).abs());
    }
    (ju, jf)
}

/// Worst `|g - u_*|` over `n` random points of the outer boundary.
pub fn boundary_mismatch(
    problem: &ProblemInstance,
    decomp: &Decomposition,
    n: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let whole = decompose_strips(decomp.domain, 1, 0.0).expect("whole domain");
    let per_edge = n.div_ceil(4);
    sample_boundary(&whole.subdomains[0], per_edge, &mut rng)
        .into_iter()
        .map(|p| (problem.boundary(p) - problem.exact(p)).abs())
        .fold(0.0, f64::max)
}

/// Manufactured-solution, interface-condition and boundary audits for the
/// model problem and the interface problem at `alpha ∈ {1, 2, 20}`.
pub fn manufactured_checks(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let model = model_problem();
    let strips = model_decomposition();
    checks.push(Check::new(
        "model: |-Δu - f| at 1000 points per subdomain",
        manufactured_residual(&model, &strips, 1000, seed),
        1e-10,
    ));
    checks.push(Check::new(
        "model: g = u on 1000 boundary points",
        boundary_mismatch(&model, &strips, 1000, seed + 1),
        f64::MIN_POSITIVE,
    ));
    for alpha in [1.0, 2.0, 20.0] {
        let problem = interface_problem(alpha).expect("positive alpha");
        let decomp = interface_decomposition(&problem);
        checks.push(Check::new(
            format!("interface alpha={alpha}: |-aΔu - f| at 1000 points per subdomain"),
            manufactured_residual(&problem, &decomp, 1000, seed + 2),
            1e-10,
        ));
        let (ju, jf) = interface_jumps(&problem, 360);
        checks.push(Check::new(
            format!("interface alpha={alpha}: |[u]| at 360 circle points"),
            ju,
            1e-12,
        ));
        checks.push(Check::new(
            format!("interface alpha={alpha}: |[a du/dn]| at 360 circle points"),
            jf,
            1e-12,
        ));
        checks.push(Check::new(
            format!("interface alpha={alpha}: g = u on 1000 boundary points"),
            boundary_mismatch(&problem, &decomp, 1000, seed + 3),
            f64::MIN_POSITIVE,
        ));
    }
    checks
}

/// Largest uncovered fraction: share of `n` random points of the domain not
/// contained in any subdomain (closure taken for the disc split, whose
/// circle belongs to neither open piece).
pub fn coverage_gap(decomp: &Decomposition, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = decomp.domain;
    let missed = (0..n)
        .filter(|_| {
            let p = [
                d.x0 + (d.x1 - d.x0) * rng.random::<f64>(),
                d.y0 + (d.y1 - d.y0) * rng.random::<f64>(),
            ];
            !decomp
                .subdomains
                .iter()
                .any(|s| s.region.contains(p) || on_interface(s, p))
        })
        .count();
    missed as f64 / n as f64
}

fn on_interface(sub: &geometry::Subdomain, p: Point) -> bool {
    sub.interfaces.iter().any(|i| i.contains(p, ON_SET_TOL))
}

/// Worst `|overlap - δ|` over adjacent strip pairs, from the x-extents.
pub fn overlap_width_error(decomp: &Decomposition) -> f64 {
    let extents: Vec<(f64, f64)> = decomp
        .subdomains
        .iter()
        .map(|s| match s.region {
            Region::Rectangle(r) => (r.x0, r.x1),
            _ => (f64::NAN, f64::NAN),
        })
        .collect();
    extents
        .windows(2)
        .map(|w| {
            let overlap = (w[0].1.min(w[1].1) - w[1].0.max(w[0].0)).max(0.0);
            (overlap - decomp.overlap).abs()
        })
        .fold(0.0, f64::max)
}

/// Counts sampled points that violate their membership or on-set predicate,
/// plus interface normals off unit length.
pub fn sampling_violations(decomp: &Decomposition, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for sub in &decomp.subdomains {
        let interior = sample_interior(&sub.region, 500, &mut rng).expect("sampling");
        bad += interior
            .iter()
            .filter(|p| !sub.region.contains(**p))
            .count();
        let boundary = sample_boundary(sub, 50, &mut rng);
        bad += boundary
            .iter()
            .filter(|p| !sub.outer_edges.iter().any(|e| e.contains(**p, ON_SET_TOL)))
            .count();
        for itf in &sub.interfaces {
            for q in sample_interface(itf, 100, &mut rng) {
                let len = q.normal[0].hypot(q.normal[1]);
                if !itf.contains(q.point, ON_SET_TOL) || (len - 1.0).abs() >= 1e-12 {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Coverage, overlap-width, sampling and determinism checks over the strip
/// decompositions used in the experiments and the disc split.
pub fn geometry_checks(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let (x0, x1, y0, y1) = model_problem().domain_bounds();
    let model = Rect::new(x0, x1, y0, y1).expect("model domain");
    let mut decomps = Vec::new();
    for count in [1, 2, 4] {
        for overlap in [0.0, 0.05, 0.2, 0.4, 0.8] {
            if count == 1 && overlap > 0.0 {
                continue;
            }
            decomps.push((
                format!("strips S={count} delta={overlap}"),
                decompose_strips(model, count, overlap).expect("strips"),
            ));
        }
    }
    let interface = interface_problem(2.0).expect("alpha");
    decomps.push((
        "disc split".to_string(),
        interface_decomposition(&interface),
    ));
    for (name, decomp) in &decomps {
        checks.push(Check::new(
            format!("{name}: coverage of 10000 points"),
            coverage_gap(decomp, 10_000, seed),
            f64::MIN_POSITIVE,
        ));
        if decomp.subdomains.len() > 1
            && matches!(decomp.subdomains[0].region, Region::Rectangle(_))
        {
            checks.push(Check::new(
                format!("{name}: overlap width"),
                overlap_width_error(decomp),
                1e-12,
            ));
        }
        checks.push(Check::holds(
            format!("{name}: sampled points on their sets"),
            sampling_violations(decomp, seed) == 0,
        ));
    }
    let strips = model_decomposition();
    let draw = || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_interior(&strips.subdomains[1].region, 100, &mut rng).expect("sampling")
    };
    checks.push(Check::holds(
        "sampling is deterministic under a fixed seed",
        draw() == draw(),
    ));
    checks
}

/// Every analytic check run by the `verify` command.
pub fn all_checks(seed: u64) -> Vec<Check> {
    let mut checks = derivative_checks(seed);
    checks.extend(manufactured_checks(seed));
    checks.extend(geometry_checks(seed));
    checks
}
