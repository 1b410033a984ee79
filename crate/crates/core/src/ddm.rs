//! The outer Schwarz loop: every subdomain network is trained to a loss
//! plateau against the current interface targets, then all targets are
//! refreshed from the neighbors' networks at once (Jacobi exchange), and the
//! loop stops when the interface data or the interior solutions stop moving.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ProblemName, Threads};
use crate::error::{DdmError, Result};
use crate::geometry::{
    decompose_interface, decompose_strips, sample_boundary, sample_interface, sample_interior,
    test_grid, CollocationSet, Decomposition, Disc, InterfacePoint, Point, Rect, Subdomain,
};
use crate::metrics::{analytic_factor, observed_rate, relative_l2_error, ReportRow, RunReport};
use crate::net::{
    self, BoundaryBlock, DomainBlock, InterfaceBlock, LossBatch, LossTerms, MlpNetwork,
};
use crate::optim::{make_minibatches, AdamState, LrSchedule};
use crate::pde::{
    transmission_value, OperatorSpec, ProblemInstance, INTERFACE_CENTER, INTERFACE_RADIUS,
};

/// Points per axis of the evaluation grid.
pub const TEST_GRID_N: usize = 200;

/// Interior points per chunk when evaluating the full-data loss.
const EVAL_CHUNK: usize = 512;

/// Inner and outer stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    /// Plateau threshold on the relative change of the full-data loss.
    pub tol_loss: f64,
    /// Lookback of the plateau test, in epochs.
    pub eta: usize,
    pub max_epochs: usize,
    pub tol_gamma: f64,
    pub tol_omega: f64,
    pub max_outer: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            tol_loss: 5e-3,
            eta: 100,
            max_epochs: 10_000,
            tol_gamma: 1e-2,
            tol_omega: 1e-2,
            max_outer: 30,
        }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_loss, self.tol_gamma, self.tol_omega];
        if tols.iter().any(|t| t.is_nan() || *t <= 0.0) {
            return Err(DdmError::config("tolerances must be positive"));
        }
        if self.eta == 0 || self.max_epochs == 0 || self.max_outer == 0 {
            return Err(DdmError::config(
                "eta, max_epochs and max_outer must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Minibatch size and learning-rate schedule of the inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub schedule: LrSchedule,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            batch_size: 64,
            schedule: LrSchedule::default(),
        }
    }
}

/// Random streams of one subdomain; all derive from the master seed.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Interior = 0,
    Boundary = 1,
    Interface = 2,
    Init = 3,
    Shuffle = 4,
}

fn stream(seed: u64, subdomain: usize, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(subdomain as u64 * 8 + which as u64);
    rng
}

/// One subproblem: its collocation data, operators, interface targets `W_s`,
/// network and optimizer state.
#[derive(Debug, Clone)]
pub struct SubdomainProblem {
    pub index: usize,
    pub subdomain: Subdomain,
    pub op: OperatorSpec,
    pub interior: Array2<f64>,
    pub forcing: Vec<f64>,
    pub boundary: Array2<f64>,
    pub boundary_targets: Vec<f64>,
    pub interface: Array2<f64>,
    pub normals: Array2<f64>,
    /// Neighbor supplying the target of each interface point.
    pub interface_neighbor: Vec<usize>,
    /// Current targets `W_s`, one per interface point.
    pub targets: Vec<f64>,
    /// Outer iteration whose networks produced `targets`.
    pub targets_from: usize,
    pub net: MlpNetwork,
    pub adam: AdamState,
    shuffle: ChaCha8Rng,
}

fn to_array(points: &[Point]) -> Array2<f64> {
    Array2::from_shape_fn((points.len(), 2), |(i, k)| points[i][k])
}

fn rows(a: &Array2<f64>) -> Vec<Point> {
    a.outer_iter().map(|r| [r[0], r[1]]).collect()
}

impl SubdomainProblem {
    fn batch<'a>(
        &'a self,
        interior: ndarray::ArrayView2<'a, f64>,
        forcing: &'a [f64],
    ) -> LossBatch<'a> {
        LossBatch {
            domain: DomainBlock {
                points: interior,
                forcing,
                coeff: self.op.coeff,
            },
            boundary: (self.boundary.nrows() > 0).then(|| BoundaryBlock {
                points: self.boundary.view(),
                targets: &self.boundary_targets,
            }),
            interface: (self.interface.nrows() > 0).then(|| InterfaceBlock {
                points: self.interface.view(),
                normals: self.normals.view(),
                targets: &self.targets,
                op: self.op.transmission_op(),
            }),
        }
    }

    /// Objective on all collocation points, evaluated in chunks.
    pub fn full_loss(&self) -> Result<LossTerms> {
        let n = self.interior.nrows();
        let mut total = LossTerms::default();
        let mut start = 0;
        while start < n {
            let end = (start + EVAL_CHUNK).min(n);
            let chunk = self.interior.slice(ndarray::s![start..end, ..]);
            let mut batch = self.batch(chunk, &self.forcing[start..end]);
            if start > 0 {
                batch.boundary = None;
                batch.interface = None;
            }
            let t = net::loss_terms(&self.net, &batch)?;
            total.domain += t.domain * (end - start) as f64 / n as f64;
            if start == 0 {
                total.boundary = t.boundary;
                total.interface = t.interface;
            }
            start = end;
        }
        if n == 0 {
            return Err(DdmError::EmptyBatch);
        }
        Ok(total)
    }

    /// Network values on the interior collocation points.
    pub fn interior_values(&self) -> Vec<f64> {
        self.net.forward_batch(self.interior.view())
    }

    /// Collocation points in geometry form.
    pub fn collocation(&self) -> CollocationSet {
        let interface = rows(&self.interface)
            .into_iter()
            .zip(rows(&self.normals))
            .map(|(point, normal)| InterfacePoint { point, normal })
            .collect();
        CollocationSet {
            interior: rows(&self.interior),
            boundary: rows(&self.boundary),
            interface,
            interface_neighbor: self.interface_neighbor.clone(),
        }
    }
}

/// Result of one inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub epochs: usize,
    pub final_loss: f64,
    /// Full-data loss before training, then after every epoch.
    pub history: Vec<f64>,
    /// Learning rate of the last update.
    pub final_lr: f64,
}

/// Trains `sub.net` in place, starting from its current parameters, until
/// the full-data loss changes by less than `tol_loss` (relative) over `eta`
/// epochs or `max_epochs` is reached. The optimizer state and the
/// learning-rate schedule restart with every call.
pub fn train_subproblem(
    sub: &mut SubdomainProblem,
    stop: &StopCriteria,
    settings: &TrainSettings,
    max_epochs: usize,
) -> Result<InnerOutcome> {
    let diverged = |epoch: usize, msg: String| DdmError::Divergence {
        subdomain: sub.index,
        epoch,
        msg,
    };
    sub.adam = AdamState::new(&sub.net);
    let first = sub.full_loss()?.total();
    if !first.is_finite() {
        return Err(diverged(0, format!("initial loss is {first}")));
    }
    let mut history = vec![first];
    let n = sub.interior.nrows();
    let mut t = 0u64;
    let mut lr = settings.schedule.lr_at(0);
    let mut forcing = Vec::with_capacity(settings.batch_size);
    for epoch in 1..=max_epochs {
        let plan = make_minibatches(n, settings.batch_size, &mut sub.shuffle)?;
        for idx in &plan.interior {
            let points = Array2::from_shape_fn((idx.len(), 2), |(i, k)| sub.interior[[idx[i], k]]);
            forcing.clear();
            forcing.extend(idx.iter().map(|&i| sub.forcing[i]));
            let batch = sub.batch(points.view(), &forcing);
            let (loss, grad) = net::loss_value_and_grad(&sub.net, &batch)?;
            if !loss.is_finite() || !grad.is_finite() {
                return Err(diverged(epoch, format!("minibatch loss is {loss}")));
            }
            lr = settings.schedule.lr_at(t);
            sub.adam.step(&mut sub.net, &grad, lr)?;
            t += 1;
        }
        let m = sub.full_loss()?.total();
        if !m.is_finite() {
            return Err(diverged(epoch, format!("full-data loss is {m}")));
        }
        history.push(m);
        if epoch >= stop.eta && plateaued(&history, stop.eta, stop.tol_loss) {
            break;
        }
    }
    Ok(InnerOutcome {
        epochs: history.len() - 1,
        final_loss: *history.last().expect("non-empty"),
        history,
        final_lr: lr,
    })
}

/// `|M_j - M_{j-η}| / |M_j| < tol` for the last entry `M_j`.
pub fn plateaued(history: &[f64], eta: usize, tol: f64) -> bool {
    let j = history.len() - 1;
    if j < eta {
        return false;
    }
    let (now, then) = (history[j], history[j - eta]);
    if now == 0.0 {
        return then == 0.0;
    }
    ((now - then) / now).abs() < tol
}

/// `‖new - old‖ / ‖new‖` in the discrete 2-norm; the absolute change when
/// `‖new‖ = 0`. Zero for empty vectors.
pub fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff: f64 = new
        .iter()
        .zip(old)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = new.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Interface targets of `sub` computed from the neighbor networks: each
/// point gets the transmission value of its neighbor's network, using the
/// transmission kind of `sub` and the coefficient of the neighbor.
pub fn exchange_targets(
    sub: &SubdomainProblem,
    nets: &[MlpNetwork],
    ops: &[OperatorSpec],
) -> Vec<f64> {
    let mut targets = vec![0.0; sub.interface.nrows()];
    let mut neighbors: Vec<usize> = sub.interface_neighbor.clone();
    neighbors.sort_unstable();
    neighbors.dedup();
    for r in neighbors {
        let idx: Vec<usize> = (0..targets.len())
            .filter(|&i| sub.interface_neighbor[i] == r)
            .collect();
        let pts = Array2::from_shape_fn((idx.len(), 2), |(i, k)| sub.interface[[idx[i], k]]);
        let op = OperatorSpec {
            coeff: ops[r].coeff,
            transmission: sub.op.transmission,
        }
        .transmission_op();
        for (jet, &i) in nets[r].jets(pts.view()).iter().zip(&idx) {
            let normal = [sub.normals[[i, 0]], sub.normals[[i, 1]]];
            targets[i] = transmission_value(op, jet, normal);
        }
    }
    targets
}

/// Outcome of the outer stop test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterDecision {
    Continue,
    StopInterface,
    StopInterior,
    StopMaxIter,
}

/// Stop test after outer iteration `iteration` given the per-subdomain
/// relative changes of the interface targets and interior values.
pub fn check_outer_stop(
    iteration: usize,
    interface_changes: &[f64],
    interior_changes: &[f64],
    stop: &StopCriteria,
) -> OuterDecision {
    if interface_changes.iter().all(|c| *c < stop.tol_gamma) {
        OuterDecision::StopInterface
    } else if interior_changes.iter().all(|c| *c < stop.tol_omega) {
        OuterDecision::StopInterior
    } else if iteration >= stop.max_outer {
        OuterDecision::StopMaxIter
    } else {
        OuterDecision::Continue
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    ConvergedInterface,
    ConvergedInterior,
    MaxOuter,
}

impl RunStatus {
    pub fn converged(self) -> bool {
        self != RunStatus::MaxOuter
    }

    pub fn label(self) -> &'static str {
        match self {
            RunStatus::ConvergedInterface => "converged-interface",
            RunStatus::ConvergedInterior => "converged-interior",
            RunStatus::MaxOuter => "max-outer",
        }
    }
}

/// Per-subdomain record of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainRecord {
    pub epochs: usize,
    pub final_loss: f64,
    pub final_lr: f64,
    pub interface_rel_change: f64,
    pub interior_rel_change: f64,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub iteration: usize,
    pub subdomains: Vec<SubdomainRecord>,
    pub rel_l2_error: f64,
    pub wall_ms: f64,
}

/// State of one subdomain after an outer iteration (iteration 0 is the
/// initialization). Never modified once recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub network: MlpNetwork,
    /// `W_s` computed from the networks of this iteration.
    pub interface_values: Vec<f64>,
    pub interior_values: Vec<f64>,
}

/// Bookkeeping of the outer loop.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DdmState {
    pub iteration: usize,
    /// `snapshots[i][s]`.
    pub snapshots: Vec<Vec<Snapshot>>,
    pub records: Vec<OuterRecord>,
}

impl DdmState {
    fn push_snapshot(&mut self, problems: &[SubdomainProblem], interface_values: Vec<Vec<f64>>) {
        let snaps = problems
            .iter()
            .zip(interface_values)
            .map(|(p, w)| Snapshot {
                iteration: self.iteration,
                network: p.net.clone(),
                interface_values: w,
                interior_values: p.interior_values(),
            })
            .collect();
        self.snapshots.push(snaps);
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct DdmResult {
    pub problem: ProblemInstance,
    pub decomposition: Decomposition,
    pub problems: Vec<SubdomainProblem>,
    pub state: DdmState,
    pub status: RunStatus,
}

impl DdmResult {
    pub fn networks(&self) -> Vec<MlpNetwork> {
        self.problems.iter().map(|p| p.net.clone()).collect()
    }

    pub fn outer_iterations(&self) -> usize {
        self.state.records.len()
    }

    pub fn final_error(&self) -> f64 {
        self.state
            .records
            .last()
            .map_or(f64::NAN, |r| r.rel_l2_error)
    }

    pub fn error_history(&self) -> Vec<f64> {
        self.state.records.iter().map(|r| r.rel_l2_error).collect()
    }

    /// Geometric-mean contraction of the error history, when long enough.
    pub fn observed_rate(&self) -> Option<f64> {
        observed_rate(&self.error_history()).ok()
    }

    /// `e^{-π δ}` for overlapping strips of the model problem.
    pub fn analytic_rho(&self) -> Option<f64> {
        match self.problem.name() {
            "model" if self.decomposition.len() > 1 => Some(analytic_factor(
                self.decomposition.overlap,
                std::f64::consts::PI,
            )),
            _ => None,
        }
    }

    /// CSV report: config echo and point counts in the header, one row per
    /// subdomain and outer iteration.
    pub fn report(&self, cfg: &ExperimentConfig) -> RunReport {
        let mut header: Vec<String> = cfg.serialize().lines().map(str::to_string).collect();
        for p in &self.problems {
            header.push(format!(
                "subdomain {}: n_f = {}, n_g = {}, n_gamma = {}",
                p.index,
                p.interior.nrows(),
                p.boundary.nrows(),
                p.interface.nrows()
            ));
        }
        let mut rows = Vec::new();
        for rec in &self.state.records {
            for (s, sr) in rec.subdomains.iter().enumerate() {
                rows.push(ReportRow {
                    outer_iter: rec.iteration,
                    subdomain: s,
                    epochs: sr.epochs,
                    final_loss: sr.final_loss,
                    interface_rel_change: sr.interface_rel_change,
                    interior_rel_change: sr.interior_rel_change,
                    rel_l2_error: rec.rel_l2_error,
                    lr: sr.final_lr,
                    wall_ms: rec.wall_ms,
                });
            }
        }
        RunReport {
            header,
            rows,
            status: self.status.label().to_string(),
            observed_rate: self.observed_rate(),
            analytic_rho: self.analytic_rho(),
        }
    }
}

/// Network of the subdomain whose core cell contains `x`.
pub fn stitch_solution(nets: &[MlpNetwork], decomposition: &Decomposition, x: Point) -> f64 {
    nets[decomposition.owner_of(x)].forward(&x)
}

/// [`stitch_solution`] at many points, batched per subdomain.
pub fn stitch_batch(
    nets: &[MlpNetwork],
    decomposition: &Decomposition,
    points: &[Point],
) -> Vec<f64> {
    let owners: Vec<usize> = points.iter().map(|p| decomposition.owner_of(*p)).collect();
    let mut out = vec![0.0; points.len()];
    for (s, net) in nets.iter().enumerate() {
        let idx: Vec<usize> = (0..points.len()).filter(|&i| owners[i] == s).collect();
        if idx.is_empty() {
            continue;
        }
        let pts = Array2::from_shape_fn((idx.len(), 2), |(i, k)| points[idx[i]][k]);
        for (v, &i) in net.forward_batch(pts.view()).into_iter().zip(&idx) {
            out[i] = v;
        }
    }
    out
}

/// Relative L2 error of the stitched solution on the evaluation grid.
pub struct ErrorProbe {
    points: Vec<Point>,
    exact: Vec<f64>,
}

impl ErrorProbe {
    pub fn new(problem: &ProblemInstance, n_per_axis: usize) -> Result<Self> {
        let (x0, x1, y0, y1) = problem.domain_bounds();
        let points = test_grid(&Rect::new(x0, x1, y0, y1)?, n_per_axis)?;
        let exact = points.iter().map(|p| problem.exact(*p)).collect();
        Ok(ErrorProbe { points, exact })
    }

    pub fn error(&self, nets: &[MlpNetwork], decomposition: &Decomposition) -> Result<f64> {
        relative_l2_error(
            &stitch_batch(nets, decomposition, &self.points),
            &self.exact,
        )
    }
}

/// Decomposition of the configured problem: `subdomains` strips for the
/// model problem, the disc split for the interface problem.
pub fn build_decomposition(cfg: &ExperimentConfig) -> Result<Decomposition> {
    let problem = cfg.problem_instance()?;
    let (x0, x1, y0, y1) = problem.domain_bounds();
    let domain = Rect::new(x0, x1, y0, y1)?;
    match cfg.problem {
        ProblemName::Model => decompose_strips(domain, cfg.subdomains, cfg.overlap),
        ProblemName::Interface => {
            decompose_interface(domain, Disc::new(INTERFACE_CENTER, INTERFACE_RADIUS)?)
        }
    }
}

/// Interior points per subdomain: an equal split for strips, proportional to
/// area for the disc split. Sums to `n_f`.
pub fn interior_budget(cfg: &ExperimentConfig, decomposition: &Decomposition) -> Vec<usize> {
    let s = decomposition.len();
    match cfg.problem {
        ProblemName::Model => (0..s)
            .map(|i| cfg.n_f / s + usize::from(i < cfg.n_f % s))
            .collect(),
        ProblemName::Interface => {
            let total = decomposition.domain.area();
            let mut out: Vec<usize> = decomposition.subdomains[..s - 1]
                .iter()
                .map(|sub| ((cfg.n_f as f64 * sub.region.area() / total).round() as usize).max(1))
                .collect();
            let used: usize = out.iter().sum();
            out.push(cfg.n_f.saturating_sub(used).max(1));
            out
        }
    }
}

/// Samples collocation points and initializes networks for every subdomain.
/// Interface targets start from the freshly initialized neighbor networks.
pub fn build_subproblems(
    cfg: &ExperimentConfig,
    decomposition: &Decomposition,
) -> Result<Vec<SubdomainProblem>> {
    let problem = cfg.problem_instance()?;
    let budget = interior_budget(cfg, decomposition);
    let dims = cfg.network_dims();
    let shared_interface = cfg.problem == ProblemName::Interface;
    let mut shared: Option<Vec<InterfacePoint>> = None;
    let mut problems = Vec::with_capacity(decomposition.len());
    for (s, sub) in decomposition.subdomains.iter().enumerate() {
        let interior = sample_interior(
            &sub.region,
            budget[s],
            &mut stream(cfg.seed, s, Stream::Interior),
        )?;
        let boundary = sample_boundary(
            sub,
            cfg.n_g_per_edge,
            &mut stream(cfg.seed, s, Stream::Boundary),
        );
        let mut itf_points = Vec::new();
        let mut neighbor = Vec::new();
        let mut rng = stream(cfg.seed, s, Stream::Interface);
        for itf in &sub.interfaces {
            let pts = if shared_interface {
                shared
                    .get_or_insert_with(|| {
                        sample_interface(
                            itf,
                            cfg.n_gamma,
                            &mut stream(cfg.seed, 0, Stream::Interface),
                        )
                    })
                    .clone()
            } else {
                sample_interface(itf, cfg.n_gamma, &mut rng)
            };
            neighbor.extend(std::iter::repeat_n(itf.neighbor, pts.len()));
            itf_points.extend(pts);
        }
        let seed = stream(cfg.seed, s, Stream::Init).random::<u64>();
        let net = MlpNetwork::new(&dims, seed)?;
        let op = problem.operator(s);
        problems.push(SubdomainProblem {
            index: s,
            subdomain: sub.clone(),
            op,
            forcing: interior.iter().map(|p| problem.forcing(*p)).collect(),
            interior: to_array(&interior),
            boundary_targets: boundary.iter().map(|p| problem.boundary(*p)).collect(),
            boundary: to_array(&boundary),
            interface: Array2::from_shape_fn((itf_points.len(), 2), |(i, k)| {
                itf_points[i].point[k]
            }),
            normals: Array2::from_shape_fn((itf_points.len(), 2), |(i, k)| itf_points[i].normal[k]),
            targets: vec![0.0; neighbor.len()],
            interface_neighbor: neighbor,
            targets_from: 0,
            adam: AdamState::new(&net),
            net,
            shuffle: stream(cfg.seed, s, Stream::Shuffle),
        });
    }
    let nets: Vec<MlpNetwork> = problems.iter().map(|p| p.net.clone()).collect();
    let ops: Vec<OperatorSpec> = problems.iter().map(|p| p.op).collect();
    for p in problems.iter_mut() {
        p.targets = exchange_targets(p, &nets, &ops);
    }
    Ok(problems)
}

/// Extra knobs of a run that are not part of the experiment config.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Directory receiving one parameter checkpoint per outer iteration.
    pub checkpoint_dir: Option<PathBuf>,
}

fn train_all(
    problems: &mut [SubdomainProblem],
    stop: &StopCriteria,
    settings: &TrainSettings,
    max_epochs: usize,
    threads: Threads,
) -> Result<Vec<InnerOutcome>> {
    if threads == Threads::Single || problems.len() == 1 {
        return problems
            .iter_mut()
            .map(|p| train_subproblem(p, stop, settings, max_epochs))
            .collect();
    }
    std::thread::scope(|scope| {
        let workers: Vec<_> = problems
            .iter_mut()
            .map(|p| scope.spawn(move || train_subproblem(p, stop, settings, max_epochs)))
            .collect();
        workers
            .into_iter()
            .map(|w| w.join().expect("subdomain worker panicked"))
            .collect()
    })
}

fn stop_and_settings(cfg: &ExperimentConfig) -> Result<(StopCriteria, TrainSettings)> {
    let stop = StopCriteria {
        tol_loss: cfg.tol_loss,
        eta: cfg.eta,
        max_epochs: cfg.max_epochs,
        tol_gamma: cfg.tol_gamma,
        tol_omega: cfg.tol_omega,
        max_outer: cfg.max_outer,
    };
    stop.validate()?;
    let settings = TrainSettings {
        batch_size: cfg.batch_size,
        schedule: LrSchedule::new(cfg.lr0, cfg.decay_base, cfg.decay_every)?,
    };
    Ok((stop, settings))
}

/// Runs the outer loop. `observer` sees every outer record as it completes.
pub fn solve_ddm_with(
    cfg: &ExperimentConfig,
    options: &SolveOptions,
    observer: &mut dyn FnMut(&OuterRecord),
) -> Result<DdmResult> {
    cfg.validate()?;
    let (stop, settings) = stop_and_settings(cfg)?;
    let problem = cfg.problem_instance()?;
    let decomposition = build_decomposition(cfg)?;
    let mut problems = build_subproblems(cfg, &decomposition)?;
    let probe = ErrorProbe::new(&problem, TEST_GRID_N)?;
    let max_epochs = if decomposition.len() == 1 {
        cfg.max_epochs_single
    } else {
        cfg.max_epochs
    };
    let ops: Vec<OperatorSpec> = problems.iter().map(|p| p.op).collect();

    let mut state = DdmState::default();
    let initial: Vec<Vec<f64>> = problems.iter().map(|p| p.targets.clone()).collect();
    state.push_snapshot(&problems, initial);
    let status = loop {
        let started = Instant::now();
        state.iteration += 1;
        let i = state.iteration;
        for p in &problems {
            debug_assert_eq!(
                p.targets_from,
                i - 1,
                "targets must come from the previous iteration"
            );
        }
        let outcomes = train_all(&mut problems, &stop, &settings, max_epochs, cfg.threads)?;

        // barrier: every subdomain has finished iteration i
        let nets: Vec<MlpNetwork> = problems.iter().map(|p| p.net.clone()).collect();
        let new_targets: Vec<Vec<f64>> = problems
            .iter()
            .map(|p| exchange_targets(p, &nets, &ops))
            .collect();
        state.push_snapshot(&problems, new_targets.clone());
        let (prev, cur) = (&state.snapshots[i - 1], &state.snapshots[i]);
        let interface_changes: Vec<f64> = cur
            .iter()
            .zip(prev)
            .map(|(c, p)| relative_change(&c.interface_values, &p.interface_values))
            .collect();
        let interior_changes: Vec<f64> = cur
            .iter()
            .zip(prev)
            .map(|(c, p)| relative_change(&c.interior_values, &p.interior_values))
            .collect();
        for (p, w) in problems.iter_mut().zip(new_targets) {
            p.targets = w;
            p.targets_from = i;
        }
        let rel_l2_error = probe.error(&nets, &decomposition)?;
        let record = OuterRecord {
            iteration: i,
            subdomains: outcomes
                .into_iter()
                .enumerate()
                .map(|(s, o)| SubdomainRecord {
                    epochs: o.epochs,
                    final_loss: o.final_loss,
                    final_lr: o.final_lr,
                    interface_rel_change: interface_changes[s],
                    interior_rel_change: interior_changes[s],
                    loss_history: o.history,
                })
                .collect(),
            rel_l2_error,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        observer(&record);
        state.records.push(record);
        if let Some(dir) = &options.checkpoint_dir {
            write_checkpoint(&dir.join(format!("outer_{i:04}.ckpt")), i, &nets)?;
        }
        match check_outer_stop(i, &interface_changes, &interior_changes, &stop) {
            OuterDecision::Continue => {}
            OuterDecision::StopInterface => break RunStatus::ConvergedInterface,
            OuterDecision::StopInterior => break RunStatus::ConvergedInterior,
            OuterDecision::StopMaxIter => break RunStatus::MaxOuter,
        }
    };
    Ok(DdmResult {
        problem,
        decomposition,
        problems,
        state,
        status,
    })
}

pub fn solve_ddm(cfg: &ExperimentConfig) -> Result<DdmResult> {
    solve_ddm_with(cfg, &SolveOptions::default(), &mut |_| {})
}

/// Plain PINN on the whole domain: one network, no interface term, trained
/// once with the `max_epochs_single` cap. Ignores `subdomains` and `overlap`.
pub fn solve_single(cfg: &ExperimentConfig) -> Result<DdmResult> {
    let cfg = ExperimentConfig {
        subdomains: 1,
        overlap: 0.0,
        ..cfg.clone()
    };
    if cfg.problem == ProblemName::Interface {
        return Err(DdmError::config(
            "the single-domain solver handles the model problem only",
        ));
    }
    cfg.validate()?;
    let (stop, settings) = stop_and_settings(&cfg)?;
    let problem = cfg.problem_instance()?;
    let decomposition = build_decomposition(&cfg)?;
    let mut problems = build_subproblems(&cfg, &decomposition)?;
    let started = Instant::now();
    let mut state = DdmState::default();
    state.push_snapshot(&problems, vec![Vec::new()]);
    let outcome = train_subproblem(&mut problems[0], &stop, &settings, cfg.max_epochs_single)?;
    state.iteration = 1;
    state.push_snapshot(&problems, vec![Vec::new()]);
    let nets = [problems[0].net.clone()];
    let rel_l2_error = ErrorProbe::new(&problem, TEST_GRID_N)?.error(&nets, &decomposition)?;
    let interior_rel_change = relative_change(
        &state.snapshots[1][0].interior_values,
        &state.snapshots[0][0].interior_values,
    );
    state.records.push(OuterRecord {
        iteration: 1,
        subdomains: vec![SubdomainRecord {
            epochs: outcome.epochs,
            final_loss: outcome.final_loss,
            final_lr: outcome.final_lr,
            interface_rel_change: 0.0,
            interior_rel_change,
            loss_history: outcome.history,
        }],
        rel_l2_error,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    });
    Ok(DdmResult {
        problem,
        decomposition,
        problems,
        state,
        status: RunStatus::ConvergedInterface,
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"DDMCKPT1";

/// Binary checkpoint: magic, iteration and network count as little-endian
/// u64, then per network its layer count, dims, and for every layer the
/// weights (row-major) followed by the biases as little-endian f64.
pub fn write_checkpoint(path: &Path, iteration: usize, nets: &[MlpNetwork]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(iteration as u64).to_le_bytes());
    buf.extend_from_slice(&(nets.len() as u64).to_le_bytes());
    for net in nets {
        buf.extend_from_slice(&(net.dims().len() as u64).to_le_bytes());
        for d in net.dims() {
            buf.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        for (w, b) in net.weights().iter().zip(net.biases()) {
            for v in w.iter().chain(b.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| DdmError::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| DdmError::io(path, e))?;
    f.write_all(&buf).map_err(|e| DdmError::io(path, e))
}

/// Inverse of [`write_checkpoint`].
pub fn read_checkpoint(path: &Path) -> Result<(usize, Vec<MlpNetwork>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| DdmError::io(path, e))?;
    let bad = |msg: &str| DdmError::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut pos = 0;
    let take8 = |pos: &mut usize| -> Result<[u8; 8]> {
        let chunk = bytes.get(*pos..*pos + 8).ok_or_else(|| bad("truncated"))?;
        *pos += 8;
        Ok(chunk.try_into().expect("8 bytes"))
    };
    if &take8(&mut pos)? != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let read_u64 = |pos: &mut usize| take8(pos).map(|b| u64::from_le_bytes(b) as usize);
    let iteration = read_u64(&mut pos)?;
    let count = read_u64(&mut pos)?;
    let mut nets = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let n_dims = read_u64(&mut pos)?;
        if n_dims > 1024 {
            return Err(bad("implausible layer count"));
        }
        let dims = (0..n_dims)
            .map(|_| read_u64(&mut pos))
            .collect::<Result<Vec<_>>>()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let mut vals = |n: usize| -> Result<Vec<f64>> {
                (0..n)
                    .map(|_| read_u64(&mut pos).map(|u| f64::from_bits(u as u64)))
                    .collect()
            };
            let w = vals(pair[0] * pair[1])?;
            let b = vals(pair[1])?;
            weights.push(
                Array2::from_shape_vec((pair[1], pair[0]), w).map_err(|_| bad("weight shape"))?,
            );
            biases.push(Array1::from(b));
        }
        nets.push(MlpNetwork::from_parts(&dims, weights, biases)?);
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((iteration, nets))
}
