//! Fully-connected tanh networks with exact input derivatives.
//!
//! A network `h(x) = T_{L-1} ∘ σ ∘ ... ∘ σ ∘ T_0 (x)` is evaluated on a batch of
//! points together with its first and second directional derivatives along
//! every input axis. Each layer carries a *jet stack*: a matrix whose rows are
//! grouped in channels of `B` rows each,
//!
//! ```text
//! channel 0            value
//! channels 1..=d0      ∂/∂x_k
//! channels d0+1..=2d0  ∂²/∂x_k²
//! ```
//!
//! so one GEMM per layer pushes all channels through the affine map. Parameter
//! gradients of any loss built from these channels are obtained by running the
//! same recurrences in reverse, which includes the second-order chain through
//! the activation derivatives.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DdmError, Result};
use crate::pde::TransmissionOp;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
}

/// `tanh` over a slice. Uses `tanh|x| = -t / (t + 2)` with
/// `t = e^{-2|x|} - 1`, computed by Cody-Waite reduction and a degree-13
/// Taylor polynomial; branch-free so the loop vectorizes. Agrees with the
/// libm result to a few ulp.
fn tanh_into(z: &[f64], out: &mut [f64]) {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    const C: [f64; 12] = [
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    for (o, &x) in out.iter_mut().zip(z) {
        let y = (-2.0 * x.abs()).max(-40.0);
        let biased = y * std::f64::consts::LOG2_E + SHIFTER;
        let k = biased - SHIFTER;
        let r = (y - k * LN2_HI) - k * LN2_LO;
        let mut p = C[11];
        for &c in C[..11].iter().rev() {
            p = p * r + c;
        }
        let em1 = r + r * r * p;
        let ki = biased.to_bits().wrapping_sub(SHIFTER.to_bits());
        let scale = f64::from_bits(ki.wrapping_add(1023) << 52);
        let t = scale * em1 + (scale - 1.0);
        let th = (-t / (t + 2.0)).copysign(x);
        *o = if x.is_nan() { x } else { th };
    }
}

/// How many derivative channels a jet stack carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetOrder {
    /// Value only.
    Value,
    /// Value and gradient.
    Gradient,
    /// Value, gradient and the diagonal of the Hessian.
    Hessian,
}

impl JetOrder {
    pub fn channels(self, input_dim: usize) -> usize {
        match self {
            JetOrder::Value => 1,
            JetOrder::Gradient => 1 + input_dim,
            JetOrder::Hessian => 1 + 2 * input_dim,
        }
    }
}

/// The surrogate `h(·; θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    activation: Activation,
}

/// Value, gradient and Hessian diagonal of a network at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NetJet2 {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub hess_diag: Vec<f64>,
}

impl NetJet2 {
    /// `Σ_k ∂²h/∂x_k²`
    pub fn laplacian(&self) -> f64 {
        self.hess_diag.iter().sum()
    }
}

/// Gradient of a scalar loss with respect to every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl ParamGradient {
    /// All-zero gradient shaped like `net`.
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        ParamGradient {
            weights: net
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: net
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Entry at a flat parameter index (same ordering as [`MlpNetwork::param`]).
    pub fn get(&self, index: usize) -> f64 {
        let (layer, slot) = locate(&self.weights, &self.biases, index);
        match slot {
            Slot::Weight(r, c) => self.weights[layer][[r, c]],
            Slot::Bias(r) => self.biases[layer][r],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

enum Slot {
    Weight(usize, usize),
    Bias(usize),
}

/// Flat ordering: for each layer, `W_l` row-major followed by `b_l`.
fn locate(weights: &[Array2<f64>], biases: &[Array1<f64>], mut index: usize) -> (usize, Slot) {
    for (layer, (w, b)) in weights.iter().zip(biases).enumerate() {
        if index < w.len() {
            return (layer, Slot::Weight(index / w.ncols(), index % w.ncols()));
        }
        index -= w.len();
        if index < b.len() {
            return (layer, Slot::Bias(index));
        }
        index -= b.len();
    }
    panic!("parameter index out of range");
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(DdmError::config(format!(
            "network needs at least 2 layer dims, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(DdmError::config(format!(
            "layer dims must be positive, got {dims:?}"
        )));
    }
    Ok(())
}

impl MlpNetwork {
    /// Xavier-uniform weights, zero biases. Deterministic in `seed`.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-limit..=limit)
            });
            weights.push(w);
            biases.push(Array1::zeros(fan_out));
        }
        Ok(MlpNetwork {
            dims: dims.to_vec(),
            weights,
            biases,
            activation: Activation::Tanh,
        })
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(MlpNetwork {
            dims: dims.to_vec(),
            weights: dims
                .windows(2)
                .map(|p| Array2::zeros((p[1], p[0])))
                .collect(),
            biases: dims.windows(2).map(|p| Array1::zeros(p[1])).collect(),
            activation: Activation::Tanh,
        })
    }

    /// Builds a network from explicit parameters; shapes must follow `dims`.
    pub fn from_parts(
        dims: &[usize],
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        check_dims(dims)?;
        if weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(DdmError::Shape(format!(
                "expected {} layers, got {} weights and {} biases",
                dims.len() - 1,
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in dims.windows(2).enumerate() {
            if weights[l].dim() != (pair[1], pair[0]) || biases[l].len() != pair[1] {
                return Err(DdmError::Shape(format!(
                    "layer {l}: expected W {}x{} and b {}, got W {:?} and b {}",
                    pair[1],
                    pair[0],
                    pair[1],
                    weights[l].dim(),
                    biases[l].len()
                )));
            }
        }
        let net = MlpNetwork {
            dims: dims.to_vec(),
            weights,
            biases,
            activation: Activation::Tanh,
        };
        if !net.is_finite() {
            return Err(DdmError::Shape("non-finite parameter".into()));
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    /// Mutable access for optimizers. Shapes must not be changed.
    pub fn params_mut(&mut self) -> (&mut [Array2<f64>], &mut [Array1<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    /// `Σ_l (d_{l+1} d_l + d_{l+1})`
    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|p| p[1] * p[0] + p[1]).sum()
    }

    /// Parameter at a flat index: layer by layer, `W_l` row-major then `b_l`.
    pub fn param(&self, index: usize) -> f64 {
        let (layer, slot) = locate(&self.weights, &self.biases, index);
        match slot {
            Slot::Weight(r, c) => self.weights[layer][[r, c]],
            Slot::Bias(r) => self.biases[layer][r],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (layer, slot) = locate(&self.weights, &self.biases, index);
        match slot {
            Slot::Weight(r, c) => self.weights[layer][[r, c]] = value,
            Slot::Bias(r) => self.biases[layer][r] = value,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// `h(x)` at a single point.
    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut a: Vec<f64> = x.to_vec();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = b.to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += w.row(r).iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            if l < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            a = z;
        }
        a[0]
    }

    /// Network values at every row of `points`.
    pub fn forward_batch(&self, points: ArrayView2<'_, f64>) -> Vec<f64> {
        let (out, _) = self.propagate(points, JetOrder::Value, false);
        out.into_raw_vec_and_offset().0
    }

    /// Value, input gradient and Hessian diagonal at one point.
    pub fn input_jet2(&self, x: &[f64]) -> NetJet2 {
        let pts = ArrayView2::from_shape((1, x.len()), x).expect("point shape");
        self.jets(pts).pop().expect("one jet")
    }

    /// [`input_jet2`](Self::input_jet2) for every row of `points`.
    pub fn jets(&self, points: ArrayView2<'_, f64>) -> Vec<NetJet2> {
        let d0 = self.input_dim();
        let b = points.nrows();
        let (out, _) = self.propagate(points, JetOrder::Hessian, false);
        let y = out.as_slice().expect("contiguous output");
        (0..b)
            .map(|i| NetJet2 {
                value: y[i],
                grad_x: (0..d0).map(|k| y[(1 + k) * b + i]).collect(),
                hess_diag: (0..d0).map(|k| y[(1 + d0 + k) * b + i]).collect(),
            })
            .collect()
    }

    /// Runs the jet recurrences through every layer. Returns the output stack
    /// (`channels * B` rows, one column) and, when `keep` is set, the per-layer
    /// state the reverse sweep needs.
    fn propagate(
        &self,
        points: ArrayView2<'_, f64>,
        order: JetOrder,
        keep: bool,
    ) -> (Array2<f64>, Vec<LayerCache>) {
        let d0 = self.input_dim();
        assert_eq!(
            points.ncols(),
            d0,
            "point dimension does not match network input"
        );
        let b = points.nrows();
        let channels = order.channels(d0);

        // Seed: value = x, ∂x/∂x_k = e_k, second derivatives vanish.
        let mut a = Array2::<f64>::zeros((channels * b, d0));
        a.slice_mut(s![0..b, ..]).assign(&points);
        if order >= JetOrder::Gradient {
            for k in 0..d0 {
                a.slice_mut(s![(1 + k) * b..(2 + k) * b, k]).fill(1.0);
            }
        }

        let last = self.weights.len() - 1;
        let mut caches = Vec::with_capacity(if keep { self.weights.len() } else { 0 });
        for (l, (w, bias)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            z.slice_mut(s![0..b, ..])
                .axis_iter_mut(Axis(0))
                .for_each(|mut row| row += bias);
            if l == last {
                if keep {
                    caches.push(LayerCache {
                        input: a,
                        z: Array2::zeros((0, 0)),
                    });
                }
                return (z, caches);
            }
            let next = activate(&z, b, d0, order);
            if keep {
                caches.push(LayerCache { input: a, z });
            }
            a = next;
        }
        unreachable!("network has at least one layer")
    }

    /// Reverse sweep: given the adjoint of the output stack, accumulates the
    /// parameter gradient.
    fn backpropagate(
        &self,
        caches: &[LayerCache],
        seed: Array2<f64>,
        b: usize,
        order: JetOrder,
        grad: &mut ParamGradient,
    ) {
        let d0 = self.input_dim();
        let mut zbar = seed;
        for l in (0..self.weights.len()).rev() {
            let cache = &caches[l];
            grad.weights[l] += &zbar.t().dot(&cache.input);
            grad.biases[l] += &zbar.slice(s![0..b, ..]).sum_axis(Axis(0));
            if l == 0 {
                break;
            }
            let abar = zbar.dot(&self.weights[l]);
            zbar = activate_adjoint(&caches[l - 1].z, &cache.input, &abar, b, d0, order);
        }
    }
}

struct LayerCache {
    /// Input stack of the layer.
    input: Array2<f64>,
    /// Pre-activation stack (empty for the output layer).
    z: Array2<f64>,
}

/// Applies the activation to a pre-activation stack, propagating first and
/// second directional derivatives.
fn activate(z: &Array2<f64>, b: usize, d0: usize, order: JetOrder) -> Array2<f64> {
    let width = z.ncols();
    let block = b * width;
    let zs = z.as_slice().expect("standard layout");
    let mut out = Array2::<f64>::zeros(z.raw_dim());
    let os = out.as_slice_mut().expect("standard layout");

    let (zval, zrest) = zs.split_at(block);
    let (oval, orest) = os.split_at_mut(block);
    tanh_into(zval, oval);
    if order == JetOrder::Value {
        return out;
    }
    for k in 0..d0 {
        let dz = &zrest[k * block..(k + 1) * block];
        let da = &mut orest[k * block..(k + 1) * block];
        for i in 0..block {
            let s = oval[i];
            da[i] = (1.0 - s * s) * dz[i];
        }
    }
    if order == JetOrder::Hessian {
        for k in 0..d0 {
            let dz = &zrest[k * block..(k + 1) * block];
            let d2z = &zrest[(d0 + k) * block..(d0 + k + 1) * block];
            let d2a = &mut orest[(d0 + k) * block..(d0 + k + 1) * block];
            for i in 0..block {
                let s = oval[i];
                let s1 = 1.0 - s * s;
                d2a[i] = -2.0 * s * s1 * dz[i] * dz[i] + s1 * d2z[i];
            }
        }
    }
    out
}

/// Adjoint of [`activate`]: maps the adjoint of the activated stack to the
/// adjoint of the pre-activation stack. `act` is the activated stack, whose
/// value channel supplies `σ(z)`.
fn activate_adjoint(
    z: &Array2<f64>,
    act: &Array2<f64>,
    abar: &Array2<f64>,
    b: usize,
    d0: usize,
    order: JetOrder,
) -> Array2<f64> {
    let block = b * z.ncols();
    let zs = z.as_slice().expect("standard layout");
    let ab = abar.as_slice().expect("standard layout");
    let sv = &act.as_slice().expect("standard layout")[..block];
    let mut zbar = Array2::<f64>::zeros(z.raw_dim());
    let zb = zbar.as_slice_mut().expect("standard layout");

    for i in 0..block {
        zb[i] = ab[i] * (1.0 - sv[i] * sv[i]);
    }
    if order == JetOrder::Value {
        return zbar;
    }
    let (zb_val, zb_rest) = zb.split_at_mut(block);
    for k in 0..d0 {
        let off = (1 + k) * block;
        let dz = &zs[off..off + block];
        let dabar = &ab[off..off + block];
        let dzbar = &mut zb_rest[k * block..(k + 1) * block];
        for i in 0..block {
            let s = sv[i];
            let s1 = 1.0 - s * s;
            let s2 = -2.0 * s * s1;
            zb_val[i] += dabar[i] * dz[i] * s2;
            dzbar[i] = dabar[i] * s1;
        }
    }
    if order == JetOrder::Hessian {
        for k in 0..d0 {
            let off1 = (1 + k) * block;
            let off2 = (1 + d0 + k) * block;
            let dz = &zs[off1..off1 + block];
            let d2z = &zs[off2..off2 + block];
            let d2abar = &ab[off2..off2 + block];
            for i in 0..block {
                let s = sv[i];
                let s1 = 1.0 - s * s;
                let s2 = -2.0 * s * s1;
                let s3 = -2.0 * s1 * s1 + 4.0 * s * s * s1;
                let g = d2abar[i];
                zb_val[i] += g * (s3 * dz[i] * dz[i] + s2 * d2z[i]);
                zb_rest[k * block + i] += 2.0 * g * s2 * dz[i];
                zb_rest[(d0 + k) * block + i] = g * s1;
            }
        }
    }
    zbar
}

/// Interior residual block: `-a Δh - f` at each point.
#[derive(Debug, Clone, Copy)]
pub struct DomainBlock<'a> {
    pub points: ArrayView2<'a, f64>,
    pub forcing: &'a [f64],
    /// Constant diffusion coefficient of the subdomain.
    pub coeff: f64,
}

/// Dirichlet block on the outer boundary: `h - g` at each point.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryBlock<'a> {
    pub points: ArrayView2<'a, f64>,
    pub targets: &'a [f64],
}

/// Interface block: `D(h) - W` at each point.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceBlock<'a> {
    pub points: ArrayView2<'a, f64>,
    pub normals: ArrayView2<'a, f64>,
    pub targets: &'a [f64],
    pub op: TransmissionOp,
}

/// One evaluation of the subproblem objective. Each present term is averaged
/// over its own point count; the terms are summed.
#[derive(Debug, Clone, Copy)]
pub struct LossBatch<'a> {
    pub domain: DomainBlock<'a>,
    pub boundary: Option<BoundaryBlock<'a>>,
    pub interface: Option<InterfaceBlock<'a>>,
}

/// The three summands of the subproblem objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossTerms {
    pub domain: f64,
    pub boundary: f64,
    pub interface: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.domain + self.boundary + self.interface
    }
}

/// Mean squared residual of one block plus the adjoint seed of the output
/// stack.
fn block_residuals(y: &[f64], b: usize, d0: usize, kind: &BlockKind<'_>) -> (f64, Vec<f64>) {
    let n = b as f64;
    let mut seed = vec![0.0; y.len()];
    let mut sum = 0.0;
    match kind {
        BlockKind::Domain { forcing, coeff } => {
            for i in 0..b {
                let lap: f64 = (0..d0).map(|k| y[(1 + d0 + k) * b + i]).sum();
                let r = -coeff * lap - forcing[i];
                sum += r * r;
                for k in 0..d0 {
                    seed[(1 + d0 + k) * b + i] = -2.0 * coeff * r / n;
                }
            }
        }
        BlockKind::Value { targets } => {
            for i in 0..b {
                let r = y[i] - targets[i];
                sum += r * r;
                seed[i] = 2.0 * r / n;
            }
        }
        BlockKind::Flux {
            normals,
            targets,
            coeff,
        } => {
            for i in 0..b {
                let flux: f64 = (0..d0).map(|k| y[(1 + k) * b + i] * normals[[i, k]]).sum();
                let r = coeff * flux - targets[i];
                sum += r * r;
                for k in 0..d0 {
                    seed[(1 + k) * b + i] = 2.0 * r * coeff * normals[[i, k]] / n;
                }
            }
        }
    }
    (sum / n, seed)
}

enum BlockKind<'a> {
    Domain {
        forcing: &'a [f64],
        coeff: f64,
    },
    Value {
        targets: &'a [f64],
    },
    Flux {
        normals: ArrayView2<'a, f64>,
        targets: &'a [f64],
        coeff: f64,
    },
}

impl<'a> LossBatch<'a> {
    fn blocks(&self) -> Vec<(usize, ArrayView2<'a, f64>, JetOrder, BlockKind<'a>)> {
        let mut out = Vec::with_capacity(3);
        out.push((
            0,
            self.domain.points,
            JetOrder::Hessian,
            BlockKind::Domain {
                forcing: self.domain.forcing,
                coeff: self.domain.coeff,
            },
        ));
        if let Some(bd) = self.boundary {
            out.push((
                1,
                bd.points,
                JetOrder::Value,
                BlockKind::Value {
                    targets: bd.targets,
                },
            ));
        }
        if let Some(itf) = self.interface {
            let (order, kind) = match itf.op {
                TransmissionOp::Dirichlet => (
                    JetOrder::Value,
                    BlockKind::Value {
                        targets: itf.targets,
                    },
                ),
                TransmissionOp::NeumannFlux { coeff } => (
                    JetOrder::Gradient,
                    BlockKind::Flux {
                        normals: itf.normals,
                        targets: itf.targets,
                        coeff,
                    },
                ),
            };
            out.push((2, itf.points, order, kind));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.domain.points.nrows() == 0 {
            return Err(DdmError::EmptyBatch);
        }
        if self.domain.forcing.len() != self.domain.points.nrows() {
            return Err(DdmError::Shape(
                "forcing length != interior point count".into(),
            ));
        }
        if let Some(bd) = self.boundary {
            if bd.targets.len() != bd.points.nrows() {
                return Err(DdmError::Shape("boundary target count mismatch".into()));
            }
        }
        if let Some(itf) = self.interface {
            if itf.targets.len() != itf.points.nrows() {
                return Err(DdmError::Shape("interface target count mismatch".into()));
            }
            if matches!(itf.op, TransmissionOp::NeumannFlux { .. })
                && itf.normals.dim() != itf.points.dim()
            {
                return Err(DdmError::Shape("interface normals missing".into()));
            }
        }
        Ok(())
    }
}

/// Objective value split into its three terms.
pub fn loss_terms(net: &MlpNetwork, batch: &LossBatch<'_>) -> Result<LossTerms> {
    batch.validate()?;
    let d0 = net.input_dim();
    let mut terms = LossTerms::default();
    for (slot, points, order, kind) in batch.blocks() {
        let b = points.nrows();
        if b == 0 {
            continue;
        }
        let (out, _) = net.propagate(points, order, false);
        let (loss, _) = block_residuals(out.as_slice().expect("contiguous"), b, d0, &kind);
        match slot {
            0 => terms.domain = loss,
            1 => terms.boundary = loss,
            _ => terms.interface = loss,
        }
    }
    Ok(terms)
}

/// Objective value.
pub fn loss_value(net: &MlpNetwork, batch: &LossBatch<'_>) -> Result<f64> {
    loss_terms(net, batch).map(|t| t.total())
}

/// Objective value and its exact gradient with respect to every parameter.
pub fn loss_value_and_grad(
    net: &MlpNetwork,
    batch: &LossBatch<'_>,
) -> Result<(f64, ParamGradient)> {
    let mut grad = ParamGradient::zeros_like(net);
    let terms = accumulate(net, batch, std::slice::from_mut(&mut grad))?;
    Ok((terms.total(), grad))
}

/// Per-term gradients: `[domain, boundary, interface]`. Absent terms yield
/// zero gradients.
pub fn loss_terms_and_grads(
    net: &MlpNetwork,
    batch: &LossBatch<'_>,
) -> Result<(LossTerms, [ParamGradient; 3])> {
    let mut grads = [
        ParamGradient::zeros_like(net),
        ParamGradient::zeros_like(net),
        ParamGradient::zeros_like(net),
    ];
    let terms = accumulate(net, batch, &mut grads)?;
    Ok((terms, grads))
}

/// Runs every block forward and backward. With one sink all terms share it,
/// otherwise each term has its own.
fn accumulate(
    net: &MlpNetwork,
    batch: &LossBatch<'_>,
    sinks: &mut [ParamGradient],
) -> Result<LossTerms> {
    batch.validate()?;
    let d0 = net.input_dim();
    let mut terms = LossTerms::default();
    for (slot, points, order, kind) in batch.blocks() {
        let b = points.nrows();
        if b == 0 {
            continue;
        }
        let (out, caches) = net.propagate(points, order, true);
        let (loss, seed) = block_residuals(out.as_slice().expect("contiguous"), b, d0, &kind);
        match slot {
            0 => terms.domain = loss,
            1 => terms.boundary = loss,
            _ => terms.interface = loss,
        }
        let seed = Array2::from_shape_vec(out.raw_dim(), seed).expect("seed shape");
        let sink = if sinks.len() == 1 { 0 } else { slot };
        net.backpropagate(&caches, seed, b, order, &mut sinks[sink]);
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_tanh_matches_libm() {
        let xs: Vec<f64> = (-40_000..=40_000)
            .map(|i| i as f64 * 5e-4)
            .chain([
                1e-300,
                -1e-300,
                1e-10,
                0.0,
                -0.0,
                19.0,
                50.0,
                -700.0,
                f64::INFINITY,
            ])
            .collect();
        let mut out = vec![0.0; xs.len()];
        tanh_into(&xs, &mut out);
        for (x, t) in xs.iter().zip(&out) {
            let exact = x.tanh();
            let tol = 4.0 * f64::EPSILON * exact.abs();
            assert!((t - exact).abs() <= tol, "x={x}: {t} vs {exact}");
        }
        let mut nan = [0.0];
        tanh_into(&[f64::NAN], &mut nan);
        assert!(nan[0].is_nan());
    }

    #[test]
    fn batched_jet_matches_scalar_forward() {
        let net = MlpNetwork::new(&[2, 7, 5, 1], 11).unwrap();
        let pts = ndarray::array![[0.1, -0.3], [0.7, 0.2], [-1.5, 2.0]];
        let vals = net.forward_batch(pts.view());
        for (i, v) in vals.iter().enumerate() {
            let x = [pts[[i, 0]], pts[[i, 1]]];
            assert!((v - net.forward(&x)).abs() < 1e-14);
        }
    }
}
