//! Scalar forward-mode reference for the network jet and the loss terms,
//! generic over the floating type so it can run in double-double.

use super::dd::Real;
use crate::net::MlpNetwork;
use crate::pde::TransmissionOp;

/// Value, gradient and Hessian diagonal at one point.
#[derive(Debug, Clone, Copy)]
pub struct RefJet<T> {
    pub value: T,
    pub grad: [T; 2],
    pub hess: [T; 2],
}

/// Evaluates the network at `x` with parameter `shift.0` moved by `shift.1`.
pub fn ref_jet<T: Real>(net: &MlpNetwork, x: [T; 2], shift: Option<(usize, T)>) -> RefJet<T> {
    let zero = T::of(0.0);
    let mut a: Vec<T> = x.to_vec();
    let mut g: Vec<[T; 2]> = vec![[T::of(1.0), zero], [zero, T::of(1.0)]];
    let mut h: Vec<[T; 2]> = vec![[zero; 2]; 2];
    let mut offset = 0;
    let last = net.num_layers() - 1;
    for (l, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
        let (rows, cols) = w.dim();
        let param = |idx: usize, base: f64| -> T {
            match shift {
                Some((s, d)) if s == idx => T::of(base) + d,
                _ => T::of(base),
            }
        };
        let mut na = Vec::with_capacity(rows);
        let mut ng = Vec::with_capacity(rows);
        let mut nh = Vec::with_capacity(rows);
        for i in 0..rows {
            let mut z = param(offset + rows * cols + i, b[i]);
            let mut zg = [zero; 2];
            let mut zh = [zero; 2];
            for j in 0..cols {
                let wij = param(offset + i * cols + j, w[[i, j]]);
                z = z + wij * a[j];
                for k in 0..2 {
                    zg[k] = zg[k] + wij * g[j][k];
                    zh[k] = zh[k] + wij * h[j][k];
                }
            }
            if l == last {
                na.push(z);
                ng.push(zg);
                nh.push(zh);
            } else {
                let s = z.tanh();
                let s1 = T::of(1.0) - s * s;
                let s2 = T::of(-2.0) * s * s1;
                na.push(s);
                ng.push([s1 * zg[0], s1 * zg[1]]);
                nh.push([
                    s2 * zg[0] * zg[0] + s1 * zh[0],
                    s2 * zg[1] * zg[1] + s1 * zh[1],
                ]);
            }
        }
        offset += rows * cols + rows;
        a = na;
        g = ng;
        h = nh;
    }
    RefJet {
        value: a[0],
        grad: g[0],
        hess: h[0],
    }
}

/// Inputs of one reference loss evaluation, all in f64.
pub struct RefBatch<'a> {
    pub points: &'a [[f64; 2]],
    pub forcing: &'a [f64],
    pub coeff: f64,
    pub targets: &'a [f64],
    pub normals: &'a [[f64; 2]],
    pub op: TransmissionOp,
}

/// Domain, boundary and interface loss terms, with the boundary and
/// interface sets both placed at `points`.
pub fn ref_loss_terms<T: Real>(
    net: &MlpNetwork,
    batch: &RefBatch<'_>,
    shift: Option<(usize, T)>,
) -> [T; 3] {
    let n = T::of(batch.points.len() as f64);
    let mut sums = [T::of(0.0); 3];
    for (i, p) in batch.points.iter().enumerate() {
        let jet = ref_jet(net, [T::of(p[0]), T::of(p[1])], shift);
        let coeff = T::of(batch.coeff);
        let r_dom = T::of(0.0) - coeff * (jet.hess[0] + jet.hess[1]) - T::of(batch.forcing[i]);
        let r_bnd = jet.value - T::of(batch.targets[i]);
        let r_itf = match batch.op {
            TransmissionOp::Dirichlet => jet.value - T::of(batch.targets[i]),
            TransmissionOp::NeumannFlux { coeff } => {
                let nrm = batch.normals[i];
                T::of(coeff) * (jet.grad[0] * T::of(nrm[0]) + jet.grad[1] * T::of(nrm[1]))
                    - T::of(batch.targets[i])
            }
        };
        sums[0] = sums[0] + r_dom * r_dom;
        sums[1] = sums[1] + r_bnd * r_bnd;
        sums[2] = sums[2] + r_itf * r_itf;
    }
    [sums[0] / n, sums[1] / n, sums[2] / n]
}
