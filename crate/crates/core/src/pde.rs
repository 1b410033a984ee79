//! Operators, manufactured solutions and the two benchmark problems.
//!
//! Every subdomain carries a constant diffusion coefficient `a`, so the
//! interior operator is always `-a Δ` and no network ever sees a
//! discontinuous coefficient.

use crate::error::{DdmError, Result};
use crate::geometry::Point;
use crate::net::NetJet2;

/// Which condition a subdomain imposes on its artificial interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmissionKind {
    /// Match the neighbor's trace.
    Dirichlet,
    /// Match the neighbor's normal flux `a ∇u·n`.
    Neumann,
}

/// Interface residual operator as it appears in a loss: the Neumann variant
/// carries the coefficient of the subdomain it is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransmissionOp {
    Dirichlet,
    NeumannFlux { coeff: f64 },
}

/// Operators of one subdomain: `L = -a Δ`, `B = identity` on the outer
/// boundary, `D` as given by `transmission`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpec {
    pub coeff: f64,
    pub transmission: TransmissionKind,
}

impl OperatorSpec {
    /// Plain `-Δ` with Dirichlet transmission.
    pub fn laplacian() -> Self {
        OperatorSpec {
            coeff: 1.0,
            transmission: TransmissionKind::Dirichlet,
        }
    }

    pub fn scaled(coeff: f64, transmission: TransmissionKind) -> Result<Self> {
        if !(coeff > 0.0 && coeff.is_finite()) {
            return Err(DdmError::config(format!(
                "diffusion coefficient must be positive, got {coeff}"
            )));
        }
        Ok(OperatorSpec {
            coeff,
            transmission,
        })
    }

    pub fn transmission_op(&self) -> TransmissionOp {
        match self.transmission {
            TransmissionKind::Dirichlet => TransmissionOp::Dirichlet,
            TransmissionKind::Neumann => TransmissionOp::NeumannFlux { coeff: self.coeff },
        }
    }

    /// `-a (h_xx + h_yy) - f`
    pub fn domain_residual(&self, jet: &NetJet2, f_val: f64) -> f64 {
        -self.coeff * jet.laplacian() - f_val
    }

    /// `h` for Dirichlet, `a ∇h·n` for Neumann.
    pub fn transmission_value(&self, jet: &NetJet2, normal: [f64; 2]) -> f64 {
        transmission_value(self.transmission_op(), jet, normal)
    }
}

/// Applies a transmission operator to a jet.
pub fn transmission_value(op: TransmissionOp, jet: &NetJet2, normal: [f64; 2]) -> f64 {
    match op {
        TransmissionOp::Dirichlet => jet.value,
        TransmissionOp::NeumannFlux { coeff } => {
            coeff * (jet.grad_x[0] * normal[0] + jet.grad_x[1] * normal[1])
        }
    }
}

/// Closed-form value, gradient and Hessian diagonal of an exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess_diag: [f64; 2],
}

/// Center and radius of the material interface in the diffusion problem.
pub const INTERFACE_CENTER: Point = [1.0, 1.0];
pub const INTERFACE_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    /// `-Δu = f` on `[0,π]×[0,1]` with `u = sin(2x) e^y`.
    ModelPoisson,
    /// `-∇·(a∇u) = f` on `[0,2]²`, `a = 1` inside the disc, `α` outside.
    InterfaceDiffusion { alpha: f64 },
}

/// A benchmark problem with its manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
}

/// `u = sin(2x) e^y`, `f = 3 sin(2x) e^y`, Dirichlet data `g = u` on the
/// boundary.
pub fn model_problem() -> ProblemInstance {
    ProblemInstance {
        kind: ProblemKind::ModelPoisson,
    }
}

/// Circular-interface diffusion problem with coefficient contrast `alpha`.
pub fn interface_problem(alpha: f64) -> Result<ProblemInstance> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(DdmError::config(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(ProblemInstance {
        kind: ProblemKind::InterfaceDiffusion { alpha },
    })
}

fn radius_sq(p: Point) -> f64 {
    let dx = p[0] - INTERFACE_CENTER[0];
    let dy = p[1] - INTERFACE_CENTER[1];
    dx * dx + dy * dy
}

impl ProblemInstance {
    /// Global computational rectangle `(x0, x1, y0, y1)`.
    pub fn domain_bounds(&self) -> (f64, f64, f64, f64) {
        match self.kind {
            ProblemKind::ModelPoisson => (0.0, std::f64::consts::PI, 0.0, 1.0),
            ProblemKind::InterfaceDiffusion { .. } => (0.0, 2.0, 0.0, 2.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::ModelPoisson => "model",
            ProblemKind::InterfaceDiffusion { .. } => "interface",
        }
    }

    /// Index of the material subdomain containing `p`: the closed disc
    /// belongs to subdomain 0. Always 0 for the model problem.
    pub fn material_index(&self, p: Point) -> usize {
        match self.kind {
            ProblemKind::ModelPoisson => 0,
            ProblemKind::InterfaceDiffusion { .. } => {
                usize::from(radius_sq(p) > INTERFACE_RADIUS * INTERFACE_RADIUS)
            }
        }
    }

    /// Closed-form jet of the solution branch that lives on material
    /// subdomain `side` (0 = disc, 1 = exterior), evaluated anywhere.
    pub fn exact_branch(&self, side: usize, p: Point) -> ExactJet {
        match self.kind {
            ProblemKind::ModelPoisson => {
                let (s, c) = (2.0 * p[0]).sin_cos();
                let e = p[1].exp();
                ExactJet {
                    value: s * e,
                    grad: [2.0 * c * e, s * e],
                    hess_diag: [-4.0 * s * e, s * e],
                }
            }
            ProblemKind::InterfaceDiffusion { alpha } => {
                let dx = p[0] - INTERFACE_CENTER[0];
                let dy = p[1] - INTERFACE_CENTER[1];
                let r2 = dx * dx + dy * dy;
                let scale = if side == 0 { alpha } else { 1.0 };
                let shift = if side == 0 {
                    -0.25 * (alpha - 1.0)
                } else {
                    0.0
                };
                ExactJet {
                    value: scale * r2 + shift,
                    grad: [2.0 * scale * dx, 2.0 * scale * dy],
                    hess_diag: [2.0 * scale, 2.0 * scale],
                }
            }
        }
    }

    /// Exact solution `u_*`.
    pub fn exact(&self, p: Point) -> f64 {
        self.exact_branch(self.material_index(p), p).value
    }

    /// Diffusion coefficient on material subdomain `side`.
    pub fn coeff(&self, side: usize) -> f64 {
        match self.kind {
            ProblemKind::ModelPoisson => 1.0,
            ProblemKind::InterfaceDiffusion { alpha } => {
                if side == 0 {
                    1.0
                } else {
                    alpha
                }
            }
        }
    }

    /// Right-hand side `f`.
    pub fn forcing(&self, p: Point) -> f64 {
        match self.kind {
            ProblemKind::ModelPoisson => 3.0 * (2.0 * p[0]).sin() * p[1].exp(),
            ProblemKind::InterfaceDiffusion { alpha } => -4.0 * alpha,
        }
    }

    /// Dirichlet data `g` on the outer boundary.
    pub fn boundary(&self, p: Point) -> f64 {
        match self.kind {
            ProblemKind::ModelPoisson => (2.0 * p[0]).sin() * p[1].exp(),
            ProblemKind::InterfaceDiffusion { .. } => radius_sq(p),
        }
    }

    /// Operators of subdomain `index` of this problem's decomposition.
    pub fn operator(&self, index: usize) -> OperatorSpec {
        match self.kind {
            ProblemKind::ModelPoisson => OperatorSpec::laplacian(),
            ProblemKind::InterfaceDiffusion { alpha } => {
                if index == 0 {
                    OperatorSpec {
                        coeff: 1.0,
                        transmission: TransmissionKind::Dirichlet,
                    }
                } else {
                    OperatorSpec {
                        coeff: alpha,
                        transmission: TransmissionKind::Neumann,
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_4};

    #[test]
    fn model_values() {
        let p = model_problem();
        assert!((p.exact([FRAC_PI_4, 0.0]) - 1.0).abs() < 1e-15);
        assert!((p.forcing([FRAC_PI_4, 0.0]) - 3.0).abs() < 1e-15);
        assert!((p.boundary([FRAC_PI_4, 1.0]) - E).abs() < 1e-12);
    }

    #[test]
    fn interface_branches_agree_on_circle() {
        for alpha in [2.0, 20.0] {
            let p = interface_problem(alpha).unwrap();
            let q = [1.5, 1.0];
            let inner = p.exact_branch(0, q);
            let outer = p.exact_branch(1, q);
            assert!((inner.value - 0.25).abs() < 1e-15);
            assert!((outer.value - 0.25).abs() < 1e-15);
            // a ∂u/∂n with n = (1, 0)
            assert!((1.0 * inner.grad[0] - alpha).abs() < 1e-12);
            assert!((alpha * outer.grad[0] - alpha).abs() < 1e-12);
            assert_eq!(p.forcing([0.3, 0.7]), -4.0 * alpha);
        }
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        assert!(interface_problem(0.0).is_err());
        assert!(interface_problem(-1.0).is_err());
        assert!(OperatorSpec::scaled(0.0, TransmissionKind::Neumann).is_err());
    }

    #[test]
    fn alpha_one_is_smooth() {
        let p = interface_problem(1.0).unwrap();
        for q in [[0.2, 0.3], [1.1, 0.9], [1.9, 1.9]] {
            let r2 = (q[0] - 1.0f64).powi(2) + (q[1] - 1.0f64).powi(2);
            assert!((p.exact(q) - r2).abs() < 1e-15);
            assert_eq!(p.coeff(p.material_index(q)), 1.0);
        }
    }

    fn jet(value: f64, grad: [f64; 2], hess: [f64; 2]) -> NetJet2 {
        NetJet2 {
            value,
            grad_x: grad.to_vec(),
            hess_diag: hess.to_vec(),
        }
    }

    #[test]
    fn residual_formulas() {
        let lap = OperatorSpec::laplacian();
        assert_eq!(
            lap.domain_residual(&jet(1.0, [3.0, 4.0], [0.0, 0.0]), 0.0),
            0.0
        );
        assert_eq!(
            lap.domain_residual(&jet(0.0, [0.0, 0.0], [1.0, 1.0]), 0.0),
            -2.0
        );
        assert_eq!(
            lap.transmission_value(&jet(0.25, [1.0, 1.0], [0.0; 2]), [1.0, 0.0]),
            0.25
        );

        let alpha = 20.0;
        let neumann = OperatorSpec::scaled(1.0, TransmissionKind::Neumann).unwrap();
        let j = jet(0.25, [2.0 * alpha * 0.5, 0.0], [0.0; 2]);
        assert!((neumann.transmission_value(&j, [1.0, 0.0]) - alpha).abs() < 1e-12);
        let orth = jet(0.0, [0.0, 5.0], [0.0; 2]);
        assert_eq!(neumann.transmission_value(&orth, [1.0, 0.0]), 0.0);
    }
}
