//! Double-double arithmetic (about 32 significant digits), enough to make
//! finite differences limited by truncation rather than by f64 roundoff.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn scale_pow2(self, e: i32) -> Dd {
        let f = 2f64.powi(e);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    /// `e^x - 1`, accurate for small `x`.
    pub fn exp_m1(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::from(k)).scale_pow2(-10);
        // Taylor series of e^r - 1, |r| < 2^-10 · ln2 / 2
        let mut term = r;
        let mut sum = r;
        for n in 2..=14 {
            term = term * r / Dd::from(n as f64);
            sum = sum + term;
        }
        // e^{2r} - 1 = s (s + 2)
        for _ in 0..10 {
            sum = sum * (sum + Dd::from(2.0));
        }
        if k == 0.0 {
            sum
        } else {
            (sum + Dd::ONE).scale_pow2(k as i32) - Dd::ONE
        }
    }

    pub fn tanh(self) -> Dd {
        // tanh|x| = -s / (s + 2) with s = e^{-2|x|} - 1, which cannot overflow
        let neg = self.hi < 0.0;
        let a = if neg { -self } else { self };
        let s = (Dd::from(-2.0) * a).exp_m1();
        let t = -(s / (s + Dd::from(2.0)));
        if neg {
            -t
        } else {
            t
        }
    }
}

impl From<f64> for Dd {
    fn from(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

/// Scalar type the reference evaluator is generic over.
pub trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn of(v: f64) -> Self;
    fn tanh(self) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for Dd {
    fn of(v: f64) -> Self {
        Dd::from(v)
    }
    fn tanh(self) -> Self {
        Dd::tanh(self)
    }
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_is_extended() {
        // 1/3 * 3 - 1 vanishes far below f64 epsilon
        let third = Dd::ONE / Dd::from(3.0);
        let back = third * Dd::from(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31);
        // (1 + 2^-60) - 1 survives
        let tiny = (Dd::ONE + Dd::from(2f64.powi(-60))) - Dd::ONE;
        assert_eq!(tiny.to_f64(), 2f64.powi(-60));
    }

    #[test]
    fn tanh_matches_f64() {
        for &z in &[-25.0, -3.0, -0.5, -1e-9, 0.0, 1e-9, 0.5, 0.7, 2.0, 25.0] {
            let t = Dd::from(z).tanh().to_f64();
            assert!(
                (t - f64::tanh(z)).abs() <= 2e-16 * (1.0 + z.abs()),
                "z={z}: {t}"
            );
        }
        // tanh(0.5) to more digits than f64 carries
        let t = Dd::from(0.5).tanh();
        let reference = Dd {
            hi: 0.46211715726000974,
            lo: 0.0,
        };
        assert!((t - reference).to_f64().abs() < 1e-16);
    }

    #[test]
    fn exp_identity() {
        // e^{a+b} = e^a e^b in double-double precision
        let a = Dd::from(0.3);
        let b = Dd::from(1.7);
        let lhs = (a + b).exp_m1() + Dd::ONE;
        let rhs = (a.exp_m1() + Dd::ONE) * (b.exp_m1() + Dd::ONE);
        assert!(((lhs - rhs) / lhs).to_f64().abs() < 1e-29);
    }
}
