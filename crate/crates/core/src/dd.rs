//! Double-double arithmetic (about 31 significant digits) for sums with heavy
//! cancellation.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

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

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    /// Exact multiplication by a power of two.
    pub fn ldexp(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd { hi: self.hi * f, lo: self.lo * f }
    }

    /// `e^{-x}` for `x ≥ 0`: Taylor series on `x / 2^s`, then `s` squarings.
    pub fn exp_neg(x: Dd) -> Dd {
        if x.hi <= 0.0 {
            return Dd::ONE;
        }
        if x.hi > 745.0 {
            return Dd::ZERO;
        }
        let s = ((x.hi / 0.125).log2().ceil().max(0.0)) as i32;
        let r = -x.ldexp(-s);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for k in 1..30 {
            term = (term * r) / Dd::from(k as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-34 * sum.hi.abs() {
                break;
            }
        }
        for _ in 0..s {
            sum = sum * sum;
        }
        sum
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
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
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_roundtrip() {
        let third = Dd::ONE / Dd::from(3.0);
        let back = third.mul_f64(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31);
        assert!((third.hi - 1.0 / 3.0).abs() == 0.0 && third.lo != 0.0);
    }

    #[test]
    fn exp_matches_reference_digits() {
        // e^{-x} for x the double nearest 0.05 is 0.951229424500714006451233297825577930…
        let q = Dd::exp_neg(Dd::from(0.05));
        let want_hi = 0.951_229_424_500_714;
        let err = (q - Dd::from(want_hi)).to_f64() + 9.426_400_457_910_009e-18;
        assert!(err.abs() < 1e-31, "{err:e}");
        // e^{-a} e^{-b} = e^{-(a+b)}
        let lhs = Dd::exp_neg(Dd::from(0.375)) * Dd::exp_neg(Dd::from(1.625));
        let rhs = Dd::exp_neg(Dd::from(2.0));
        let rel = ((lhs - rhs) / rhs).to_f64();
        assert!(rel.abs() < 1e-29, "{rel:e}");
    }
}
