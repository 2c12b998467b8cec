//! Gegenbauer (ultraspherical) polynomials evaluated as ratios
//! `C_ℓ^α(w) / C_ℓ^α(1)`.
//!
//! Raw values overflow quickly: for `n ≈ 200` (α ≈ 99) `C_ℓ^α(1)` leaves
//! double range by ℓ ≈ 10. The ratio stays in `[-1, 1]` and obeys
//!
//! ```text
//! (ℓ + 2α - 1) r_ℓ = 2(ℓ + α - 1) w r_{ℓ-1} - (ℓ - 1) r_{ℓ-2},
//! ```
//!
//! which is the standard three-term recurrence divided through by
//! `C_ℓ^α(1) = Γ(ℓ+2α) / (Γ(2α) Γ(ℓ+1))`. The logarithm of `C_ℓ^α(1)` is
//! accumulated from the exact step factor `(ℓ + 2α - 1)/ℓ`.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Hard cap on the degree of any Gegenbauer sequence.
pub const MAX_DEGREE: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GegenbauerEval {
    pub degree: usize,
    pub order: f64,
    /// `C_ℓ^α(w) / C_ℓ^α(1)`
    pub ratio: f64,
    /// `log C_ℓ^α(1)`
    pub log_value_at_one: f64,
}

impl GegenbauerEval {
    /// `C_ℓ^α(w)`; may overflow for large order and degree.
    pub fn value(&self) -> f64 {
        self.ratio * self.log_value_at_one.exp()
    }
}

/// Incremental evaluator, one degree per call to [`Iterator::next`].
#[derive(Debug, Clone)]
pub struct GegenbauerSeq {
    order: f64,
    w: f64,
    next_degree: usize,
    prev: f64,
    prev2: f64,
    log_at_one: f64,
}

impl GegenbauerSeq {
    pub fn new(order: f64, w: f64) -> Result<Self> {
        if !(order > 0.0) || !order.is_finite() {
            return Err(Error::InvalidOrder(order));
        }
        if !(w.abs() <= 1.0) {
            return Err(Error::InvalidArgument(format!("|w| must be at most 1, got {w}")));
        }
        Ok(Self { order, w, next_degree: 0, prev: 1.0, prev2: 0.0, log_at_one: 0.0 })
    }
}

impl Iterator for GegenbauerSeq {
    type Item = GegenbauerEval;

    fn next(&mut self) -> Option<GegenbauerEval> {
        let l = self.next_degree;
        if l > MAX_DEGREE {
            return None;
        }
        let a = self.order;
        let lf = l as f64;
        let ratio = match l {
            0 => 1.0,
            1 => self.w,
            _ => (2.0 * (lf + a - 1.0) * self.w * self.prev - (lf - 1.0) * self.prev2) / (lf + 2.0 * a - 1.0),
        };
        if l > 0 {
            self.log_at_one += ((2.0 * a - 1.0) / lf).ln_1p();
        }
        // endpoint values are exact by symmetry
        let ratio = if self.w == 1.0 {
            1.0
        } else if self.w == -1.0 {
            if l.is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        } else {
            ratio
        };
        self.prev2 = self.prev;
        self.prev = ratio;
        self.next_degree += 1;
        Some(GegenbauerEval { degree: l, order: a, ratio, log_value_at_one: self.log_at_one })
    }
}

/// Normalized values for `ℓ = 0..=l_max`.
pub fn eval_normalized_sequence(order: f64, w: f64, l_max: usize) -> Result<Vec<GegenbauerEval>> {
    if l_max > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!("degree {l_max} exceeds the cap {MAX_DEGREE}")));
    }
    Ok(GegenbauerSeq::new(order, w)?.take(l_max + 1).collect())
}

/// `log C_ℓ^α(1)` through log-gamma.
pub fn log_value_at_one(l: usize, order: f64) -> f64 {
    ln_gamma(l as f64 + 2.0 * order) - ln_gamma(2.0 * order) - ln_gamma(l as f64 + 1.0)
}

/// `log Γ(a+b) - log Γ(a) - log Γ(b+1)`, i.e. the log of a generalized
/// binomial coefficient.
fn log_binom(a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b + 1.0)
}

/// The Lemma-3 majorant `M_ℓ = c + |b - c|` of `|C_ℓ^{(n-2)/2}(w)|` on `[-1, 1]`,
/// with `b = C_ℓ(1)` and `c = Γ((ℓ+n-2)/2)/(Γ((n-2)/2) Γ(ℓ/2+1))`.
pub fn bound_m(l: usize, n: usize) -> Result<f64> {
    Ok(log_bound_m(l, n)?.exp())
}

/// Natural log of [`bound_m`], finite where `M_ℓ` itself overflows.
pub fn log_bound_m(l: usize, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::DimensionTooSmall { n, min: 3 });
    }
    if l == 0 {
        return Ok(0.0);
    }
    let nm2 = (n - 2) as f64;
    let lf = l as f64;
    let log_b = log_binom(nm2, lf);
    let log_c = log_binom(nm2 / 2.0, lf / 2.0);
    // c + |b - c| = max(b, 2c - b)
    if log_b >= log_c {
        Ok(log_b)
    } else {
        // 2c - b = c (2 - b/c)
        Ok(log_c + (2.0 - (log_b - log_c).exp()).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Unnormalized three-term recurrence; only usable where nothing overflows.
    fn raw(order: f64, w: f64, l_max: usize) -> Vec<f64> {
        let mut out = vec![1.0, 2.0 * order * w];
        for l in 2..=l_max {
            let lf = l as f64;
            let v = (2.0 * (lf + order - 1.0) * w * out[l - 1] - (lf + 2.0 * order - 2.0) * out[l - 2]) / lf;
            out.push(v);
        }
        out.truncate(l_max + 1);
        out
    }

    #[test]
    fn degree_zero_is_one() {
        for &(a, w) in &[(0.5, 0.3), (2.0, -0.9), (49.0, 0.0)] {
            let s = eval_normalized_sequence(a, w, 0).unwrap();
            assert_eq!(s[0].ratio, 1.0);
            assert_eq!(s[0].log_value_at_one, 0.0);
        }
    }

    #[test]
    fn degree_one() {
        // C_1^2(w) = 2·2·w, C_1^2(1) = 4
        let s = eval_normalized_sequence(2.0, 0.5, 1).unwrap();
        assert_relative_eq!(s[1].value(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(s[1].ratio, 0.5, max_relative = 1e-15);
        assert_relative_eq!(s[1].log_value_at_one, 4f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn degree_two_at_one() {
        // Γ(4)/(Γ(2)Γ(3)) = 3 and C_2^1(w) = 4w² - 1
        let s = eval_normalized_sequence(1.0, 1.0, 2).unwrap();
        assert_eq!(s[2].ratio, 1.0);
        assert_relative_eq!(s[2].log_value_at_one, 3f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(raw(1.0, 1.0, 2)[2], 3.0);
        assert_relative_eq!(log_value_at_one(2, 1.0), 3f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn accumulated_log_matches_log_gamma() {
        for &a in &[0.5, 1.5, 4.0, 49.0, 99.0] {
            let s = eval_normalized_sequence(a, 0.2, 400).unwrap();
            for e in s.iter().step_by(37) {
                let reference = log_value_at_one(e.degree, a);
                assert!((e.log_value_at_one - reference).abs() <= 1e-11 * reference.abs().max(1.0));
            }
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(eval_normalized_sequence(0.0, 0.1, 3), Err(Error::InvalidOrder(_))));
        assert!(matches!(eval_normalized_sequence(-1.0, 0.1, 3), Err(Error::InvalidOrder(_))));
        assert!(matches!(eval_normalized_sequence(1.0, 1.5, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(eval_normalized_sequence(1.0, 0.5, MAX_DEGREE + 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(bound_m(2, 2), Err(Error::DimensionTooSmall { .. })));
    }

    #[test]
    fn bound_m_examples() {
        assert_eq!(bound_m(0, 7).unwrap(), 1.0);
        // n = 4: b = Γ(3)/(Γ(2)Γ(2)) = 2, c = Γ(1.5)/(Γ(1)Γ(1.5)) = 1
        assert_relative_eq!(bound_m(1, 4).unwrap(), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn bound_m_asymptotics() {
        // M_ℓ ~ ℓ^{n-3}/(n-3)! at n = 5
        let l = 10_000usize;
        let ratio = bound_m(l, 5).unwrap() / ((l as f64).powi(2) / 2.0);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn bound_m_dominates_polynomials() {
        for &n in &[3usize, 10, 100] {
            let a = (n as f64 - 2.0) / 2.0;
            for k in 0..=40 {
                let w = -1.0 + 2.0 * k as f64 / 40.0;
                for e in eval_normalized_sequence(a, w, 100).unwrap() {
                    let log_abs = e.ratio.abs().ln() + e.log_value_at_one;
                    let log_m = log_bound_m(e.degree, n).unwrap();
                    assert!(e.ratio == 0.0 || log_abs <= log_m + 1e-9, "n={n} l={} w={w}", e.degree);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn matches_raw_recurrence(a in 0.1f64..6.0, w in -1.0f64..1.0, l_max in 0usize..50) {
            let s = eval_normalized_sequence(a, w, l_max).unwrap();
            let r = raw(a, w, l_max);
            let scale: Vec<f64> = (0..=l_max).map(|l| log_value_at_one(l, a).exp()).collect();
            for l in 0..=l_max {
                let got = s[l].value();
                // absolute error relative to C_ℓ(1), the natural scale of the recurrence
                prop_assert!((got - r[l]).abs() <= 1e-10 * scale[l], "l={} got={} want={}", l, got, r[l]);
            }
        }

        #[test]
        fn ratio_bounded(a in 0.05f64..120.0, w in -1.0f64..1.0) {
            for e in eval_normalized_sequence(a, w, 200).unwrap() {
                prop_assert!(e.ratio.abs() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn parity_at_minus_one(a in 0.05f64..50.0) {
            for e in eval_normalized_sequence(a, -1.0, 60).unwrap() {
                let want = if e.degree % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert_eq!(e.ratio, want);
            }
            // and the interior recurrence approaches the same limit
            let near = eval_normalized_sequence(a, -1.0 + 1e-13, 30).unwrap();
            for e in near {
                let want = if e.degree % 2 == 0 { 1.0 } else { -1.0 };
                prop_assert!((e.ratio - want).abs() < 1e-8);
            }
        }
    }
}
