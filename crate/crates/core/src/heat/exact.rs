//! Eigenfunction expansion of the heat kernel on `S^{n-1}`:
//!
//! ```text
//! G(w; t) = Σ_ℓ e^{-ℓ(ℓ+n-2)t} (2ℓ+n-2)/(n-2) C_ℓ^{n/2-1}(w) / A_{S^{n-1}}
//! ```
//!
//! Each term is assembled in log space and multiplied by the bounded ratio
//! `C_ℓ(w)/C_ℓ(1)`, so neither the exponential nor `C_ℓ(1)` is ever formed on
//! its own.

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::gegenbauer::{log_bound_m, GegenbauerSeq, MAX_DEGREE};
use crate::sphere::log_surface_area;

/// The f64 sum is redone in extended precision once `Σ|term|` exceeds
/// `|Σ term|` by this factor.
const CANCELLATION_RATIO: f64 = 1e3;

/// When to stop summing the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub rel_tol: f64,
    pub consecutive_small: usize,
    pub l_min: usize,
    pub l_max: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { rel_tol: 1e-12, consecutive_small: 3, l_min: 10, l_max: 100_000 }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParams(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol)));
        }
        if self.l_min > self.l_max || self.l_max > MAX_DEGREE {
            return Err(Error::InvalidParams(format!(
                "need l_min <= l_max <= {MAX_DEGREE}, got {} and {}",
                self.l_min, self.l_max
            )));
        }
        if self.consecutive_small == 0 {
            return Err(Error::InvalidParams("consecutive_small must be positive".into()));
        }
        Ok(())
    }

    fn key(&self) -> (u64, usize, usize, usize) {
        (self.rel_tol.to_bits(), self.consecutive_small, self.l_min, self.l_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactKernelParams {
    pub n: usize,
    pub t: f64,
    #[serde(default)]
    pub truncation: TruncationPolicy,
}

impl ExactKernelParams {
    pub fn new(n: usize, t: f64) -> Result<Self> {
        let p = Self { n, t, truncation: TruncationPolicy::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_truncation(mut self, truncation: TruncationPolicy) -> Result<Self> {
        self.truncation = truncation;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::DimensionTooSmall { n: self.n, min: 3 });
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(Error::InvalidParams(format!("t must be positive, got {}", self.t)));
        }
        self.truncation.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub value: f64,
    /// Number of terms summed (degrees `0..terms_used`).
    pub terms_used: usize,
    /// Upper bound on `|G - partial sum|` from the `Q_ℓ` majorant.
    pub tail_bound: f64,
}

/// `log` of the unsigned term at degree `l` without the Gegenbauer ratio.
#[inline]
fn log_term_magnitude(l: usize, n: usize, t: f64, log_c_at_one: f64, log_area: f64) -> f64 {
    let lf = l as f64;
    let nm2 = (n - 2) as f64;
    -lf * (lf + nm2) * t + ((2.0 * lf + nm2) / nm2).ln() + log_c_at_one - log_area
}

/// Sum of `Q_ℓ/((n-2)A)` for `ℓ ≥ from`, i.e. the majorant of the tail.
fn tail_majorant(from: usize, n: usize, t: f64, log_area: f64) -> f64 {
    let nm2 = (n - 2) as f64;
    let mut total = 0.0;
    let mut prev = f64::INFINITY;
    let mut l = from;
    loop {
        let lf = l as f64;
        let log_m = log_bound_m(l, n).unwrap_or(f64::INFINITY);
        let log_q = -lf * (lf + nm2) * t + ((2.0 * lf + nm2) / nm2).ln() + log_m - log_area;
        let q = log_q.exp();
        total += q;
        // once decreasing, the ratio Q_{ℓ+1}/Q_ℓ only shrinks
        if q < prev && q <= total * 1e-17 {
            break;
        }
        if l > from + 10 * MAX_DEGREE {
            return f64::INFINITY;
        }
        prev = q;
        l += 1;
    }
    total
}

/// Sums `A_{S^{n-1}} · G(w; t)`, which stays finite for every `n` (the raw
/// kernel overflows once `1/A_{S^{n-1}}` does, around `n ≈ 350`).
fn sum_scaled_series(w: f64, params: &ExactKernelParams, fixed_terms: Option<usize>) -> Result<SeriesResult> {
    params.validate()?;
    if !(w.abs() <= 1.0) {
        return Err(Error::InvalidArgument(format!("|w| must be at most 1, got {w}")));
    }
    let n = params.n;
    let t = params.t;
    let pol = params.truncation;
    let alpha = n as f64 / 2.0 - 1.0;
    let log_area = 0.0;

    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut small_run = 0usize;
    let mut prev_mag = f64::NEG_INFINITY;
    for e in GegenbauerSeq::new(alpha, w)? {
        let l = e.degree;
        if let Some(stop) = fixed_terms {
            if l == stop {
                return Ok(SeriesResult { value: sum, terms_used: l, tail_bound: tail_majorant(l, n, t, log_area) });
            }
        } else if l > pol.l_max {
            return Err(Error::TruncationExceeded { l_max: pol.l_max });
        }
        let log_mag = log_term_magnitude(l, n, t, e.log_value_at_one, log_area);
        let term = log_mag.exp() * e.ratio;
        sum += term;
        abs_sum += term.abs();
        if fixed_terms.is_none() {
            // the majorant must also be past its peak so that a run of
            // small Gegenbauer ratios cannot end the sum early
            let decreasing = log_mag <= prev_mag;
            if term.abs() < pol.rel_tol * sum.abs() && decreasing {
                small_run += 1;
            } else {
                small_run = 0;
            }
            if small_run >= pol.consecutive_small && l >= pol.l_min {
                if abs_sum > CANCELLATION_RATIO * sum.abs() {
                    if let Some(r) = sum_scaled_series_dd(w, params) {
                        return Ok(r);
                    }
                }
                return Ok(SeriesResult {
                    value: sum,
                    terms_used: l + 1,
                    tail_bound: tail_majorant(l + 1, n, t, log_area),
                });
            }
        }
        prev_mag = log_mag;
    }
    Err(Error::TruncationExceeded { l_max: pol.l_max })
}

/// Re-summation in double-double arithmetic, used when the f64 sum has lost
/// most of its digits to cancellation. Returns `None` if a term leaves the
/// f64 exponent range.
fn sum_scaled_series_dd(w: f64, params: &ExactKernelParams) -> Option<SeriesResult> {
    let n = params.n;
    let t = params.t;
    let pol = params.truncation;
    let a = n as f64 / 2.0 - 1.0;
    let nm2 = Dd::from((n - 2) as f64);
    let q2 = Dd::exp_neg(Dd::from(t).ldexp(1));
    let mut step = Dd::exp_neg(Dd::from(t).mul_f64((n - 1) as f64));
    // e^{-ℓ(ℓ+n-2)t} C_ℓ(1)
    let mut mag = Dd::ONE;
    let (mut r1, mut r2) = (Dd::ONE, Dd::ZERO);
    let mut sum = Dd::ZERO;
    let mut small_run = 0usize;
    let mut prev_mag = f64::INFINITY;
    for l in 0..=pol.l_max.min(MAX_DEGREE) {
        let lf = l as f64;
        let r = match l {
            0 => Dd::ONE,
            1 => Dd::from(w),
            _ => {
                ((r1 * Dd::from(w)).mul_f64(2.0 * (lf + a - 1.0)) - r2.mul_f64(lf - 1.0)) / Dd::from(lf + 2.0 * a - 1.0)
            }
        };
        if l > 0 {
            mag = (mag * step).mul_f64(lf + 2.0 * a - 1.0) / Dd::from(lf);
            step = step * q2;
        }
        let weight = mag * (Dd::from(2.0 * lf + (n - 2) as f64) / nm2);
        if !weight.hi.is_finite() {
            return None;
        }
        let term = weight * r;
        sum = sum + term;
        r2 = r1;
        r1 = r;
        let decreasing = weight.hi <= prev_mag;
        if term.hi.abs() < pol.rel_tol * sum.hi.abs() && decreasing {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= pol.consecutive_small && l >= pol.l_min {
            return Some(SeriesResult {
                value: sum.to_f64(),
                terms_used: l + 1,
                tail_bound: tail_majorant(l + 1, n, t, 0.0),
            });
        }
        prev_mag = weight.hi;
    }
    None
}

fn unscale(r: SeriesResult, n: usize) -> Result<SeriesResult> {
    let inv_area = (-log_surface_area(n)?).exp();
    Ok(SeriesResult { value: r.value * inv_area, tail_bound: r.tail_bound * inv_area, ..r })
}

/// The exact heat kernel `G^ext(w; t)` at `w = x̂·ŷ`.
pub fn g_exact(w: f64, params: &ExactKernelParams) -> Result<SeriesResult> {
    unscale(sum_scaled_series(w, params, None)?, params.n)
}

/// `A_{S^{n-1}} · G^ext(w; t)`, finite for all `n`.
pub fn g_exact_scaled(w: f64, params: &ExactKernelParams) -> Result<SeriesResult> {
    sum_scaled_series(w, params, None)
}

/// Partial sum over degrees `0..terms`, ignoring the stopping rule.
pub fn g_exact_truncated(w: f64, params: &ExactKernelParams, terms: usize) -> Result<SeriesResult> {
    if terms > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!("{terms} terms exceeds the degree cap")));
    }
    unscale(sum_scaled_series(w, params, Some(terms))?, params.n)
}

type CacheKey = (usize, u64, (u64, usize, usize, usize));

/// Concurrent memo of the self-similarity `A·G(1; t)` keyed by `(n, t, policy)`.
#[derive(Debug, Default)]
pub struct SelfSimilarityCache {
    map: DashMap<CacheKey, f64>,
}

impl SelfSimilarityCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache used by [`k_exact`].
    pub fn global() -> &'static SelfSimilarityCache {
        static CACHE: OnceLock<SelfSimilarityCache> = OnceLock::new();
        CACHE.get_or_init(SelfSimilarityCache::new)
    }

    pub fn get(&self, params: &ExactKernelParams) -> Result<f64> {
        let key = (params.n, params.t.to_bits(), params.truncation.key());
        if let Some(v) = self.map.get(&key) {
            return Ok(*v);
        }
        // the shard lock is held while computing: at most one insertion per key
        let entry = self.map.entry(key).or_try_insert_with(|| g_exact_scaled(1.0, params).map(|r| r.value))?;
        Ok(*entry)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Snap values within 1e-12 of the `[0, 1]` range back onto it.
pub(crate) fn clamp_normalized(k: f64) -> f64 {
    if (-1e-12..0.0).contains(&k) {
        0.0
    } else if k > 1.0 && k <= 1.0 + 1e-12 {
        1.0
    } else {
        k
    }
}

/// Self-similarity normalized kernel `K^ext = G(w)/G(1)`.
pub fn k_exact(w: f64, params: &ExactKernelParams) -> Result<f64> {
    k_exact_with(w, params, SelfSimilarityCache::global())
}

pub fn k_exact_with(w: f64, params: &ExactKernelParams, cache: &SelfSimilarityCache) -> Result<f64> {
    let g1 = cache.get(params)?;
    if w == 1.0 {
        return Ok(1.0);
    }
    let g = g_exact_scaled(w, params)?.value;
    Ok(clamp_normalized(g / g1))
}

/// `t = t* log(n) / n`.
pub fn sweet_spot_time(n: usize, t_star: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::DimensionTooSmall { n, min: 3 });
    }
    if !(t_star > 0.0) {
        return Err(Error::InvalidArgument(format!("t* must be positive, got {t_star}")));
    }
    let nf = n as f64;
    Ok(t_star * nf.ln() / nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarityReport {
    pub n: usize,
    pub t: f64,
    /// `A_{S^{n-1}} · G(1; t)`
    pub lhs: f64,
    /// `exp(n e^{-nt})`
    pub rhs: f64,
}

/// `A·G(1; t)` at an arbitrary time.
pub fn scaled_self_similarity(n: usize, t: f64) -> Result<SelfSimilarityReport> {
    let params = ExactKernelParams::new(n, t)?;
    let nf = n as f64;
    Ok(SelfSimilarityReport { n, t, lhs: g_exact_scaled(1.0, &params)?.value, rhs: (nf * (-nf * t).exp()).exp() })
}

/// Self-similarity at the sweet spot `t = log n / n` against its large-`n` bound.
pub fn self_similarity_bound_check(n: usize) -> Result<SelfSimilarityReport> {
    scaled_self_similarity(n, sweet_spot_time(n, 1.0)?)
}
