//! Short-time (parametrix) approximation of the heat kernel on `S^d`,
//! `d = n - 1`: a Euclidean Gaussian times `u_0 + u_1 t + u_2 t² + …`.
//!
//! Only the Gaussian factor [`k_prx`] is used as an SVM kernel. The
//! coefficients `u_0, u_1, u_2` and the numeric recursion oracle are provided
//! for studying where the expansion breaks down.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature;

/// Below this radius `u1` is evaluated from its Taylor expansion.
pub const U1_SERIES_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametrixParams {
    pub n: usize,
    pub t: f64,
    /// Number of correction terms kept beyond `u0` (0, 1 or 2).
    pub order: u8,
}

impl ParametrixParams {
    pub fn new(n: usize, t: f64, order: u8) -> Result<Self> {
        if n < 2 {
            return Err(Error::DimensionTooSmall { n, min: 2 });
        }
        if !(t > 0.0) {
            return Err(Error::InvalidParams(format!("t must be positive, got {t}")));
        }
        if order > 2 {
            return Err(Error::InvalidParams(format!("order {order} is above 2")));
        }
        Ok(Self { n, t, order })
    }

    /// Sphere dimension `d = n - 1`.
    pub fn d(&self) -> usize {
        self.n - 1
    }

    /// `e^{-θ²/4t} (u0 + u1 t + u2 t²)` truncated at `order`, without the
    /// `(4πt)^{-d/2}` prefactor.
    pub fn expansion(&self, theta: f64) -> Result<f64> {
        let d = self.d();
        let mut s = u0(theta, d)?;
        if self.order >= 1 {
            s += u1(theta, d)? * self.t;
        }
        if self.order >= 2 {
            s += u2(theta, d)? * self.t * self.t;
        }
        Ok(k_prx(theta, self.t)? * s)
    }
}

/// `K^prx(θ; t) = exp(-θ²/(4t))`.
pub fn k_prx(theta: f64, t: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::InvalidArgument(format!("θ = {theta} is outside [0, π]")));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    Ok((-theta * theta / (4.0 * t)).exp())
}

/// `sin(r)/r` with the removable singularity filled in.
fn sinc(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        1.0 - r * r / 6.0
    } else {
        r.sin() / r
    }
}

/// `u0(r) = (sin r / r)^{-(d-1)/2}`, normalized so `u0(0) = 1`.
pub fn u0(r: f64, d: usize) -> Result<f64> {
    if !(0.0..PI).contains(&r) {
        return Err(Error::OutOfDomain { r });
    }
    Ok(sinc(r).powf(-(d as f64 - 1.0) / 2.0))
}

/// `(r cot r - 1) / r²`, stable near zero.
fn rcot_minus_one_over_r2(r: f64) -> f64 {
    if r < U1_SERIES_RADIUS {
        // r cot r = 1 - Σ_k 2^{2k} |B_{2k}| r^{2k} / (2k)!
        const C: [f64; 7] =
            [1.0 / 3.0, 1.0 / 45.0, 2.0 / 945.0, 1.0 / 4725.0, 2.0 / 93555.0, 1382.0 / 638512875.0, 4.0 / 18243225.0];
        let r2 = r * r;
        let mut acc = 0.0;
        for c in C.iter().rev() {
            acc = acc * r2 + c;
        }
        -acc
    } else {
        (r / r.tan() - 1.0) / (r * r)
    }
}

/// First correction,
/// `u1 = u0 (d-1)/(4r²) [3 - d + (d-1) r² + (d-3) r cot r]`.
///
/// The bracket is a `0/0` form at the origin; for `r < U1_SERIES_RADIUS` it is
/// rewritten through the Taylor series of `r cot r`, which tends to
/// `d(d-1)/6 · u0` as `r → 0`.
pub fn u1(r: f64, d: usize) -> Result<f64> {
    if !(0.0..PI).contains(&r) {
        return Err(Error::OutOfDomain { r });
    }
    let df = d as f64;
    // bracket / r² = (d-1) + (d-3)(r cot r - 1)/r²
    let bracket_over_r2 = (df - 1.0) + (df - 3.0) * rcot_minus_one_over_r2(r);
    Ok(u0(r, d)? * (df - 1.0) / 4.0 * bracket_over_r2)
}

/// Second correction exactly as printed in closed form,
/// `u2 = u0 (d-1)/32 [(d-3)³ + (d-3)(d-5)(d-7)/r⁴ - (d-3)²(d-5)/(r³ tan r)
///       + 2(d-1)²(d-3)/(r tan r) + (d+1)(d-3)(d-5)/(r² sin r)]`.
///
/// Every bracket term carries a factor `(d-3)`, so this vanishes identically
/// at `d = 3`; [`u_recursion_oracle`] gives `u0/2` there instead.
pub fn u2(r: f64, d: usize) -> Result<f64> {
    if !(r > 0.0 && r < PI) {
        return Err(Error::OutOfDomain { r });
    }
    let df = d as f64;
    let (a, b, c) = (df - 3.0, df - 5.0, df - 7.0);
    let tan = r.tan();
    let bracket = a.powi(3) + a * b * c / r.powi(4) - a * a * b / (r.powi(3) * tan)
        + 2.0 * (df - 1.0).powi(2) * a / (r * tan)
        + (df + 1.0) * a * b / (r * r * r.sin());
    Ok(u0(r, d)? * (df - 1.0) / 32.0 * bracket)
}

/// Radial Laplacian on `S^d`, `f'' + (d-1) cot(r) f'`, by 6th-order central
/// differences with step `h`.
pub fn radial_laplacian<F: Fn(f64) -> f64>(f: &F, r: f64, d: usize, h: f64) -> f64 {
    let fp = |k: f64| f(r + k * h);
    let d1 = (-fp(-3.0) + 9.0 * fp(-2.0) - 45.0 * fp(-1.0) + 45.0 * fp(1.0) - 9.0 * fp(2.0) + fp(3.0)) / (60.0 * h);
    let d2 = (2.0 * fp(-3.0) - 27.0 * fp(-2.0) + 270.0 * fp(-1.0) - 490.0 * fp(0.0) + 270.0 * fp(1.0) - 27.0 * fp(2.0)
        + 2.0 * fp(3.0))
        / (180.0 * h * h);
    d2 + (d as f64 - 1.0) * d1 / r.tan()
}

/// Which coefficient the recursion starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecursionSource {
    /// `u0` in closed form.
    U0,
    /// `u1` in closed form.
    U1,
}

/// Numeric `u_{k+1}(r) = r^{-(k+1)} u0(r) ∫_0^r s^k u0(s)^{-1} Δu_k(s) ds` on
/// `r_grid`, for `k = 0` (from closed-form `u0`) or `k = 1` (from closed-form
/// `u1`).
///
/// Near the origin the finite-difference stencil would straddle `r = 0`, so
/// the integrand is evaluated through the even extension `u_k(-s) = u_k(s)`,
/// which both coefficients satisfy.
pub fn u_recursion_oracle(k: usize, r_grid: &[f64], d: usize) -> Result<Vec<f64>> {
    let src = match k {
        0 => RecursionSource::U0,
        1 => RecursionSource::U1,
        _ => return Err(Error::InvalidArgument(format!("recursion oracle supports k = 0 or 1, got {k}"))),
    };
    let uk = move |s: f64| -> f64 {
        let s = s.abs();
        match src {
            RecursionSource::U0 => u0(s, d).unwrap_or(f64::NAN),
            RecursionSource::U1 => u1(s, d).unwrap_or(f64::NAN),
        }
    };
    let h: f64 = 2e-3;
    let integrand = |s: f64| -> f64 {
        // the integrand is even and flat at the origin, while cot(s) f'(s)
        // amplifies stencil roundoff as s → 0
        let sc = s.max(1e-3);
        let lap = radial_laplacian(&uk, sc, d, h);
        s.powi(k as i32) * lap / u0(sc, d).unwrap_or(f64::NAN)
    };
    r_grid
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r < PI - 0.05) {
                return Err(Error::OutOfDomain { r });
            }
            let integral = quadrature::adaptive(integrand, 0.0, r, 1e-10, 1e-10)?;
            Ok(u0(r, d)? * integral / r.powi(k as i32 + 1))
        })
        .collect()
}

/// `(n-2)t > 3`: the order-0 parametrix rises away from the source.
pub fn unphysical_regime(n: usize, t: f64) -> bool {
    (n as f64 - 2.0) * t > 3.0
}
