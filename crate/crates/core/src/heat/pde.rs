//! Independent check of the series: the radial heat equation
//!
//! ```text
//! ∂_t u = u'' + (n-2) cot(θ) u'
//! ```
//!
//! discretized in flux (finite-volume) form on a uniform cell-centred grid over
//! `(0, π)`, with cell weights `V_i = ∫_cell sin^{n-2}θ dθ`. The operator is
//! self-adjoint in the `V`-weighted inner product; its symmetrized tridiagonal
//! form gives the eigenvalues (Sturm bisection) and the eigenfunctions are
//! recovered by flux shooting from the pole, which stays accurate where the
//! weight underflows. The source is the discrete delta in the polar cap cell.
//!
//! Every mode whose factor `e^{-μt}` is representable is kept, so the result is
//! the exact matrix exponential of the discrete operator up to rounding.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::sphere::{log_surface_area, surface_area};

pub const MIN_GRID_POINTS: usize = 500;

/// Below this fraction of the peak the eigenmode sum is dominated by rounding.
const TAIL_FLOOR: f64 = 1e-9;

/// `u(θ_i, t)` on the cell centres of one grid.
#[derive(Debug, Clone)]
pub struct RadialHeatSolution {
    pub n: usize,
    pub t: f64,
    pub theta: Vec<f64>,
    pub values: Vec<f64>,
    /// `∫_cell sin^{n-2}θ dθ` for each cell.
    pub volumes: Vec<f64>,
    pub modes_used: usize,
}

impl RadialHeatSolution {
    /// `Σ_i u_i A_{S^{n-2}} V_i`; equals 1 up to rounding.
    pub fn mass(&self) -> f64 {
        let a = surface_area(self.n - 1).expect("n >= 3");
        self.values.iter().zip(&self.volumes).map(|(u, v)| a * u * v).sum()
    }

    /// Interpolated value at any `θ ∈ [0, π]`.
    pub fn eval(&self, theta: f64) -> f64 {
        interpolate(&self.theta, &self.values, theta)
    }
}

/// Cubic Lagrange interpolation on a uniform cell-centred grid over `[0, π]`,
/// using even reflection across both poles. Interpolates `log u` when the
/// stencil is positive.
fn interpolate(theta: &[f64], values: &[f64], x: f64) -> f64 {
    let n = theta.len();
    let h = PI / n as f64;
    let x = x.clamp(0.0, PI);
    let pos = x / h - 0.5;
    let base = pos.floor() as i64 - 1;
    let idx = |j: i64| -> usize {
        // reflect: cell -1 mirrors cell 0, cell n mirrors cell n-1
        let j = if j < 0 {
            -1 - j
        } else if j >= n as i64 {
            2 * n as i64 - 1 - j
        } else {
            j
        };
        j as usize
    };
    let pts: Vec<(f64, f64)> = (0..4)
        .map(|k| {
            let j = base + k;
            ((j as f64 + 0.5) * h, values[idx(j)])
        })
        .collect();
    let positive = pts.iter().all(|p| p.1 > 0.0);
    let mut acc = 0.0;
    for (a, &(xa, ya)) in pts.iter().enumerate() {
        let mut l = 1.0;
        for (b, &(xb, _)) in pts.iter().enumerate() {
            if a != b {
                l *= (x - xb) / (xa - xb);
            }
        }
        acc += l * if positive { ya.ln() } else { ya };
    }
    if positive {
        acc.exp()
    } else {
        acc
    }
}

struct Discretization {
    n_cells: usize,
    log_vol: Vec<f64>,
    /// `log(sin^{n-2}(θ_{i+1/2}) / h)` for the interior faces `i = 0..N-1`.
    log_face: Vec<f64>,
}

impl Discretization {
    fn new(n: usize, n_cells: usize) -> Self {
        let h = PI / n_cells as f64;
        let p = (n - 2) as f64;
        let (gx, gw) = gauss_legendre(32);
        let log_vol = (0..n_cells)
            .map(|i| {
                let lo = i as f64 * h;
                let logs: Vec<f64> = gx.iter().map(|x| p * (lo + 0.5 * h * (1.0 + x)).sin().ln()).collect();
                let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = logs.iter().zip(&gw).map(|(l, w)| 0.5 * h * w * (l - m).exp()).sum();
                m + s.ln()
            })
            .collect();
        let log_face = (1..n_cells).map(|i| p * (i as f64 * h).sin().ln() - h.ln()).collect();
        Self { n_cells, log_vol, log_face }
    }

    /// Diagonal and squared off-diagonal of the symmetrized, negated operator.
    fn symmetric_tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let nc = self.n_cells;
        let mut diag = vec![0.0; nc];
        for (i, d) in diag.iter_mut().enumerate() {
            let lv = self.log_vol[i];
            if i > 0 {
                *d += (self.log_face[i - 1] - lv).exp();
            }
            if i + 1 < nc {
                *d += (self.log_face[i] - lv).exp();
            }
        }
        let off_sq =
            (0..nc - 1).map(|i| (2.0 * self.log_face[i] - self.log_vol[i] - self.log_vol[i + 1]).exp()).collect();
        (diag, off_sq)
    }
}

/// Number of eigenvalues of the tridiagonal matrix below `x`.
fn sturm_count(diag: &[f64], off_sq: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let sub = if i == 0 { 0.0 } else { off_sq[i - 1] / q };
        q = diag[i] - x - sub;
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue by bisection inside `[lo, hi]`.
fn kth_eigenvalue(diag: &[f64], off_sq: &[f64], k: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off_sq, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves on a single grid of `grid_points` cells.
pub fn pde_oracle(n: usize, t: f64, grid_points: usize) -> Result<RadialHeatSolution> {
    if n < 3 {
        return Err(Error::DimensionTooSmall { n, min: 3 });
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("t must be positive, got {t}")));
    }
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::GridTooCoarse { points: grid_points, min: MIN_GRID_POINTS });
    }
    // an even count makes the grid symmetric about the equator
    let nc = grid_points + grid_points % 2;
    let h = PI / nc as f64;
    let disc = Discretization::new(n, nc);
    let (diag, off_sq) = disc.symmetric_tridiagonal();

    // Gershgorin bound for the spectrum
    let upper = (0..nc)
        .map(|i| {
            let l = if i > 0 { off_sq[i - 1].sqrt() } else { 0.0 };
            let r = if i + 1 < nc { off_sq[i].sqrt() } else { 0.0 };
            diag[i] + l + r
        })
        .fold(0.0, f64::max);
    let mu_cut = (745.0 / t).min(upper);
    let n_modes = sturm_count(&diag, &off_sq, mu_cut).max(1);

    let half = nc / 2;
    // per-cell shooting coefficients
    let rho: Vec<f64> =
        (0..half).map(|i| if i == 0 { 0.0 } else { (disc.log_face[i - 1] - disc.log_face[i]).exp() }).collect();
    let sigma: Vec<f64> = (0..half).map(|i| (disc.log_vol[i] - disc.log_face[i]).exp()).collect();
    let vol: Vec<f64> = disc.log_vol.iter().map(|l| l.exp()).collect();

    let log_a = log_surface_area(n - 1)?;
    let mut values = vec![0.0; nc];
    let mut psi = vec![0.0; half];
    let mut lo = 0.0;
    for k in 0..n_modes {
        let mu = if k == 0 {
            0.0
        } else {
            let m = kth_eigenvalue(&diag, &off_sq, k, lo, upper);
            lo = m;
            m
        };
        // flux shooting from the north pole: s_i = ψ_{i+1} - ψ_i
        psi[0] = 1.0;
        let mut s = 0.0;
        for i in 0..half - 1 {
            s = s * rho[i] - mu * sigma[i] * psi[i];
            psi[i + 1] = psi[i] + s;
        }
        let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
        let norm_sq = 2.0 * (0..half).map(|i| vol[i] * psi[i] * psi[i]).sum::<f64>();
        let coef = (-mu * t).exp() * psi[0] / norm_sq;
        for i in 0..half {
            values[i] += coef * psi[i];
            values[nc - 1 - i] += coef * parity * psi[i];
        }
    }
    let inv_a = (-log_a).exp();
    for v in &mut values {
        *v *= inv_a;
    }
    Ok(RadialHeatSolution {
        n,
        t,
        theta: (0..nc).map(|i| (i as f64 + 0.5) * h).collect(),
        values,
        volumes: vol,
        modes_used: n_modes,
    })
}

/// Poisson(λ) probabilities for `k = 0..`, recursed outward from the mode and
/// normalized to sum to one; entries below `1e-300` of the mode are zero.
fn poisson_weights(lam: f64) -> Vec<f64> {
    let mode = lam.floor() as usize;
    let last = (lam + 40.0 * lam.sqrt() + 100.0).ceil() as usize;
    let mut w = vec![0.0; last + 1];
    w[mode] = 1.0;
    for k in mode + 1..=last {
        w[k] = w[k - 1] * lam / k as f64;
        if w[k] < 1e-300 {
            break;
        }
    }
    for k in (0..mode).rev() {
        w[k] = w[k + 1] * (k + 1) as f64 / lam;
        if w[k] < 1e-300 {
            break;
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Solves on a single grid by uniformization,
/// `e^{-tL} = e^{-Λt} Σ_k (Λt)^k/k! P^k` with `P = I - L/Λ` entrywise
/// nonnegative. No cancellation occurs, so values far out in the tail keep
/// their relative accuracy; the cost grows like `t·N³`.
pub fn pde_oracle_uniformized(n: usize, t: f64, grid_points: usize) -> Result<RadialHeatSolution> {
    if n < 3 {
        return Err(Error::DimensionTooSmall { n, min: 3 });
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("t must be positive, got {t}")));
    }
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::GridTooCoarse { points: grid_points, min: MIN_GRID_POINTS });
    }
    let nc = grid_points + grid_points % 2;
    let h = PI / nc as f64;
    let disc = Discretization::new(n, nc);
    let up: Vec<f64> =
        (0..nc).map(|i| if i + 1 < nc { (disc.log_face[i] - disc.log_vol[i]).exp() } else { 0.0 }).collect();
    let down: Vec<f64> =
        (0..nc).map(|i| if i > 0 { (disc.log_face[i - 1] - disc.log_vol[i]).exp() } else { 0.0 }).collect();
    let rate = (0..nc).map(|i| up[i] + down[i]).fold(0.0, f64::max);
    let stay: Vec<f64> = (0..nc).map(|i| 1.0 - (up[i] + down[i]) / rate).collect();
    let up: Vec<f64> = up.iter().map(|a| a / rate).collect();
    let down: Vec<f64> = down.iter().map(|b| b / rate).collect();

    let vol: Vec<f64> = disc.log_vol.iter().map(|l| l.exp()).collect();
    let mut x = vec![0.0; nc];
    x[0] = (-log_surface_area(n - 1)? - disc.log_vol[0]).exp();
    let mut next = vec![0.0; nc];
    let mut values = vec![0.0; nc];
    let weights = poisson_weights(rate * t);
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    for (k, &w) in weights[..=last].iter().enumerate() {
        if w > 0.0 {
            for (v, xi) in values.iter_mut().zip(&x) {
                *v += w * xi;
            }
        }
        if k == last {
            break;
        }
        next[0] = stay[0] * x[0] + up[0] * x[1];
        for i in 1..nc - 1 {
            next[i] = stay[i] * x[i] + up[i] * x[i + 1] + down[i] * x[i - 1];
        }
        next[nc - 1] = stay[nc - 1] * x[nc - 1] + down[nc - 1] * x[nc - 2];
        std::mem::swap(&mut x, &mut next);
    }
    Ok(RadialHeatSolution {
        n,
        t,
        theta: (0..nc).map(|i| (i as f64 + 0.5) * h).collect(),
        values,
        volumes: vol,
        modes_used: 0,
    })
}

/// Richardson-extrapolated solution from grids of `N` and `3N` cells, whose
/// cell centres coincide on the coarse grid.
#[derive(Debug, Clone)]
pub struct RefinedOracle {
    pub coarse: RadialHeatSolution,
    pub fine: RadialHeatSolution,
    pub extrapolated: Vec<f64>,
}

impl RefinedOracle {
    pub fn new(n: usize, t: f64, grid_points: usize) -> Result<Self> {
        let mut coarse = pde_oracle(n, t, grid_points)?;
        let nc = coarse.theta.len();
        let peak = coarse.values.iter().cloned().fold(0.0, f64::max);
        let floor = coarse.values.iter().cloned().fold(f64::INFINITY, f64::min);
        // the mode sum cannot resolve values below its rounding floor
        let tail_limited = !(floor > TAIL_FLOOR * peak);
        let fine = if tail_limited {
            coarse = pde_oracle_uniformized(n, t, grid_points)?;
            pde_oracle_uniformized(n, t, 3 * nc)?
        } else {
            pde_oracle(n, t, 3 * nc)?
        };
        let extrapolated = (0..nc)
            .map(|i| {
                let (f, c) = (fine.values[3 * i + 1], coarse.values[i]);
                if f > 0.0 && c > 0.0 {
                    ((9.0 * f.ln() - c.ln()) / 8.0).exp()
                } else {
                    (9.0 * f - c) / 8.0
                }
            })
            .collect();
        Ok(Self { coarse, fine, extrapolated })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        interpolate(&self.coarse.theta, &self.extrapolated, theta)
    }
}
