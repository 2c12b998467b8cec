use serde::{Deserialize, Serialize};

use super::{SvmError, SvmModel, SvmResult};
use crate::error::{Error, Result};
use crate::kernel::GramMatrix;

/// Relative accuracy of the enclosing-ball radius.
pub const MEB_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MebResult {
    /// Squared radius of a ball that provably encloses every mapped sample.
    pub r_sq: f64,
    /// Lower bound on the optimal squared radius.
    pub r_sq_lower: f64,
    /// Convex weights of the center over the samples.
    pub center_weights: Vec<f64>,
    pub iterations: usize,
}

/// Minimum enclosing ball of `φ(x_1..x_m)` from Gram entries alone.
///
/// Frank-Wolfe on the dual `max_β Σ β_i K_ii - βᵀKβ` over the simplex with
/// exact line search, stopped once the farthest point lies within
/// `(1+ε)` of the dual radius.
pub fn minimum_enclosing_ball(gram: &GramMatrix, epsilon: f64) -> MebResult {
    let m = gram.dim();
    let diag: Vec<f64> = (0..m).map(|i| gram.get(i, i)).collect();
    let far_from = |p: usize| -> usize {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for q in 0..m {
            let d = diag[p] + diag[q] - 2.0 * gram.get(p, q);
            if d > best_d {
                best_d = d;
                best = q;
            }
        }
        best
    };
    let a = far_from(0);
    let b = far_from(a);
    let mut beta = vec![0.0; m];
    beta[a] += 0.5;
    beta[b] += 0.5;
    // kb = Kβ, kept incrementally
    let mut kb: Vec<f64> = (0..m).map(|q| 0.5 * (gram.get(q, a) + gram.get(q, b))).collect();
    let mut iterations = 0;
    let bound = (1.0 + epsilon).powi(2);
    loop {
        let btkb: f64 = beta.iter().zip(&kb).map(|(x, y)| x * y).sum();
        let dual: f64 = beta.iter().zip(&diag).map(|(x, y)| x * y).sum::<f64>() - btkb;
        let mut far = 0;
        let mut far_d = f64::NEG_INFINITY;
        for q in 0..m {
            let d = diag[q] - 2.0 * kb[q] + btkb;
            if d > far_d {
                far_d = d;
                far = q;
            }
        }
        let far_d = far_d.max(0.0);
        let dual = dual.max(0.0);
        if far_d <= bound * dual || far_d == 0.0 || iterations >= 1_000_000 {
            return MebResult { r_sq: far_d, r_sq_lower: dual, center_weights: beta, iterations };
        }
        let delta = far_d / dual - 1.0;
        let lambda = delta / (2.0 * (1.0 + delta));
        for v in beta.iter_mut() {
            *v *= 1.0 - lambda;
        }
        beta[far] += lambda;
        let row = gram.row(far);
        for q in 0..m {
            kb[q] = (1.0 - lambda) * kb[q] + lambda * row[q];
        }
        iterations += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VcEstimate {
    pub r_sq: f64,
    pub m_sq: f64,
    pub mu_vc_star: f64,
    pub m_tilde: f64,
    pub n: usize,
    pub m: usize,
}

/// `μ*_VC = min{n, R²/M²} + 1` and `m̃ = m/μ*_VC` for a trained model.
///
/// `R²` is the smaller of the core-set ball and the ball about the origin of
/// feature space, both of which enclose the data.
pub fn vc_estimate(model: &SvmModel, gram: &GramMatrix, n: usize) -> SvmResult<VcEstimate> {
    let m = gram.dim();
    if model.dual_coeffs.len() != m {
        return Err(SvmError::DimensionMismatch { left: model.dual_coeffs.len(), right: m });
    }
    let meb = minimum_enclosing_ball(gram, MEB_EPSILON);
    let origin_r_sq = (0..m).map(|i| gram.get(i, i)).fold(0.0, f64::max);
    let r_sq = meb.r_sq.min(origin_r_sq);
    let m_sq = 1.0 / model.w_norm_sq;
    let ratio = if r_sq == 0.0 { 0.0 } else { r_sq / m_sq };
    let mu_vc_star = (n as f64).min(ratio) + 1.0;
    Ok(VcEstimate { r_sq, m_sq, mu_vc_star, m_tilde: m as f64 / mu_vc_star, n, m })
}

/// `F(m̃) = sqrt((1/m̃)[(log 2m̃ + 1) - log(η/4)/μ_VC])`.
pub fn generalization_bound(m_tilde: f64, mu_vc: f64, eta: f64) -> Result<f64> {
    if !(m_tilde > 0.0 && m_tilde.is_finite()) {
        return Err(Error::InvalidArgument(format!("m̃ must be positive, got {m_tilde}")));
    }
    if !(mu_vc >= 1.0 && mu_vc.is_finite()) {
        return Err(Error::InvalidArgument(format!("μ_VC must be at least 1, got {mu_vc}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("η must lie in (0, 1), got {eta}")));
    }
    let bracket = (2.0 * m_tilde).ln() + 1.0 - (eta / 4.0).ln() / mu_vc;
    if bracket < 0.0 {
        return Err(Error::InvalidArgument(format!("m̃ = {m_tilde} is below the domain of the bound")));
    }
    Ok((bracket / m_tilde).sqrt())
}
