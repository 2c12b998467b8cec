use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SvmError, SvmModel, SvmProblem, SvmResult};
use crate::kernel::GramMatrix;

/// Floor on the curvature along a working-set direction.
const TAU: f64 = 1e-12;

/// `Σ α_i - ½ Σ_ij α_i α_j y_i y_j K_ij`.
pub fn dual_objective(gram: &GramMatrix, labels: &[i8], alphas: &[f64]) -> f64 {
    let m = gram.dim();
    let mut quad = 0.0;
    for i in 0..m {
        if alphas[i] == 0.0 {
            continue;
        }
        let yi = labels[i] as f64;
        let row = gram.row(i);
        let mut s = 0.0;
        for j in 0..m {
            s += alphas[j] * labels[j] as f64 * row[j];
        }
        quad += alphas[i] * yi * s;
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Trains by SMO and fails with [`SvmError::NoConvergence`] if the iteration
/// cap is reached first.
pub fn train(problem: &SvmProblem) -> SvmResult<SvmModel> {
    let model = solve(problem)?;
    if model.converged {
        Ok(model)
    } else {
        Err(SvmError::NoConvergence { iterations: model.iterations, model: Box::new(model) })
    }
}

/// Like [`train`] but returns an unconverged iterate (flagged, and logged as a
/// warning) instead of an error.
pub fn train_lenient(problem: &SvmProblem) -> SvmResult<SvmModel> {
    let model = solve(problem)?;
    if !model.converged {
        log::warn!("SMO hit its iteration cap ({}); using the last iterate", model.iterations);
    }
    Ok(model)
}

fn solve(p: &SvmProblem) -> SvmResult<SvmModel> {
    p.validate()?;
    let gram = p.gram;
    let m = gram.dim();
    let c = p.c;
    let y: Vec<f64> = p.labels.iter().map(|&v| v as f64).collect();
    let mut alpha = vec![0.0; m];
    // gradient of ½αᵀQα - eᵀα
    let mut grad = vec![-1.0; m];

    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(p.seed));

    let max_iter = p.max_passes.saturating_mul(m);
    let mut iterations = 0usize;
    let mut converged = false;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for &t in &order {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < p.tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (kii, kjj, kij) = (gram.get(i, i), gram.get(j, j), gram.get(i, j));
        let quad = (kii + kjj - 2.0 * kij).max(TAU);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else {
                if ai < 0.0 {
                    ai = 0.0;
                    aj = -diff;
                }
                if aj > c {
                    aj = c;
                    ai = c + diff;
                }
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = sum;
                }
                if ai < 0.0 {
                    ai = 0.0;
                    aj = sum;
                }
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        let (ri, rj) = (gram.row(i), gram.row(j));
        for t in 0..m {
            grad[t] += y[t] * (y[i] * ri[t] * di + y[j] * rj[t] * dj);
        }
    }

    // bias from the free multipliers, else the midpoint of the feasible range
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..m {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 { free_sum / free_count as f64 } else { 0.5 * (ub + lb) };

    let dual_coeffs: Vec<f64> = alpha.iter().zip(&y).map(|(a, yy)| a * yy).collect();
    let support_indices: Vec<usize> = (0..m).filter(|&t| alpha[t] > 0.0).collect();
    let mut w_norm_sq = 0.0;
    for &a in &support_indices {
        let row = gram.row(a);
        let s: f64 = support_indices.iter().map(|&b| dual_coeffs[b] * row[b]).sum();
        w_norm_sq += dual_coeffs[a] * s;
    }
    let objective = alpha.iter().sum::<f64>() - 0.5 * w_norm_sq;

    Ok(SvmModel {
        schema_version: crate::SCHEMA_VERSION,
        dual_coeffs,
        bias: -rho,
        support_indices,
        spec: gram.spec,
        sample_ids: gram.sample_ids.clone(),
        c,
        w_norm_sq,
        objective,
        iterations,
        converged,
    })
}
