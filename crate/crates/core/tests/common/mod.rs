//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent dense reference solver for the soft-margin dual, by
/// accelerated projected gradient on `min ½αᵀQα - eᵀα` over
/// `{0 ≤ α ≤ C, yᵀα = 0}`. Returns the maximized dual objective and `α`.
pub fn reference_dual(k: &[Vec<f64>], y: &[f64], c: f64, iters: usize) -> (f64, Vec<f64>) {
    let m = y.len();
    let q: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    // Lipschitz constant by power iteration, padded
    let mut v = vec![1.0; m];
    let mut lip = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..m).map(|i| (0..m).map(|j| q[i][j] * v[j]).sum()).collect();
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm == 0.0 {
            break;
        }
        lip = nrm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / nrm).collect();
    }
    let step = 1.0 / (lip * 1.01 + 1e-12);
    let f = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += a[i] * q[i][j] * a[j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * s
    };
    let mut x = vec![0.0; m];
    let mut z = x.clone();
    let mut tk: f64 = 1.0;
    let mut fx = f(&x);
    for _ in 0..iters {
        let g: Vec<f64> = (0..m).map(|i| (0..m).map(|j| q[i][j] * z[j]).sum::<f64>() - 1.0).collect();
        let target: Vec<f64> = (0..m).map(|i| z[i] - step * g[i]).collect();
        let xn = project(&target, y, c);
        let fxn = f(&xn);
        // restart momentum when the objective drops
        let tn = if fxn < fx { 1.0 } else { (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0 };
        let mom = if fxn < fx { 0.0 } else { (tk - 1.0) / tn };
        z = (0..m).map(|i| xn[i] + mom * (xn[i] - x[i])).collect();
        x = xn;
        fx = fxn.max(fx);
        tk = tn;
    }
    (f(&x), x)
}

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}` via bisection on the
/// multiplier of the equality constraint.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let g = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let span = v.iter().fold(0.0f64, |s, x| s.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn gaussian_points(rng: &mut ChaCha8Rng, m: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect()).collect()
}

pub fn random_unit_vectors(seed: u64, m: usize, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_points(&mut rng, m, n)
        .into_iter()
        .map(|v| {
            let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

/// Labels `±1` with both classes present.
pub fn random_labels(rng: &mut ChaCha8Rng, m: usize) -> Vec<i8> {
    loop {
        let y: Vec<i8> = (0..m).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        if y.contains(&1) && y.contains(&-1) {
            return y;
        }
    }
}
