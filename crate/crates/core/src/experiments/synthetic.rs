//! Synthetic fixtures whose class structure lives entirely in direction.
//!
//! Each class is a band of polar angle `θ` about the first coordinate axis
//! (a cap when the band starts at 0). Directions within the band are uniform
//! and every sample is then stretched by an independent factor in `[1, 100]`,
//! so the norm carries no label information. After an L2 sphere map the
//! bands are separated by thresholds on `x̂_1`; in raw coordinates a ring
//! around a cap is not linearly separable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use super::LabeledDataset;

/// Cap and ring about `+e_1` and their mirror images about `-e_1`.
pub const FOUR_BANDS: [(f64, f64); 4] = [(0.0, 0.4), (0.8, 1.1), (PI - 1.1, PI - 0.8), (PI - 0.4, PI)];

/// Samples `per_class` points for each `(θ_lo, θ_hi)` band in `R^n`.
/// Labels are `"c0"`, `"c1"`, …; sample ids are zero-padded row numbers.
pub fn latitude_bands(seed: u64, bands: &[(f64, f64)], per_class: usize, n: usize) -> LabeledDataset {
    assert!(n >= 2, "need at least two dimensions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = Vec::new();
    let mut labels = Vec::new();
    for (c, &(lo, hi)) in bands.iter().enumerate() {
        for _ in 0..per_class {
            // uniform in the band w.r.t. the sphere measure: sample cos θ
            // with density ∝ sin^{n-3}θ by rejection on θ
            let theta = loop {
                let th = lo + (hi - lo) * rng.random::<f64>();
                let peak = if lo <= PI / 2.0 && hi >= PI / 2.0 { 1.0 } else { lo.sin().max(hi.sin()) };
                if rng.random::<f64>() * peak.powi(n as i32 - 2) <= th.sin().powi(n as i32 - 2) {
                    break th;
                }
            };
            let mut perp: Vec<f64> = (1..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = perp.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut perp {
                *v /= norm;
            }
            let scale = 1.0 + 99.0 * rng.random::<f64>();
            let mut x = Vec::with_capacity(n);
            x.push(scale * theta.cos());
            x.extend(perp.iter().map(|v| scale * theta.sin() * v));
            matrix.push(x);
            labels.push(format!("c{c}"));
        }
    }
    let m = matrix.len();
    let width = m.saturating_sub(1).to_string().len();
    let ids = (0..m).map(|i| format!("{i:0width$}")).collect();
    let names = (0..n).map(|j| format!("f{j}")).collect();
    LabeledDataset::new(matrix, labels, names, ids).expect("fixture shape is consistent")
}

/// The four-class fixture of [`FOUR_BANDS`].
pub fn radial_noise_bands(seed: u64, per_class: usize, n: usize) -> LabeledDataset {
    latitude_bands(seed, &FOUR_BANDS, per_class, n)
}
