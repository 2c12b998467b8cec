//! Geodesic random walks on `S^{n-1}` and their comparison with the exact
//! heat kernel.
//!
//! A walk of `N` steps of length `δ` approximates Brownian motion run for
//! `t = N δ² / (2(n-1))`.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::{g_exact_scaled, ExactKernelParams};
use crate::quadrature::gauss_legendre;
use crate::sphere::{log_surface_area, UnitVector};

/// Largest step length of the small-step regime.
pub const MAX_STEP: f64 = 0.1;

/// Fewest endpoints accepted by [`compare_to_kernel`].
pub const MIN_WALKERS: usize = 1000;

/// Cells of the tabulated predicted CDF.
const CDF_CELLS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub n: usize,
    pub step_size: f64,
    pub num_steps: usize,
    pub num_walkers: usize,
    pub seed: u64,
    pub start: UnitVector,
}

impl WalkConfig {
    /// Walk from the north pole `e_n` for the number of steps closest to
    /// diffusion time `t`.
    pub fn for_time(n: usize, t: f64, step_size: f64, num_walkers: usize, seed: u64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParams(format!("t must be nonnegative, got {t}")));
        }
        let cfg =
            Self { n, step_size, num_steps: steps_for_time(n, t, step_size), num_walkers, seed, start: north_pole(n)? };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::DimensionTooSmall { n: self.n, min: 2 });
        }
        if self.start.dim() != self.n {
            return Err(Error::DimensionMismatch { left: self.start.dim(), right: self.n });
        }
        if !(self.step_size > 0.0 && self.step_size <= MAX_STEP) {
            return Err(Error::InvalidParams(format!("step size must lie in (0, {MAX_STEP}], got {}", self.step_size)));
        }
        if self.num_walkers == 0 {
            return Err(Error::InvalidParams("need at least one walker".into()));
        }
        Ok(())
    }

    /// Diffusion time `N δ² / (2(n-1))`.
    pub fn time(&self) -> f64 {
        walk_time(self.n, self.step_size, self.num_steps)
    }
}

pub fn walk_time(n: usize, step_size: f64, num_steps: usize) -> f64 {
    num_steps as f64 * step_size * step_size / (2.0 * (n as f64 - 1.0))
}

/// Step count whose [`walk_time`] is nearest `t`.
pub fn steps_for_time(n: usize, t: f64, step_size: f64) -> usize {
    (2.0 * (n as f64 - 1.0) * t / (step_size * step_size)).round() as usize
}

/// `e_n = (0, …, 0, 1)`.
pub fn north_pole(n: usize) -> Result<UnitVector> {
    if n < 2 {
        return Err(Error::DimensionTooSmall { n, min: 2 });
    }
    let mut v = vec![0.0; n];
    v[n - 1] = 1.0;
    UnitVector::new(v)
}

fn walker_rng(seed: u64, walker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walker as u64);
    rng
}

/// One geodesic step of length `delta` in a uniformly random tangent
/// direction, renormalized.
fn step(x: &mut [f64], delta: f64, rng: &mut ChaCha8Rng, dir: &mut [f64]) {
    loop {
        for d in dir.iter_mut() {
            *d = StandardNormal.sample(rng);
        }
        let radial: f64 = dir.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        for (d, xi) in dir.iter_mut().zip(x.iter()) {
            *d -= radial * xi;
        }
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for d in dir.iter_mut() {
                *d /= norm;
            }
            break;
        }
    }
    let (s, c) = delta.sin_cos();
    for (xi, d) in x.iter_mut().zip(dir.iter()) {
        *xi = c * *xi + s * d;
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for xi in x.iter_mut() {
        *xi /= norm;
    }
}

fn run_walker(cfg: &WalkConfig, walker: usize, stride: Option<usize>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = walker_rng(cfg.seed, walker);
    let mut x = cfg.start.as_slice().to_vec();
    let mut dir = vec![0.0; cfg.n];
    let mut path = Vec::new();
    if stride.is_some() {
        path.push(x.clone());
    }
    for k in 1..=cfg.num_steps {
        step(&mut x, cfg.step_size, &mut rng, &mut dir);
        if let Some(s) = stride {
            if k % s == 0 || k == cfg.num_steps {
                path.push(x.clone());
            }
        }
    }
    (x, path)
}

/// Endpoints of `num_walkers` independent walks.
pub fn walk(cfg: &WalkConfig) -> Result<Vec<UnitVector>> {
    cfg.validate()?;
    (0..cfg.num_walkers).into_par_iter().map(|w| UnitVector::new(run_walker(cfg, w, None).0)).collect()
}

/// Recorded positions of one walker, in Cartesian coordinates.
pub type Path = Vec<Vec<f64>>;

/// Endpoints plus every `stride`-th position (and the last) of each walk.
pub fn walk_with_paths(cfg: &WalkConfig, stride: usize) -> Result<(Vec<UnitVector>, Vec<Path>)> {
    cfg.validate()?;
    if stride == 0 {
        return Err(Error::InvalidParams("path stride must be positive".into()));
    }
    let runs: Vec<(Vec<f64>, Vec<Vec<f64>>)> =
        (0..cfg.num_walkers).into_par_iter().map(|w| run_walker(cfg, w, Some(stride))).collect();
    let mut ends = Vec::with_capacity(runs.len());
    let mut paths = Vec::with_capacity(runs.len());
    for (e, p) in runs {
        ends.push(UnitVector::new(e)?);
        paths.push(p);
    }
    Ok((ends, paths))
}

/// CSV with columns `walker,step,x0,…` where `step` counts recorded
/// positions.
pub fn write_paths_csv<W: Write>(paths: &[Vec<Vec<f64>>], mut out: W) -> std::io::Result<()> {
    let n = paths.first().and_then(|p| p.first()).map_or(0, Vec::len);
    let cols: Vec<String> = (0..n).map(|j| format!("x{j}")).collect();
    writeln!(out, "walker,step,{}", cols.join(","))?;
    for (w, path) in paths.iter().enumerate() {
        for (k, x) in path.iter().enumerate() {
            let coords: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{w},{k},{}", coords.join(","))?;
        }
    }
    Ok(())
}

/// Marginal law of the geodesic distance from the source under the heat
/// kernel: density `p(θ) = A_{S^{n-2}} sin^{n-2}θ G(cos θ; t)`, tabulated as
/// a CDF on a uniform grid.
#[derive(Debug, Clone)]
pub struct AngleDistribution {
    cell: f64,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

impl AngleDistribution {
    pub fn heat_kernel(n: usize, t: f64) -> Result<Self> {
        let params = ExactKernelParams::new(n, t)?;
        let log_ratio = log_surface_area(n - 1)? - log_surface_area(n)?;
        let p = |theta: f64| -> Result<f64> {
            if theta <= 0.0 || theta >= std::f64::consts::PI {
                return Ok(0.0);
            }
            let s = g_exact_scaled(theta.cos(), &params)?.value;
            Ok((log_ratio + (n as f64 - 2.0) * theta.sin().ln()).exp() * s)
        };
        Self::from_density(p)
    }

    /// The uniform law on the sphere, `p ∝ sin^{n-2}θ`.
    pub fn uniform(n: usize) -> Result<Self> {
        let log_ratio = log_surface_area(n - 1)? - log_surface_area(n)?;
        Self::from_density(|theta: f64| Ok((log_ratio + (n as f64 - 2.0) * theta.sin().max(0.0).ln()).exp()))
    }

    fn from_density<F: Fn(f64) -> Result<f64>>(p: F) -> Result<Self> {
        let cell = std::f64::consts::PI / CDF_CELLS as f64;
        let (nodes, weights) = gauss_legendre(8);
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        let mut density = Vec::with_capacity(CDF_CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..CDF_CELLS {
            let a = i as f64 * cell;
            density.push(p(a)?.max(0.0));
            for (x, w) in nodes.iter().zip(&weights) {
                acc += 0.5 * cell * w * p(a + 0.5 * cell * (x + 1.0))?.max(0.0);
            }
            cdf.push(acc);
        }
        density.push(p(std::f64::consts::PI)?.max(0.0));
        if (acc - 1.0).abs() > 1e-6 {
            log::warn!("predicted angle density integrates to {acc}");
        }
        Ok(Self { cell, cdf, density })
    }

    /// `P(Θ ≤ θ)`, by cubic Hermite interpolation of the table.
    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if theta >= std::f64::consts::PI {
            return self.cdf[CDF_CELLS];
        }
        let u = theta / self.cell;
        let i = (u.floor() as usize).min(CDF_CELLS - 1);
        let s = u - i as f64;
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.density[i] * self.cell, self.density[i + 1] * self.cell);
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        (h00 * f0 + h10 * d0 + h01 * f1 + h11 * d1).clamp(0.0, 1.0)
    }
}

/// Kolmogorov-Smirnov distance between a sample and a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let w = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / w).max((i + 1) as f64 / w - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Geodesic distances of `endpoints` from `start`.
pub fn angles_from(start: &UnitVector, endpoints: &[UnitVector]) -> Result<Vec<f64>> {
    endpoints.iter().map(|e| Ok(start.cos_angle(e)?.acos())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub count: usize,
    pub empirical_density: f64,
    /// Bin average of the predicted density.
    pub predicted_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n: usize,
    pub t: f64,
    pub walkers: usize,
    pub ks_statistic: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Compares the endpoint angles with the heat-kernel prediction at time `t`.
pub fn compare_to_kernel(
    start: &UnitVector,
    endpoints: &[UnitVector],
    n: usize,
    t: f64,
    bins: usize,
) -> Result<ComparisonReport> {
    if endpoints.len() < MIN_WALKERS {
        return Err(Error::TooFewWalkers { got: endpoints.len(), min: MIN_WALKERS });
    }
    if bins == 0 {
        return Err(Error::InvalidParams("need at least one bin".into()));
    }
    if start.dim() != n {
        return Err(Error::DimensionMismatch { left: start.dim(), right: n });
    }
    let theta = angles_from(start, endpoints)?;
    let dist = AngleDistribution::heat_kernel(n, t)?;
    let ks = ks_statistic(&theta, |x| dist.cdf(x));
    let width = std::f64::consts::PI / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &theta {
        counts[((x / width) as usize).min(bins - 1)] += 1;
    }
    let w = theta.len() as f64;
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(b, &count)| {
            let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
            HistogramBin {
                theta_lo: lo,
                theta_hi: hi,
                count,
                empirical_density: count as f64 / (w * width),
                predicted_density: (dist.cdf(hi) - dist.cdf(lo)) / width,
            }
        })
        .collect();
    Ok(ComparisonReport { n, t, walkers: endpoints.len(), ks_statistic: ks, histogram })
}
