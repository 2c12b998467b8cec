//! The five SVM kernels behind one interface, Gram-matrix construction and a
//! dense positive-semidefiniteness check.

use std::fmt;
use std::io::Write;

use dashmap::DashMap;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::{k_exact, ExactKernelParams, TruncationPolicy};
use crate::parametrix::k_prx;
use crate::sphere::{dot, sphere_map, SphereMapKind, UnitVector};

/// Largest Gram dimension accepted by [`psd_check`].
pub const MAX_PSD_DIM: usize = 2000;

/// Relative eigenvalue floor for the PSD test.
pub const PSD_REL_TOL: f64 = 1e-8;

/// Grid on which exact-kernel arguments are memoized during a Gram build.
const W_QUANTUM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    Linear,
    GaussianRbf {
        gamma: f64,
    },
    Cosine,
    Parametrix {
        t: f64,
    },
    ExactHeat {
        t: f64,
        n: usize,
        #[serde(default)]
        truncation: TruncationPolicy,
    },
}

impl KernelKind {
    /// Whether the kernel acts on sphere-mapped inputs.
    pub fn is_hyperspherical(&self) -> bool {
        !matches!(self, KernelKind::Linear | KernelKind::GaussianRbf { .. })
    }

    /// Whether the kernel is positive semidefinite on every input set.
    pub fn is_mercer(&self) -> bool {
        !matches!(self, KernelKind::Parametrix { .. })
    }

    /// Short name used on the command line and in reports.
    pub fn short_name(&self) -> &'static str {
        match self {
            KernelKind::Linear => "lin",
            KernelKind::GaussianRbf { .. } => "rbf",
            KernelKind::Cosine => "cos",
            KernelKind::Parametrix { .. } => "prx",
            KernelKind::ExactHeat { .. } => "ext",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub map: SphereMapKind,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, map: SphereMapKind) -> Result<Self> {
        let spec = Self { kind, map };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear() -> Self {
        Self { kind: KernelKind::Linear, map: SphereMapKind::None }
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        Self::new(KernelKind::GaussianRbf { gamma }, SphereMapKind::None)
    }

    pub fn cosine(map: SphereMapKind) -> Result<Self> {
        Self::new(KernelKind::Cosine, map)
    }

    pub fn parametrix(t: f64, map: SphereMapKind) -> Result<Self> {
        Self::new(KernelKind::Parametrix { t }, map)
    }

    pub fn exact_heat(n: usize, t: f64, map: SphereMapKind) -> Result<Self> {
        Self::new(KernelKind::ExactHeat { t, n, truncation: TruncationPolicy::default() }, map)
    }

    pub fn validate(&self) -> Result<()> {
        let hyper = self.kind.is_hyperspherical();
        if hyper && self.map == SphereMapKind::None {
            return Err(Error::InvalidParams(format!("the {} kernel needs a sphere map", self.kind.short_name())));
        }
        if !hyper && self.map != SphereMapKind::None {
            return Err(Error::InvalidParams(format!(
                "the {} kernel does not take a sphere map",
                self.kind.short_name()
            )));
        }
        match self.kind {
            KernelKind::GaussianRbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")))
            }
            KernelKind::Parametrix { t } if !(t > 0.0 && t.is_finite()) => {
                Err(Error::InvalidParams(format!("t must be positive, got {t}")))
            }
            KernelKind::ExactHeat { t, n, truncation } => ExactKernelParams { n, t, truncation }.validate(),
            _ => Ok(()),
        }
    }

    fn exact_params(&self) -> Option<ExactKernelParams> {
        match self.kind {
            KernelKind::ExactHeat { t, n, truncation } => Some(ExactKernelParams { n, t, truncation }),
            _ => None,
        }
    }

    /// Kernel value of a hyperspherical kind as a function of `w = x̂·ŷ`.
    pub fn eval_cos(&self, w: f64) -> Result<f64> {
        let w = w.clamp(-1.0, 1.0);
        match self.kind {
            KernelKind::Cosine => Ok(w),
            KernelKind::Parametrix { t } => k_prx(w.acos(), t),
            KernelKind::ExactHeat { t, n, truncation } => k_exact(w, &ExactKernelParams { n, t, truncation }),
            _ => Err(Error::InvalidArgument(format!("the {} kernel is not zonal", self.kind.short_name()))),
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        match self.kind {
            KernelKind::ExactHeat { n, .. } if n != len => Err(Error::DimensionMismatch { left: len, right: n }),
            _ => Ok(()),
        }
    }

    fn prepare(&self, x: &[f64]) -> Result<Prepared> {
        self.check_dim(x.len())?;
        if self.kind.is_hyperspherical() {
            Ok(Prepared::Unit(sphere_map(x, self.map)?))
        } else {
            Ok(Prepared::Raw(x.to_vec()))
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Linear => write!(f, "lin"),
            KernelKind::GaussianRbf { gamma } => write!(f, "rbf(gamma={gamma})"),
            KernelKind::Cosine => write!(f, "cos[{}]", self.map),
            KernelKind::Parametrix { t } => write!(f, "prx(t={t})[{}]", self.map),
            KernelKind::ExactHeat { t, n, .. } => write!(f, "ext(n={n}, t={t})[{}]", self.map),
        }
    }
}

enum Prepared {
    Raw(Vec<f64>),
    Unit(UnitVector),
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn eval_prepared(spec: &KernelSpec, x: &Prepared, y: &Prepared, memo: Option<&WMemo>) -> Result<f64> {
    match (x, y) {
        (Prepared::Raw(a), Prepared::Raw(b)) => {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch { left: a.len(), right: b.len() });
            }
            match spec.kind {
                KernelKind::Linear => Ok(dot(a, b)),
                KernelKind::GaussianRbf { gamma } => Ok((-gamma * sq_dist(a, b)).exp()),
                _ => unreachable!("raw inputs only for Euclidean kinds"),
            }
        }
        (Prepared::Unit(a), Prepared::Unit(b)) => {
            let w = a.cos_angle(b)?;
            match memo {
                Some(m) => m.eval(spec, w),
                None => spec.eval_cos(w),
            }
        }
        _ => unreachable!("both inputs are prepared by the same spec"),
    }
}

/// `K(x, y)` for raw feature vectors.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    let a = spec.prepare(x)?;
    let b = spec.prepare(y)?;
    eval_prepared(spec, &a, &b, None)
}

/// Per-build memo of exact-kernel values on the quantized argument.
struct WMemo {
    values: DashMap<i64, f64>,
}

impl WMemo {
    fn new() -> Self {
        Self { values: DashMap::new() }
    }

    fn eval(&self, spec: &KernelSpec, w: f64) -> Result<f64> {
        let key = (w / W_QUANTUM).round() as i64;
        // evaluating at the grid point keeps the entry independent of which
        // pair populated it first
        let value = *self.values.entry(key).or_try_insert_with(|| spec.eval_cos(key as f64 * W_QUANTUM))?;
        Ok(value)
    }
}

/// Symmetric `m × m` kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    m: usize,
    entries: Vec<f64>,
    pub spec: KernelSpec,
    pub sample_ids: Vec<String>,
}

impl GramMatrix {
    /// Wraps precomputed entries; checks shape and exact symmetry.
    pub fn from_entries(entries: Vec<f64>, m: usize, spec: KernelSpec, sample_ids: Vec<String>) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch { left: entries.len(), right: m * m });
        }
        if sample_ids.len() != m {
            return Err(Error::DimensionMismatch { left: sample_ids.len(), right: m });
        }
        for i in 0..m {
            for j in 0..i {
                if entries[i * m + j] != entries[j * m + i] {
                    return Err(Error::InvalidArgument(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(Self { m, entries, spec, sample_ids })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Principal submatrix on `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> GramMatrix {
        let k = idx.len();
        let mut entries = Vec::with_capacity(k * k);
        for &i in idx {
            for &j in idx {
                entries.push(self.get(i, j));
            }
        }
        GramMatrix {
            m: k,
            entries,
            spec: self.spec,
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
        }
    }

    /// Rows `rows` against columns `cols`, e.g. test samples against a
    /// training set.
    pub fn cross(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
        rows.iter().map(|&i| cols.iter().map(|&j| self.get(i, j)).collect()).collect()
    }

    /// Gram matrix with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> GramMatrix {
        GramMatrix { entries: self.entries.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    /// Row-major CSV with 17 significant digits; the header row holds the
    /// sample ids.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.sample_ids.join(","))?;
        for i in 0..self.m {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Gram matrix over `data` with sample ids `"0".."m-1"`.
pub fn gram_matrix(spec: &KernelSpec, data: &[Vec<f64>]) -> Result<GramMatrix> {
    let ids = (0..data.len()).map(|i| i.to_string()).collect();
    gram_matrix_with_ids(spec, data, ids)
}

pub fn gram_matrix_with_ids(spec: &KernelSpec, data: &[Vec<f64>], sample_ids: Vec<String>) -> Result<GramMatrix> {
    spec.validate()?;
    let m = data.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {m}")));
    }
    if sample_ids.len() != m {
        return Err(Error::DimensionMismatch { left: sample_ids.len(), right: m });
    }
    let prepared: Vec<Prepared> = data
        .iter()
        .enumerate()
        .map(|(i, x)| spec.prepare(x).map_err(|e| Error::Pair { i, j: i, source: Box::new(e) }))
        .collect::<Result<_>>()?;
    let memo = spec.exact_params().map(|_| WMemo::new());
    let hyper = spec.kind.is_hyperspherical();

    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (i..m)
                .map(|j| {
                    if i == j && hyper {
                        return Ok(1.0);
                    }
                    eval_prepared(spec, &prepared[i], &prepared[j], memo.as_ref()).map_err(|e| Error::Pair {
                        i,
                        j,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut entries = vec![0.0; m * m];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            entries[i * m + j] = v;
            entries[j * m + i] = v;
        }
    }
    Ok(GramMatrix { m, entries, spec: *spec, sample_ids })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub pass: bool,
}

/// Full symmetric eigendecomposition; passes iff `λ_min ≥ -1e-8 λ_max`.
pub fn psd_check(gram: &GramMatrix) -> Result<PsdReport> {
    let m = gram.dim();
    if m > MAX_PSD_DIM {
        return Err(Error::MatrixTooLarge { m, max: MAX_PSD_DIM });
    }
    let mat = DMatrix::from_row_slice(m, m, gram.entries());
    let eig = mat.symmetric_eigenvalues();
    let lambda_min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = lambda_min >= -PSD_REL_TOL * lambda_max.max(0.0);
    if !pass {
        if gram.spec.kind.is_mercer() {
            log::error!("{} Gram is not PSD: λ_min = {lambda_min:e}, λ_max = {lambda_max:e}", gram.spec);
        } else {
            log::warn!("{} Gram is not PSD: λ_min = {lambda_min:e}, λ_max = {lambda_max:e}", gram.spec);
        }
    }
    Ok(PsdReport { lambda_min, lambda_max, pass })
}
