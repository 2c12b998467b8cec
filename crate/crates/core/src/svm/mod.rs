//! Soft-margin kernel SVM on precomputed Gram matrices.
//!
//! [`train`] solves the dual by SMO, [`train_multiclass`] reduces `k` classes
//! to `k(k-1)/2` pairwise problems, and [`vc_estimate`] turns a trained model
//! into the empirical capacity bound `μ*_VC = min{n, R²/M²} + 1`.

mod multiclass;
mod smo;
mod vc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{GramMatrix, KernelSpec};

pub use multiclass::{train_multiclass, MulticlassModel, PairModel};
pub use smo::{dual_objective, train, train_lenient};
pub use vc::{generalization_bound, minimum_enclosing_ball, vc_estimate, MebResult, VcEstimate};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("invalid SVM problem: {0}")]
    InvalidProblem(String),
    #[error("class {class} has no samples")]
    EmptyClass { class: usize },
    #[error("SMO stopped after {iterations} iterations without meeting the KKT tolerance")]
    NoConvergence {
        iterations: usize,
        /// Best iterate reached, with `converged = false`.
        model: Box<SvmModel>,
    },
    #[error("length {left} does not match the training set size {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unsupported model schema version {0}")]
    SchemaVersion(u32),
    #[error("model JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type SvmResult<T> = std::result::Result<T, SvmError>;

/// Binary soft-margin problem over a precomputed Gram matrix.
#[derive(Debug, Clone)]
pub struct SvmProblem<'a> {
    pub gram: &'a GramMatrix,
    /// `±1` per sample.
    pub labels: &'a [i8],
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Iteration cap, in multiples of the sample count.
    pub max_passes: usize,
    /// Seed of the permutation that breaks working-set ties.
    pub seed: u64,
}

impl<'a> SvmProblem<'a> {
    pub fn new(gram: &'a GramMatrix, labels: &'a [i8], c: f64) -> Self {
        Self { gram, labels, c, tol: 1e-3, max_passes: 10_000, seed: 0 }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_passes(mut self, max_passes: usize) -> Self {
        self.max_passes = max_passes;
        self
    }

    pub fn validate(&self) -> SvmResult<()> {
        let m = self.gram.dim();
        if self.labels.len() != m {
            return Err(SvmError::DimensionMismatch { left: self.labels.len(), right: m });
        }
        if let Some(bad) = self.labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(SvmError::InvalidProblem(format!("label {bad} is not ±1")));
        }
        if !self.labels.contains(&1) || !self.labels.contains(&-1) {
            return Err(SvmError::InvalidProblem("both classes must be present".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvmError::InvalidProblem(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(SvmError::InvalidProblem(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_passes == 0 {
            return Err(SvmError::InvalidProblem("max_passes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub schema_version: u32,
    /// `α_i y_i` for every training sample.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    /// Indices with `α_i > 0`.
    pub support_indices: Vec<usize>,
    pub spec: KernelSpec,
    pub sample_ids: Vec<String>,
    pub c: f64,
    /// `Σ_ij α_i α_j y_i y_j K_ij`.
    pub w_norm_sq: f64,
    /// Dual objective `Σ α_i - ½ w_norm_sq`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    /// Geometric margin `1/‖w‖`.
    pub fn margin(&self) -> f64 {
        1.0 / self.w_norm_sq.sqrt()
    }

    /// `α_i` (without the label sign).
    pub fn alphas(&self) -> Vec<f64> {
        self.dual_coeffs.iter().map(|v| v.abs()).collect()
    }

    pub fn to_json(&self) -> SvmResult<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> SvmResult<Self> {
        let model: SvmModel = serde_json::from_str(text)?;
        if model.schema_version != crate::SCHEMA_VERSION {
            return Err(SvmError::SchemaVersion(model.schema_version));
        }
        Ok(model)
    }
}

/// Decision value `Σ_i α_i y_i K(x_i, x) + b` for one test sample given its
/// kernel values against the training set.
pub fn predict(model: &SvmModel, k_row: &[f64]) -> SvmResult<f64> {
    if k_row.len() != model.dual_coeffs.len() {
        return Err(SvmError::DimensionMismatch { left: k_row.len(), right: model.dual_coeffs.len() });
    }
    let s: f64 = model.support_indices.iter().map(|&i| model.dual_coeffs[i] * k_row[i]).sum();
    Ok(s + model.bias)
}
