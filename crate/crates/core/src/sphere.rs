//! Maps from feature space onto the unit hypersphere and basic spherical
//! geometry.
//!
//! Nonnegative count data go through the square-root-L1 map, which sends the
//! probability simplex onto the positive orthant of `S^{n-1}`. Signed data use
//! the ordinary projective (L2) normalization.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Tolerance on `|‖x‖ - 1|` accepted for unit vectors.
pub const UNIT_TOL: f64 = 1e-12;

/// A point on `S^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps `values` after checking the norm.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let norm = norm(&values);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnit { norm });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Clamped dot product with another unit vector.
    pub fn cos_angle(&self, other: &UnitVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(dot(&self.0, &other.0).clamp(-1.0, 1.0))
    }
}

/// How a raw feature vector is placed on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereMapKind {
    /// `x_i -> sqrt(x_i / Σ_j x_j)`; requires nonnegative input.
    SqrtL1,
    /// `x -> x / ‖x‖`.
    L2Projective,
    /// Input must already be unit norm.
    None,
}

impl std::str::FromStr for SphereMapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt-l1" => Ok(Self::SqrtL1),
            "l2" => Ok(Self::L2Projective),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidArgument(format!("unknown sphere map `{other}`"))),
        }
    }
}

impl std::fmt::Display for SphereMapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SqrtL1 => "sqrt-l1",
            Self::L2Projective => "l2",
            Self::None => "none",
        })
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large counts
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

fn check_len(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::DimensionTooSmall { n: x.len(), min: 2 });
    }
    Ok(())
}

/// Maps a feature vector onto the unit sphere.
pub fn sphere_map(x: &[f64], kind: SphereMapKind) -> Result<UnitVector> {
    check_len(x)?;
    match kind {
        SphereMapKind::SqrtL1 => {
            if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| **v < 0.0) {
                return Err(Error::NegativeEntry { index, value });
            }
            let total: f64 = x.iter().sum();
            if total <= 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok(UnitVector(x.iter().map(|v| (v / total).sqrt()).collect()))
        }
        SphereMapKind::L2Projective => {
            let nrm = norm(x);
            if nrm == 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok(UnitVector(x.iter().map(|v| v / nrm).collect()))
        }
        SphereMapKind::None => UnitVector::new(x.to_vec()),
    }
}

/// `x·y / (‖x‖‖y‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { left: x.len(), right: y.len() });
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a / nx) * (b / ny)).sum();
    Ok(s.clamp(-1.0, 1.0))
}

/// Great-circle distance `θ = arccos(x̂·ŷ)` in `[0, π]`.
pub fn geodesic_distance(x: &UnitVector, y: &UnitVector) -> Result<f64> {
    Ok(x.cos_angle(y)?.acos())
}

/// `log A_{S^{n-1}} = log 2 + (n/2) log π - log Γ(n/2)`.
pub fn log_surface_area(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::DimensionTooSmall { n, min: 2 });
    }
    let half = n as f64 / 2.0;
    Ok(std::f64::consts::LN_2 + half * PI.ln() - ln_gamma(half))
}

/// Surface area of the unit sphere `S^{n-1} ⊂ R^n`.
pub fn surface_area(n: usize) -> Result<f64> {
    Ok(log_surface_area(n)?.exp())
}
