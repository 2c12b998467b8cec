use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predict, train_lenient, SvmError, SvmModel, SvmProblem, SvmResult};
use crate::kernel::GramMatrix;

/// One binary model of the one-vs-one reduction: class `positive` is `+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    /// Training-set indices the pair model was fit on.
    pub indices: Vec<usize>,
    pub model: SvmModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub num_classes: usize,
    pub training_size: usize,
    pub pairs: Vec<PairModel>,
}

/// One-vs-one training; `labels` are class indices in `0..num_classes` and
/// every class must be present.
pub fn train_multiclass(
    gram: &GramMatrix,
    labels: &[usize],
    num_classes: usize,
    c: f64,
    tol: f64,
    seed: u64,
) -> SvmResult<MulticlassModel> {
    let m = gram.dim();
    if labels.len() != m {
        return Err(SvmError::DimensionMismatch { left: labels.len(), right: m });
    }
    if num_classes < 2 {
        return Err(SvmError::InvalidProblem(format!("need at least 2 classes, got {num_classes}")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(SvmError::InvalidProblem(format!("label {bad} is out of range")));
    }
    let mut members = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    if let Some(class) = members.iter().position(Vec::is_empty) {
        return Err(SvmError::EmptyClass { class });
    }

    let pairs: Vec<(usize, usize)> = (0..num_classes).flat_map(|a| (a + 1..num_classes).map(move |b| (a, b))).collect();
    let models = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut indices = members[a].clone();
            indices.extend_from_slice(&members[b]);
            indices.sort_unstable();
            let y: Vec<i8> = indices.iter().map(|&i| if labels[i] == a { 1 } else { -1 }).collect();
            let sub = gram.select(&indices);
            let problem = SvmProblem::new(&sub, &y, c).with_tol(tol).with_seed(seed);
            let model = train_lenient(&problem)?;
            Ok(PairModel { positive: a, negative: b, indices, model })
        })
        .collect::<SvmResult<Vec<_>>>()?;
    Ok(MulticlassModel { num_classes, training_size: m, pairs: models })
}

impl MulticlassModel {
    /// Majority vote over the pairwise decisions; ties go to the class with
    /// the larger summed decision magnitude, then to the lower class index.
    pub fn predict(&self, k_row: &[f64]) -> SvmResult<usize> {
        if k_row.len() != self.training_size {
            return Err(SvmError::DimensionMismatch { left: k_row.len(), right: self.training_size });
        }
        let mut votes = vec![0usize; self.num_classes];
        let mut strength = vec![0.0f64; self.num_classes];
        let mut sub = Vec::new();
        for p in &self.pairs {
            sub.clear();
            sub.extend(p.indices.iter().map(|&i| k_row[i]));
            let d = predict(&p.model, &sub)?;
            let winner = if d >= 0.0 { p.positive } else { p.negative };
            votes[winner] += 1;
            strength[winner] += d.abs();
        }
        let mut best = 0;
        for k in 1..self.num_classes {
            if votes[k] > votes[best] || (votes[k] == votes[best] && strength[k] > strength[best]) {
                best = k;
            }
        }
        Ok(best)
    }
}
