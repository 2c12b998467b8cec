use std::collections::BTreeMap;
use std::fmt::{self, Display, Write as _};
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, LabeledDataset};
use crate::error::{Error, Result};
use crate::heat::sweet_spot_time;
use crate::kernel::{gram_matrix_with_ids, GramMatrix, KernelKind, KernelSpec};
use crate::sphere::SphereMapKind;
use crate::svm::train_multiclass;

/// Multipliers `t*` of the sweet-spot time `log n / n`.
pub const DEFAULT_T_STAR_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

pub const DEFAULT_C_GRID: [f64; 5] = [0.1, 1.0, 10.0, 100.0, 1000.0];

/// Test-fold index sets; each class is shuffled and dealt round-robin, the
/// dealing position carrying over from one class to the next.
pub fn stratified_kfold<T: Ord + Display>(
    labels: &[T],
    k: usize,
    seed: u64,
) -> std::result::Result<Vec<Vec<usize>>, DataError> {
    if k < 2 {
        return Err(DataError::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let mut by_class: BTreeMap<&T, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((class, members)) = by_class.iter().find(|(_, v)| v.len() < k) {
        return Err(DataError::ClassSmallerThanK { class: class.to_string(), size: members.len(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Per-fold accuracy of one-vs-one SVMs trained on the complement of each
/// test fold, using sub-blocks of the full Gram matrix.
pub fn cv_accuracy(
    gram: &GramMatrix,
    labels: &[usize],
    num_classes: usize,
    folds: &[Vec<usize>],
    c: f64,
    tol: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    folds
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; gram.dim()];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..gram.dim()).filter(|&i| !in_test[i]).collect();
            let sub = gram.select(&train);
            let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = train_multiclass(&sub, &y, num_classes, c, tol, seed)?;
            let rows = gram.cross(test, &train);
            let mut correct = 0usize;
            for (row, &i) in rows.iter().zip(test) {
                if model.predict(row)? == labels[i] {
                    correct += 1;
                }
            }
            Ok(correct as f64 / test.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Lin,
    Rbf,
    Cos,
    Prx,
    Ext,
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lin" => Ok(Self::Lin),
            "rbf" => Ok(Self::Rbf),
            "cos" => Ok(Self::Cos),
            "prx" => Ok(Self::Prx),
            "ext" => Ok(Self::Ext),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

impl Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lin => "lin",
            Self::Rbf => "rbf",
            Self::Cos => "cos",
            Self::Prx => "prx",
            Self::Ext => "ext",
        })
    }
}

impl KernelFamily {
    pub fn is_hyperspherical(&self) -> bool {
        matches!(self, Self::Cos | Self::Prx | Self::Ext)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub family: KernelFamily,
    pub map: SphereMapKind,
    /// Sweet-spot multipliers for `prx` and `ext`.
    pub t_star_grid: Vec<f64>,
    /// `γ` values for `rbf`; empty means `{¼, ½, 1, 2, 4} / (n · Var x)`.
    pub gamma_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    /// SMO stopping tolerance.
    pub tol: f64,
}

impl GridConfig {
    pub fn new(family: KernelFamily, map: SphereMapKind) -> Self {
        Self {
            family,
            map,
            t_star_grid: DEFAULT_T_STAR_GRID.to_vec(),
            gamma_grid: Vec::new(),
            c_grid: DEFAULT_C_GRID.to_vec(),
            folds: 5,
            seed: 0,
            tol: 1e-3,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_c_grid(mut self, c_grid: Vec<f64>) -> Self {
        self.c_grid = c_grid;
        self
    }

    pub fn with_t_star_grid(mut self, t_star_grid: Vec<f64>) -> Self {
        self.t_star_grid = t_star_grid;
        self
    }

    /// Kernel specs of the grid with the `t*` each came from.
    fn specs(&self, data: &LabeledDataset) -> Result<Vec<(KernelSpec, Option<f64>)>> {
        let n = data.num_features();
        let map = self.map;
        match self.family {
            KernelFamily::Lin => Ok(vec![(KernelSpec::linear(), None)]),
            KernelFamily::Cos => Ok(vec![(KernelSpec::cosine(map)?, None)]),
            KernelFamily::Rbf => {
                let gammas = if self.gamma_grid.is_empty() {
                    let scale = 1.0 / (n as f64 * feature_variance(data).max(f64::MIN_POSITIVE));
                    DEFAULT_T_STAR_GRID.iter().map(|g| g * scale).collect()
                } else {
                    self.gamma_grid.clone()
                };
                gammas.into_iter().map(|g| Ok((KernelSpec::rbf(g)?, None))).collect()
            }
            KernelFamily::Prx | KernelFamily::Ext => self
                .t_star_grid
                .iter()
                .map(|&ts| {
                    let t = sweet_spot_time(n, ts)?;
                    let spec = if self.family == KernelFamily::Prx {
                        KernelSpec::parametrix(t, map)?
                    } else {
                        KernelSpec::exact_heat(n, t, map)?
                    };
                    Ok((spec, Some(ts)))
                })
                .collect(),
        }
    }
}

fn feature_variance(data: &LabeledDataset) -> f64 {
    let count = (data.len() * data.num_features()) as f64;
    let mean = data.matrix.iter().flatten().sum::<f64>() / count;
    data.matrix.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub spec: KernelSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    pub c: f64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub schema_version: u32,
    pub seed: u64,
    pub family: KernelFamily,
    pub folds: usize,
    pub m: usize,
    pub n: usize,
    pub classes: Vec<String>,
    pub points: Vec<GridPoint>,
    /// Index into `points` of the highest mean accuracy (first on ties).
    pub best: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl CvReport {
    pub fn best_point(&self) -> &GridPoint {
        &self.points[self.best]
    }

    /// Aligned text table with accuracies in percent to two decimals.
    pub fn to_table(&self) -> String {
        let mut header = vec!["kernel".to_string(), "t*".into(), "param".into(), "C".into()];
        header.extend((1..=self.folds).map(|f| format!("fold{f}")));
        header.push("mean".into());
        let mut rows = vec![header];
        for (i, p) in self.points.iter().enumerate() {
            let param = match p.spec.kind {
                KernelKind::GaussianRbf { gamma } => format!("gamma={gamma:.4e}"),
                KernelKind::Parametrix { t } | KernelKind::ExactHeat { t, .. } => {
                    format!("t={t:.4e}")
                }
                _ => "-".into(),
            };
            let mut row = vec![
                format!("{}{}", p.spec.kind.short_name(), if i == self.best { "*" } else { "" }),
                p.t_star.map_or("-".into(), |t| format!("{t}")),
                param,
                format!("{}", p.c),
            ];
            row.extend(p.fold_accuracies.iter().map(|a| format!("{:.2}", 100.0 * a)));
            row.push(format!("{:.2}", 100.0 * p.mean_accuracy));
            rows.push(row);
        }
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  "));
        }
        out
    }

    /// One CSV row per grid point with full-precision accuracies.
    pub fn write_scores_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let folds: Vec<String> = (1..=self.folds).map(|f| format!("fold{f}")).collect();
        writeln!(out, "kernel,t_star,param,c,{},mean", folds.join(","))?;
        for p in &self.points {
            let param = match p.spec.kind {
                KernelKind::GaussianRbf { gamma } => gamma,
                KernelKind::Parametrix { t } | KernelKind::ExactHeat { t, .. } => t,
                _ => f64::NAN,
            };
            let accs: Vec<String> = p.fold_accuracies.iter().map(|a| a.to_string()).collect();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.spec.kind.short_name(),
                p.t_star.map_or(String::new(), |t| t.to_string()),
                if param.is_nan() { String::new() } else { param.to_string() },
                p.c,
                accs.join(","),
                p.mean_accuracy
            )?;
        }
        Ok(())
    }
}

/// Grid search over kernel hyperparameters and `C`, scoring each point by
/// stratified k-fold mean accuracy. One Gram matrix is built per kernel
/// setting and shared by all `C` values and folds.
pub fn grid_search_cv(data: &LabeledDataset, cfg: &GridConfig) -> Result<CvReport> {
    if cfg.c_grid.is_empty() || cfg.c_grid.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::InvalidParams("C grid must be nonempty and positive".into()));
    }
    if cfg.family.is_hyperspherical() == (cfg.map == SphereMapKind::None) {
        return Err(Error::InvalidParams(format!(
            "kernel {} {} a sphere map",
            cfg.family,
            if cfg.family.is_hyperspherical() { "needs" } else { "does not take" }
        )));
    }
    let (labels, classes) = data.class_indices();
    let folds = stratified_kfold(&labels, cfg.folds, cfg.seed)?;
    let specs = cfg.specs(data)?;
    if specs.is_empty() {
        return Err(Error::InvalidParams("empty kernel grid".into()));
    }
    let per_spec: Vec<Vec<GridPoint>> = specs
        .par_iter()
        .map(|&(spec, t_star)| {
            let gram = gram_matrix_with_ids(&spec, &data.matrix, data.sample_ids.clone())?;
            cfg.c_grid
                .par_iter()
                .map(|&c| {
                    let accs = cv_accuracy(&gram, &labels, classes.len(), &folds, c, cfg.tol, cfg.seed)?;
                    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                    Ok(GridPoint { spec, t_star, c, fold_accuracies: accs, mean_accuracy: mean })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let points: Vec<GridPoint> = per_spec.into_iter().flatten().collect();
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.mean_accuracy > points[best].mean_accuracy {
            best = i;
        }
    }
    Ok(CvReport {
        schema_version: crate::SCHEMA_VERSION,
        seed: cfg.seed,
        family: cfg.family,
        folds: cfg.folds,
        m: data.len(),
        n: data.num_features(),
        classes,
        points,
        best,
        wall_time: None,
    })
}
