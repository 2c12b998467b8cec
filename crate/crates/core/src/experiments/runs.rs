use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{grid_search_cv, select_representatives, CvReport, GridConfig, LabeledDataset};
use crate::error::{Error, Result};

/// Per-class representative selection before each run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    /// Representatives kept per class.
    pub m_r: usize,
    /// KMeans restarts per class.
    pub kmeans_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedCvConfig {
    pub grid: GridConfig,
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance: Option<Balance>,
}

impl RepeatedCvConfig {
    pub fn new(grid: GridConfig, runs: usize) -> Self {
        Self { grid, runs, balance: None }
    }

    pub fn with_balance(mut self, m_r: usize, kmeans_runs: usize) -> Self {
        self.balance = Some(Balance { m_r, kmeans_runs });
        self
    }

    /// Seed of each run, drawn from the master seed.
    pub fn run_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.grid.seed);
        (0..self.runs).map(|_| rng.next_u64()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedCvReport {
    pub schema_version: u32,
    pub config: RepeatedCvConfig,
    pub runs: Vec<CvReport>,
    /// Best mean accuracy of each run.
    pub best_accuracies: Vec<f64>,
    /// Average of `best_accuracies`.
    pub mean_best_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl RepeatedCvReport {
    /// Per-run tables followed by the averaged optimum, in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.runs.iter().enumerate() {
            out.push_str(&format!("run {} (seed {})\n", i + 1, r.seed));
            out.push_str(&r.to_table());
            out.push('\n');
        }
        out.push_str(&format!(
            "{} mean of optimal accuracies over {} runs: {:.2}\n",
            self.config.grid.family,
            self.runs.len(),
            100.0 * self.mean_best_accuracy
        ));
        out
    }
}

/// Repeats balancing and grid search `runs` times with seeds drawn from the
/// master seed, and averages each run's optimal mean accuracy.
pub fn repeated_cv(data: &LabeledDataset, cfg: &RepeatedCvConfig) -> Result<RepeatedCvReport> {
    if cfg.runs == 0 {
        return Err(Error::InvalidParams("need at least one run".into()));
    }
    let mut runs = Vec::with_capacity(cfg.runs);
    for seed in cfg.run_seeds() {
        let subset = match cfg.balance {
            Some(b) => {
                let mut keep = Vec::new();
                for class in data.classes() {
                    let ids = select_representatives(data, &class, b.m_r, b.kmeans_runs, seed)?;
                    keep.extend(
                        (0..data.len()).filter(|&i| data.labels[i] == class && ids.contains(&data.sample_ids[i])),
                    );
                }
                keep.sort_unstable();
                data.subset(&keep)
            }
            None => data.clone(),
        };
        let grid = GridConfig { seed, ..cfg.grid.clone() };
        runs.push(grid_search_cv(&subset, &grid)?);
    }
    let best_accuracies: Vec<f64> = runs.iter().map(|r| r.best_point().mean_accuracy).collect();
    let mean_best_accuracy = best_accuracies.iter().sum::<f64>() / best_accuracies.len() as f64;
    Ok(RepeatedCvReport {
        schema_version: crate::SCHEMA_VERSION,
        config: cfg.clone(),
        runs,
        best_accuracies,
        mean_best_accuracy,
        wall_time: None,
    })
}
