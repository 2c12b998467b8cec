//! Dataset ingestion, class balancing, stratified cross-validation and
//! hyperparameter grid search.

mod balance;
mod cv;
mod data;
mod runs;
pub mod synthetic;

use thiserror::Error;

pub use balance::{kmeans, select_representatives, KMeansResult};
pub use cv::{
    cv_accuracy, grid_search_cv, stratified_kfold, CvReport, GridConfig, GridPoint, KernelFamily, DEFAULT_C_GRID,
    DEFAULT_T_STAR_GRID,
};
pub use data::{load_csv, parse_csv, LabeledDataset};
pub use runs::{repeated_cv, Balance, RepeatedCvConfig, RepeatedCvReport};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}, column {column}: {message}")]
    ParseError { line: u64, column: usize, message: String },
    #[error("line {line}, column {column}: negative value {value} in count data")]
    NegativeValueForCountData { line: u64, column: usize, value: f64 },
    #[error("class `{class}` has {size} samples, fewer than the {needed} requested")]
    ClassTooSmall { class: String, size: usize, needed: usize },
    #[error("class `{class}` has {size} samples, fewer than k = {k} folds")]
    ClassSmallerThanK { class: String, size: usize, k: usize },
    #[error("class `{0}` has no samples")]
    EmptyClass(String),
    #[error("no column named `{0}`")]
    MissingColumn(String),
    #[error("dataset has {0} samples; at least 2 are needed")]
    TooFewSamples(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
