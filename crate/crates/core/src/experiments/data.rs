use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::sphere::SphereMapKind;

/// Column holding sample identifiers, if present.
const ID_COLUMNS: [&str; 2] = ["id", "sample_id"];

/// Sample-major feature matrix with class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub matrix: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
    pub sample_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        matrix: Vec<Vec<f64>>,
        labels: Vec<String>,
        feature_names: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self, DataError> {
        let m = matrix.len();
        if m < 2 {
            return Err(DataError::TooFewSamples(m));
        }
        let n = feature_names.len();
        if labels.len() != m || sample_ids.len() != m || matrix.iter().any(|r| r.len() != n) {
            return Err(DataError::InvalidConfig("inconsistent dataset shape".into()));
        }
        Ok(Self { matrix, labels, feature_names, sample_ids })
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Distinct labels in sorted order.
    pub fn classes(&self) -> Vec<String> {
        self.labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Labels as indices into [`classes`](Self::classes).
    pub fn class_indices(&self) -> (Vec<usize>, Vec<String>) {
        let classes = self.classes();
        let idx = self.labels.iter().map(|l| classes.binary_search(l).expect("label is a class")).collect();
        (idx, classes)
    }

    /// Rows belonging to `class`.
    pub fn members(&self, class: &str) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            matrix: idx.iter().map(|&i| self.matrix[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
        }
    }
}

/// Reads a CSV with a header row; `.gz` files are decompressed on the fly.
///
/// An `id` or `sample_id` column, if present, supplies sample identifiers;
/// otherwise rows are numbered with zero-padded indices. Every other column
/// except `label_column` must be numeric.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    map_hint: SphereMapKind,
) -> Result<LabeledDataset, DataError> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        parse_csv(GzDecoder::new(file), label_column, map_hint)
    } else {
        parse_csv(file, label_column, map_hint)
    }
}

pub fn parse_csv<R: Read>(reader: R, label_column: &str, map_hint: SphereMapKind) -> Result<LabeledDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let label_col = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::MissingColumn(label_column.to_string()))?;
    let id_col = header.iter().position(|h| ID_COLUMNS.contains(&h));
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_col && Some(c) != id_col).collect();
    let feature_names = feature_cols.iter().map(|&c| header[c].to_string()).collect();

    let mut matrix = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(e, row as u64 + 2))?;
        let line = record.position().map_or(row as u64 + 2, |p| p.line());
        let mut values = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| DataError::ParseError {
                line,
                column: c + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DataError::ParseError { line, column: c + 1, message: format!("`{cell}` is not finite") });
            }
            if map_hint == SphereMapKind::SqrtL1 && v < 0.0 {
                return Err(DataError::NegativeValueForCountData { line, column: c + 1, value: v });
            }
            values.push(v);
        }
        matrix.push(values);
        labels.push(record[label_col].to_string());
        ids.push(id_col.map(|c| record[c].to_string()));
    }
    let width = matrix.len().saturating_sub(1).to_string().len();
    let sample_ids = ids.into_iter().enumerate().map(|(i, id)| id.unwrap_or_else(|| format!("{i:0width$}"))).collect();
    LabeledDataset::new(matrix, labels, feature_names, sample_ids)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> DataError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    DataError::ParseError { line, column: 0, message: e.to_string() }
}
