//! Tabular dataset ingestion and deterministic k-fold splits.
//!
//! Datasets are feature matrices with one binary ground-truth column per
//! class. CSV files must be UTF-8 with a header row and `,` delimiters;
//! feature cells parse as decimal floats, label cells as 0/1 unless the
//! schema maps a positive-class value set.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A loaded dataset: `n` instances, `f` features, `k` binary label columns.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    /// N x F, every entry finite.
    pub features: Array2<f64>,
    /// N x K, entries in {0, 1}.
    pub truth: Array2<u8>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
        features: Array2<f64>,
        truth: Array2<u8>,
    ) -> Result<Self> {
        let name = name.into();
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset { name });
        }
        if features.nrows() != truth.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows vs {} truth rows",
                features.nrows(),
                truth.nrows()
            )));
        }
        for ((r, c), &v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::BadFeature {
                    row: r,
                    column: feature_names.get(c).cloned().unwrap_or_else(|| c.to_string()),
                    value: v.to_string(),
                });
            }
        }
        if truth.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("truth entries must be 0 or 1".into()));
        }
        Ok(Self { name, feature_names, label_names, features, truth })
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.truth.ncols()
    }

    /// Row subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let features = select_rows(&self.features, indices);
        let truth = select_rows(&self.truth, indices);
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
            features,
            truth,
        }
    }

    /// Writes the dataset back out in the ingestion format. Floats use the
    /// shortest representation that round-trips, so `load_csv` of the output
    /// reproduces the matrix bit for bit.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(Error::Csv)?;
        let mut header: Vec<String> = self.feature_names.clone();
        header.extend(self.label_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_instances() {
            let mut rec: Vec<String> =
                self.features.row(i).iter().map(|v| format!("{v}")).collect();
            rec.extend(self.truth.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Ok(())
    }
}

pub(crate) fn select_rows<T: Clone + num_default::Zeroish>(
    m: &Array2<T>,
    indices: &[usize],
) -> Array2<T> {
    let mut out = Array2::from_elem((indices.len(), m.ncols()), T::zeroish());
    for (r, &i) in indices.iter().enumerate() {
        out.row_mut(r).assign(&m.row(i));
    }
    out
}

/// Tiny helper trait so `select_rows` can allocate for both f64 and u8.
pub(crate) mod num_default {
    pub trait Zeroish: Clone {
        fn zeroish() -> Self;
    }
    impl Zeroish for f64 {
        fn zeroish() -> Self {
            0.0
        }
    }
    impl Zeroish for u8 {
        fn zeroish() -> Self {
            0
        }
    }
}

/// Column layout of a CSV source.
///
/// `label_columns` names one column per class. Feature columns default to
/// every remaining column. When `positive_values` is set, label cells in that
/// set map to 1 and all others to 0; otherwise label cells must literally be
/// 0 or 1.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_columns: Vec<String>,
    #[serde(default)]
    pub feature_columns: Option<Vec<String>>,
    #[serde(default)]
    pub positive_values: Option<HashSet<String>>,
}

impl CsvSchema {
    pub fn single_label(label: impl Into<String>) -> Self {
        Self { label_columns: vec![label.into()], feature_columns: None, positive_values: None }
    }

    pub fn with_positive_values<I, S>(mut self, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.positive_values = Some(values.into_iter().map(Into::into).collect());
        self
    }
}

/// Loads a dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    parse_csv(file, schema, &name)
}

/// Loads a dataset from any CSV reader (bundled data, in-memory tests).
pub fn parse_csv(reader: impl Read, schema: &CsvSchema, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> =
        rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();

    let label_idx: Vec<usize> = schema
        .label_columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| Error::MissingColumn(c.clone()))
        })
        .collect::<Result<_>>()?;
    let feature_idx: Vec<usize> = match &schema.feature_columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::MissingColumn(c.clone()))
            })
            .collect::<Result<_>>()?,
        None => (0..header.len()).filter(|i| !label_idx.contains(i)).collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::Config("schema selects no feature columns".into()));
    }

    let mut features: Vec<f64> = Vec::new();
    let mut truth: Vec<u8> = Vec::new();
    let mut n = 0usize;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for &fi in &feature_idx {
            let raw = record.get(fi).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::BadFeature {
                row,
                column: header[fi].clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::BadFeature {
                    row,
                    column: header[fi].clone(),
                    value: raw.to_string(),
                });
            }
            features.push(v);
        }
        for &li in &label_idx {
            let raw = record.get(li).unwrap_or("").trim();
            let v = match &schema.positive_values {
                Some(pos) => u8::from(pos.contains(raw)),
                None => match raw {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(Error::BadLabel {
                            row,
                            column: header[li].clone(),
                            value: raw.to_string(),
                        })
                    }
                },
            };
            truth.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyDataset { name: name.to_string() });
    }

    let features = Array2::from_shape_vec((n, feature_idx.len()), features)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let truth = Array2::from_shape_vec((n, label_idx.len()), truth)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Dataset::new(
        name,
        feature_idx.iter().map(|&i| header[i].clone()).collect(),
        label_idx.iter().map(|&i| header[i].clone()).collect(),
        features,
        truth,
    )
}

/// Deterministic assignment of `n` instances to `k_folds` near-equal folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k_folds: usize,
    /// assignments[i] is the fold index of instance i.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n_instances(&self) -> usize {
        self.assignments.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }
}

/// Shuffles `[0, n)` with a stream keyed by `seed` and chunks it into `k`
/// folds whose sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n < k {
        return Err(Error::BadFolds { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, "folds");
    order.shuffle(&mut rng);

    let base = n / k;
    let extra = n % k;
    let mut assignments = vec![0usize; n];
    let mut cursor = 0usize;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &i in &order[cursor..cursor + size] {
            assignments[i] = fold;
        }
        cursor += size;
    }
    Ok(FoldPlan { k_folds: k, assignments, seed })
}

pub(crate) fn column_as_vec(v: ArrayView1<'_, u8>) -> Vec<u8> {
    v.iter().copied().collect()
}
