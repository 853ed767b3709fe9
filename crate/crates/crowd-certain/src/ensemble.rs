//! Per-worker classifier ensembles.
//!
//! Every worker gets G forests trained on that worker's labels, one per seed
//! index g. The seed is shared across workers so duplicate workers produce
//! identical models. Predicted probabilities are binarized per classifier
//! with a threshold chosen on the training fold, and the per-worker majority
//! over the G binarized votes is the worker's predicted label.

use ndarray::{Array3, Array4, ArrayView2, ArrayView3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{ForestConfig, RandomForest};

/// How to pick the probability cut for binarizing classifier outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Largest candidate maximizing true-positive rate minus false-positive
    /// rate over the unique predicted probabilities.
    #[default]
    RocYouden,
    /// Always 0.5.
    FixedHalf,
}

/// Trains classifier `g` for one worker. Identical inputs and `g` rebuild an
/// identical model.
pub fn train_worker_ensemble(
    train_features: ArrayView2<'_, f64>,
    worker_labels: &[u8],
    cfg: &ForestConfig,
    g: u64,
) -> Result<RandomForest> {
    RandomForest::fit(train_features, worker_labels, cfg, g)
}

/// Binarization threshold for one classifier's probabilities against the
/// labels it was trained on. Single-class labels fall back to 0.5.
pub fn binarization_threshold(probs: &[f64], labels: &[u8], mode: ThresholdMode) -> Result<f64> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(Error::EmptyInput("binarization_threshold needs matched non-empty inputs".into()));
    }
    if matches!(mode, ThresholdMode::FixedHalf) {
        return Ok(0.5);
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(0.5);
    }

    let mut candidates: Vec<f64> = probs.to_vec();
    candidates.sort_by(|a, b| a.total_cmp(b));
    candidates.dedup();

    let mut best_theta = candidates[0];
    let mut best_j = f64::NEG_INFINITY;
    for &theta in &candidates {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (&p, &y) in probs.iter().zip(labels) {
            if p >= theta {
                if y == 1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let j = tp as f64 / positives as f64 - fp as f64 / negatives as f64;
        // Candidates ascend, so >= resolves ties to the largest maximizer.
        if j >= best_j - 1e-12 {
            best_j = best_j.max(j);
            best_theta = theta;
        }
    }
    Ok(best_theta)
}

/// Majority over one worker's G binarized votes; an even split goes to the
/// positive class.
pub fn classifier_majority(votes: &[u8]) -> u8 {
    let ones: usize = votes.iter().map(|&v| v as usize).sum();
    u8::from(2 * ones >= votes.len())
}

/// Trained models and binarization thresholds for all workers and classes.
pub struct WorkerEnsembles {
    /// forests[m][k][g]
    forests: Vec<Vec<Vec<RandomForest>>>,
    /// M x K x G thresholds chosen on the training fold.
    pub thresholds: Array3<f64>,
    pub config: ForestConfig,
}

/// Prediction tensors for a set of instances.
pub struct EnsemblePredictions {
    /// N x M x K x G predicted probabilities in [0, 1].
    pub probs: Array4<f64>,
    /// M x K x G binarization thresholds (copied from training).
    pub thresholds: Array3<f64>,
    /// N x M x K x G binarized votes; 1 iff prob strictly exceeds threshold.
    pub labels: Array4<u8>,
    /// N x M x K per-worker majority over the G votes.
    pub majority: Array3<u8>,
}

impl WorkerEnsembles {
    /// Trains the M x K x G forests on one fold's features and worker labels
    /// (shape N_train x M x K) and fixes the binarization thresholds from the
    /// same fold.
    pub fn fit(
        train_features: ArrayView2<'_, f64>,
        worker_labels: ArrayView3<'_, u8>,
        cfg: &ForestConfig,
        threshold_mode: ThresholdMode,
    ) -> Result<Self> {
        cfg.validate()?;
        let (n, m, k) = worker_labels.dim();
        if n != train_features.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} label rows vs {} feature rows",
                n,
                train_features.nrows()
            )));
        }
        if n == 0 {
            return Err(Error::EmptyInput("cannot train on an empty fold".into()));
        }
        let g_count = cfg.g_ensembles;

        let jobs: Vec<(usize, usize, usize)> = (0..m)
            .flat_map(|a| (0..k).flat_map(move |c| (0..g_count).map(move |g| (a, c, g))))
            .collect();
        let trained: Vec<(usize, usize, usize, RandomForest, f64)> = jobs
            .into_par_iter()
            .map(|(a, c, g)| {
                let labels: Vec<u8> = (0..n).map(|i| worker_labels[[i, a, c]]).collect();
                let forest = train_worker_ensemble(train_features, &labels, cfg, g as u64)?;
                let probs = forest.predict_proba(train_features);
                let theta = binarization_threshold(&probs, &labels, threshold_mode)?;
                Ok((a, c, g, forest, theta))
            })
            .collect::<Result<_>>()?;

        let mut forests: Vec<Vec<Vec<Option<RandomForest>>>> =
            vec![vec![(0..g_count).map(|_| None).collect(); k]; m];
        let mut thresholds = Array3::zeros((m, k, g_count));
        for (a, c, g, forest, theta) in trained {
            thresholds[[a, c, g]] = theta;
            forests[a][c][g] = Some(forest);
        }
        let forests = forests
            .into_iter()
            .map(|per_class| {
                per_class
                    .into_iter()
                    .map(|per_g| per_g.into_iter().map(|f| f.expect("all jobs ran")).collect())
                    .collect()
            })
            .collect();
        Ok(Self { forests, thresholds, config: *cfg })
    }

    pub fn n_workers(&self) -> usize {
        self.forests.len()
    }

    pub fn n_classes(&self) -> usize {
        self.forests.first().map_or(0, |w| w.len())
    }

    pub fn forest(&self, worker: usize, class: usize, g: usize) -> &RandomForest {
        &self.forests[worker][class][g]
    }

    /// Runs every model over `features` and assembles the prediction tensors.
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> EnsemblePredictions {
        let n = features.nrows();
        let m = self.n_workers();
        let k = self.n_classes();
        let g_count = self.config.g_ensembles;

        let per_model: Vec<((usize, usize, usize), Vec<f64>)> = (0..m)
            .flat_map(|a| (0..k).flat_map(move |c| (0..g_count).map(move |g| (a, c, g))))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(a, c, g)| ((a, c, g), self.forests[a][c][g].predict_proba(features)))
            .collect();

        let mut probs = Array4::zeros((n, m, k, g_count));
        for ((a, c, g), col) in per_model {
            for (i, p) in col.into_iter().enumerate() {
                probs[[i, a, c, g]] = p;
            }
        }

        let mut labels = Array4::zeros((n, m, k, g_count));
        let mut majority = Array3::zeros((n, m, k));
        for i in 0..n {
            for a in 0..m {
                for c in 0..k {
                    let mut votes = vec![0u8; g_count];
                    for g in 0..g_count {
                        votes[g] =
                            u8::from(probs[[i, a, c, g]] > self.thresholds[[a, c, g]]);
                        labels[[i, a, c, g]] = votes[g];
                    }
                    majority[[i, a, c]] = classifier_majority(&votes);
                }
            }
        }
        EnsemblePredictions { probs, thresholds: self.thresholds.clone(), labels, majority }
    }
}
