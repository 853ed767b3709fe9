//! The full aggregation pipeline over a cross-validation plan.
//!
//! Per fold: train each worker's classifier ensemble on the training split,
//! measure uncertainty and consistency there, turn them into worker weights,
//! then aggregate the ensembles' predicted labels on the held-out split with
//! those weights. Held-out labels, scores, and confidences are stitched back
//! into full-dataset tensors.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregate, consistency, worker_weights, AggregationResult, ConsistencyMode,
    PenaltyReference, WorkerWeights,
};
use crate::confidence::ConfidenceScores;
use crate::dataset::{Dataset, FoldPlan};
use crate::ensemble::{ThresholdMode, WorkerEnsembles};
use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::simulation::WorkerPanel;
use crate::uncertainty::{UncertaintyMeasure, UncertaintyScores};

/// Settings for one aggregation run.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CrowdCertainConfig {
    pub forest: ForestConfig,
    pub threshold_mode: ThresholdMode,
    pub measure: UncertaintyMeasure,
    pub mode: ConsistencyMode,
    pub penalty_reference: PenaltyReference,
}

/// Everything computed for a single fold.
pub struct FoldOutcome {
    pub fold: usize,
    pub test_indices: Vec<usize>,
    pub weights: WorkerWeights,
    /// Aggregation over the held-out split.
    pub aggregation: AggregationResult,
    /// Confidence scores over the held-out split.
    pub confidence: ConfidenceScores,
}

/// Stitched cross-validated outputs.
pub struct CrowdCertainRun {
    pub folds: Vec<FoldOutcome>,
    /// N x K labels, each produced by the fold that held the instance out.
    pub labels: Array2<u8>,
    /// N x K weighted scores.
    pub score: Array2<f64>,
    pub freq: Array2<f64>,
    pub beta: Array2<f64>,
    /// M x K weights averaged over folds.
    pub mean_weights: Array2<f64>,
    /// M x K reliabilities averaged over folds.
    pub mean_reliability: Array2<f64>,
}

/// Rows of a worker-label tensor in the given index order.
pub fn select_panel_rows(labels: &Array3<u8>, indices: &[usize]) -> Array3<u8> {
    let (_, m, k) = labels.dim();
    Array3::from_shape_fn((indices.len(), m, k), |(r, a, c)| labels[[indices[r], a, c]])
}

/// Runs one fold: fit on the training split, weigh there, aggregate on the
/// held-out split.
pub fn run_fold(
    dataset: &Dataset,
    panel: &WorkerPanel,
    plan: &FoldPlan,
    fold: usize,
    cfg: &CrowdCertainConfig,
) -> Result<FoldOutcome> {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::BadFolds { n: dataset.n_instances(), k: plan.k_folds });
    }

    let train = dataset.subset(&train_idx);
    let train_labels = select_panel_rows(&panel.labels, &train_idx);
    let ensembles = WorkerEnsembles::fit(
        train.features.view(),
        train_labels.view(),
        &cfg.forest,
        cfg.threshold_mode,
    )?;

    let train_preds = ensembles.predict(train.features.view());
    let delta = UncertaintyScores::compute(&train_preds, cfg.measure)?;
    let penalty_labels = match cfg.penalty_reference {
        PenaltyReference::Eta => train_preds.majority.view(),
        PenaltyReference::Z => train_labels.view(),
    };
    let scores = consistency(&delta, penalty_labels, cfg.mode)?;
    let weights = worker_weights(&scores)?;

    let test = dataset.subset(&test_idx);
    let test_preds = ensembles.predict(test.features.view());
    let aggregation = aggregate(test_preds.majority.view(), &weights)?;
    let confidence = ConfidenceScores::compute(
        test_preds.majority.view(),
        weights.weights.view(),
        aggregation.labels.view(),
    )?;

    Ok(FoldOutcome { fold, test_indices: test_idx, weights, aggregation, confidence })
}

/// Runs every fold of the plan and stitches held-out outputs back together.
pub fn run_cv(
    dataset: &Dataset,
    panel: &WorkerPanel,
    plan: &FoldPlan,
    cfg: &CrowdCertainConfig,
) -> Result<CrowdCertainRun> {
    let n = dataset.n_instances();
    let k = dataset.n_classes();
    let m = panel.n_workers();
    if n < 2 * plan.k_folds {
        return Err(Error::BadFolds { n, k: plan.k_folds });
    }

    let mut labels = Array2::zeros((n, k));
    let mut score = Array2::zeros((n, k));
    let mut freq = Array2::zeros((n, k));
    let mut beta = Array2::zeros((n, k));
    let mut mean_weights = Array2::zeros((m, k));
    let mut mean_reliability = Array2::zeros((m, k));
    let mut folds = Vec::with_capacity(plan.k_folds);

    for fold in 0..plan.k_folds {
        let outcome = run_fold(dataset, panel, plan, fold, cfg)?;
        for (r, &i) in outcome.test_indices.iter().enumerate() {
            for c in 0..k {
                labels[[i, c]] = outcome.aggregation.labels[[r, c]];
                score[[i, c]] = outcome.aggregation.weighted_score[[r, c]];
                freq[[i, c]] = outcome.confidence.freq[[r, c]];
                beta[[i, c]] = outcome.confidence.beta[[r, c]];
            }
        }
        mean_weights += &outcome.weights.weights;
        mean_reliability += &outcome.weights.reliability;
        folds.push(outcome);
    }
    mean_weights /= plan.k_folds as f64;
    mean_reliability /= plan.k_folds as f64;

    Ok(CrowdCertainRun { folds, labels, score, freq, beta, mean_weights, mean_reliability })
}
