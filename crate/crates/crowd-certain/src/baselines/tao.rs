//! Per-instance weighted voting.
//!
//! A worker's overall quality is the mean held-out accuracy of ten
//! classifiers cross-validated against that worker's own labels; the
//! per-instance quality is the fraction of other workers who agree with the
//! worker there. The combined weight tau * (1 + s^2) is normalized across
//! workers per instance before thresholding the weighted vote, and the same
//! weights feed the freq and Beta confidence formulas.

use ndarray::{Array2, Array3, ArrayView3};

use crate::confidence::beta_confidence;
use crate::dataset::{make_folds, Dataset};
use crate::error::{Error, Result};
use crate::forest::{ForestConfig, RandomForest};

use super::{BaselineMethod, BaselineResult, ConfidencePair};

const CV_FOLDS: usize = 10;

pub fn tao(
    z: ArrayView3<'_, u8>,
    dataset: &Dataset,
    forest_cfg: &ForestConfig,
    seed: u64,
) -> Result<BaselineResult> {
    let (n, m, k) = z.dim();
    if m < 2 {
        return Err(Error::TooFewWorkers { min: 2, got: m });
    }
    if n != dataset.n_instances() || k != dataset.n_classes() {
        return Err(Error::ShapeMismatch(format!(
            "labels {:?} vs dataset {} x {}",
            z.dim(),
            dataset.n_instances(),
            dataset.n_classes()
        )));
    }

    let overall = overall_quality(z, dataset, forest_cfg, seed)?;

    // specific quality: fraction of the other workers matching each label
    let mut weights = Array3::zeros((n, m, k));
    for i in 0..n {
        for c in 0..k {
            for a in 0..m {
                let same = (0..m)
                    .filter(|&b| b != a && z[[i, b, c]] == z[[i, a, c]])
                    .count();
                let specific = same as f64 / (m - 1) as f64;
                weights[[i, a, c]] = overall[[a, c]] * (1.0 + specific * specific);
            }
            // normalize across workers for this instance
            let total: f64 = (0..m).map(|a| weights[[i, a, c]]).sum();
            for a in 0..m {
                weights[[i, a, c]] =
                    if total > 0.0 { weights[[i, a, c]] / total } else { 1.0 / m as f64 };
            }
        }
    }

    let mut labels = Array2::zeros((n, k));
    let mut score = Array2::zeros((n, k));
    let mut freq = Array2::zeros((n, k));
    let mut beta = Array2::zeros((n, k));
    for i in 0..n {
        for c in 0..k {
            let s: f64 = (0..m).map(|a| weights[[i, a, c]] * z[[i, a, c]] as f64).sum();
            score[[i, c]] = s;
            let nu = u8::from(s > 0.5);
            labels[[i, c]] = nu;
            let agree: f64 = (0..m)
                .filter(|&a| z[[i, a, c]] == nu)
                .map(|a| weights[[i, a, c]])
                .sum();
            freq[[i, c]] = agree;
            let total: f64 = (0..m).map(|a| weights[[i, a, c]]).sum();
            beta[[i, c]] = beta_confidence(1.0 + agree, 1.0 + (total - agree))?;
        }
    }

    // reported per-worker weight: the normalized weight averaged over cells
    let mut mean_weight = vec![0.0f64; m];
    for a in 0..m {
        let sum: f64 = (0..n).flat_map(|i| (0..k).map(move |c| (i, c))).map(|(i, c)| weights[[i, a, c]]).sum();
        mean_weight[a] = sum / (n * k) as f64;
    }

    Ok(BaselineResult {
        method: BaselineMethod::Tao,
        labels,
        score,
        worker_scores: mean_weight,
        confidence: Some(ConfidencePair { freq, beta }),
        iterations_run: CV_FOLDS,
        objective_traces: Vec::new(),
    })
}

/// Mean held-out accuracy, per worker and class, of classifiers trained on
/// the worker's labels across a 10-fold split.
fn overall_quality(
    z: ArrayView3<'_, u8>,
    dataset: &Dataset,
    forest_cfg: &ForestConfig,
    seed: u64,
) -> Result<Array2<f64>> {
    let (n, m, k) = z.dim();
    let plan = make_folds(n, CV_FOLDS, seed)?;
    let mut tau = Array2::zeros((m, k));
    for a in 0..m {
        for c in 0..k {
            let mut correct = 0usize;
            for fold in 0..plan.k_folds {
                let train_idx = plan.train_indices(fold);
                let test_idx = plan.test_indices(fold);
                let train_features = crate::dataset::select_rows(&dataset.features, &train_idx);
                let train_labels: Vec<u8> = train_idx.iter().map(|&i| z[[i, a, c]]).collect();
                let forest =
                    RandomForest::fit(train_features.view(), &train_labels, forest_cfg, fold as u64)?;
                for &i in &test_idx {
                    let p = forest.predict_proba_row(dataset.features.row(i));
                    if u8::from(p > 0.5) == z[[i, a, c]] {
                        correct += 1;
                    }
                }
            }
            tau[[a, c]] = correct as f64 / n as f64;
        }
    }
    Ok(tau)
}

/// The weight formula on its own, for direct checks: tau * (1 + s^2).
pub fn tao_weight(tau: f64, specific: f64) -> f64 {
    tau * (1.0 + specific * specific)
}
