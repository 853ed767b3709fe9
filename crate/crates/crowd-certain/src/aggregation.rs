//! Uncertainty-weighted soft majority voting.
//!
//! Consistency is one minus the rescaled ensemble uncertainty, optionally
//! zeroed where a worker's predicted label contradicts the across-worker
//! majority. Per-worker reliabilities are mean consistencies, weights are
//! reliabilities normalized per class, and the aggregated label takes the
//! weight mass on the positive class strictly above one half.

use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::UncertaintyScores;

/// Whether disagreement with the across-worker majority zeroes consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyMode {
    NoPenalty,
    #[default]
    Penalized,
}

impl ConsistencyMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "no-penalty" => Ok(Self::NoPenalty),
            "penalized" => Ok(Self::Penalized),
            other => Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::NoPenalty => "no-penalty",
            Self::Penalized => "penalized",
        }
    }
}

/// Which label tensor the penalization majority is taken over: the workers'
/// classifier-predicted labels (default) or their raw crowd labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyReference {
    #[default]
    Eta,
    Z,
}

impl PenaltyReference {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "eta" => Ok(Self::Eta),
            "z" => Ok(Self::Z),
            other => Err(Error::InvalidParameter(format!("unknown penalty reference {other:?}"))),
        }
    }
}

/// Per-(instance, worker, class) consistency scores in [0, 1].
#[derive(Debug, Clone)]
pub struct ConsistencyScores {
    pub c: Array3<f64>,
    pub mode: ConsistencyMode,
}

/// Across-worker majority of a binary N x M x K tensor: 1 iff strictly more
/// than half the workers vote 1, ties to 0.
pub fn across_worker_majority(labels: ArrayView3<'_, u8>) -> Array2<u8> {
    let (n, m, k) = labels.dim();
    let mut out = Array2::zeros((n, k));
    for i in 0..n {
        for c in 0..k {
            let ones: usize = (0..m).map(|a| labels[[i, a, c]] as usize).sum();
            out[[i, c]] = u8::from(2 * ones > m);
        }
    }
    out
}

/// Computes consistency from rescaled uncertainty. `penalty_labels` is the
/// tensor the majority is taken over (and compared against) in penalized
/// mode; pass the same tensor the uncertainty was computed from unless the
/// raw-label variant is wanted.
pub fn consistency(
    delta: &UncertaintyScores,
    penalty_labels: ArrayView3<'_, u8>,
    mode: ConsistencyMode,
) -> Result<ConsistencyScores> {
    let dims = delta.delta.dim();
    if penalty_labels.dim() != dims {
        return Err(Error::ShapeMismatch(format!(
            "uncertainty {dims:?} vs labels {:?}",
            penalty_labels.dim()
        )));
    }
    for &d in delta.delta.iter() {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::InvalidParameter(format!(
                "uncertainty {d} outside [0, 1]; rescale before computing consistency"
            )));
        }
    }
    let (n, m, k) = dims;
    let mut c = Array3::zeros((n, m, k));
    match mode {
        ConsistencyMode::NoPenalty => {
            for (idx, &d) in delta.delta.indexed_iter() {
                c[idx] = 1.0 - d;
            }
        }
        ConsistencyMode::Penalized => {
            let majority = across_worker_majority(penalty_labels);
            for i in 0..n {
                for a in 0..m {
                    for cl in 0..k {
                        c[[i, a, cl]] = if penalty_labels[[i, a, cl]] == majority[[i, cl]] {
                            1.0 - delta.delta[[i, a, cl]]
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
    }
    Ok(ConsistencyScores { c, mode })
}

/// Per-worker reliabilities and normalized weights.
#[derive(Debug, Clone)]
pub struct WorkerWeights {
    /// M x K mean consistency.
    pub reliability: Array2<f64>,
    /// Length-M mean reliability across classes.
    pub reliability_overall: Array1<f64>,
    /// M x K weights; each class column sums to 1.
    pub weights: Array2<f64>,
}

impl WorkerWeights {
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(Error::Csv)?;
        w.write_record(["worker_id", "class_id", "psi", "omega"])?;
        for ((a, c), psi) in self.reliability.indexed_iter() {
            w.write_record([
                a.to_string(),
                c.to_string(),
                psi.to_string(),
                self.weights[[a, c]].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Ok(())
    }
}

/// Mean consistency per worker and class, and its across-class mean.
pub fn reliability(scores: &ConsistencyScores) -> (Array2<f64>, Array1<f64>) {
    let (n, m, k) = scores.c.dim();
    let mut psi = Array2::zeros((m, k));
    for a in 0..m {
        for c in 0..k {
            let sum: f64 = (0..n).map(|i| scores.c[[i, a, c]]).sum();
            psi[[a, c]] = sum / n as f64;
        }
    }
    let overall = psi.mean_axis(ndarray::Axis(1)).expect("k >= 1");
    (psi, overall)
}

/// Normalizes reliabilities into per-class weights. A class whose
/// reliabilities sum to zero falls back to uniform weights.
pub fn weights(psi: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if psi.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter("reliabilities must be nonnegative".into()));
    }
    let (m, k) = psi.dim();
    let mut omega = Array2::zeros((m, k));
    for c in 0..k {
        let total: f64 = (0..m).map(|a| psi[[a, c]]).sum();
        for a in 0..m {
            omega[[a, c]] = if total > 0.0 { psi[[a, c]] / total } else { 1.0 / m as f64 };
        }
    }
    Ok(omega)
}

/// Builds [`WorkerWeights`] from consistency scores.
pub fn worker_weights(scores: &ConsistencyScores) -> Result<WorkerWeights> {
    let (psi, overall) = reliability(scores);
    let omega = weights(psi.view())?;
    Ok(WorkerWeights { reliability: psi, reliability_overall: overall, weights: omega })
}

/// Aggregated labels plus the pre-threshold weighted scores.
#[derive(Debug, Clone)]
pub struct AggregationResult {
    /// N x K labels.
    pub labels: Array2<u8>,
    /// N x K weighted scores in [0, 1].
    pub weighted_score: Array2<f64>,
    pub weights: WorkerWeights,
}

/// Weighted soft majority vote of the per-worker predicted labels. The label
/// is 1 only when the weight mass on 1 strictly exceeds one half.
pub fn aggregate(
    predicted: ArrayView3<'_, u8>,
    weights: &WorkerWeights,
) -> Result<AggregationResult> {
    let (n, m, k) = predicted.dim();
    if weights.weights.dim() != (m, k) {
        return Err(Error::ShapeMismatch(format!(
            "weights {:?} vs predictions for {m} workers / {k} classes",
            weights.weights.dim()
        )));
    }
    let mut score = Array2::zeros((n, k));
    let mut labels = Array2::zeros((n, k));
    for i in 0..n {
        for c in 0..k {
            let s: f64 =
                (0..m).map(|a| weights.weights[[a, c]] * predicted[[i, a, c]] as f64).sum();
            score[[i, c]] = s;
            labels[[i, c]] = u8::from(s > 0.5);
        }
    }
    Ok(AggregationResult { labels, weighted_score: score, weights: weights.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::UncertaintyMeasure;
    use ndarray::{arr3, array};

    fn scores(delta: Array3<f64>) -> UncertaintyScores {
        UncertaintyScores { delta, measure: UncertaintyMeasure::StdDev }
    }

    #[test]
    fn consistency_without_penalty_is_complement() {
        let delta = scores(arr3(&[[[0.2]], [[0.0]]]));
        let eta = arr3(&[[[1u8]], [[1]]]);
        let c = consistency(&delta, eta.view(), ConsistencyMode::NoPenalty).unwrap();
        assert_eq!(c.c[[0, 0, 0]], 0.8);
        assert_eq!(c.c[[1, 0, 0]], 1.0);
    }

    #[test]
    fn penalized_zeroes_disagreers() {
        // three workers; worker 2 disagrees with the majority on instance 0
        let delta = scores(Array3::from_elem((1, 3, 1), 0.2));
        let eta = arr3(&[[[1u8], [1], [0]]]);
        let c = consistency(&delta, eta.view(), ConsistencyMode::Penalized).unwrap();
        assert_eq!(c.c[[0, 0, 0]], 0.8);
        assert_eq!(c.c[[0, 1, 0]], 0.8);
        assert_eq!(c.c[[0, 2, 0]], 0.0);
    }

    #[test]
    fn penalized_tie_majority_is_zero() {
        // two workers split 1/0: majority is 0, so the 1-voter is penalized
        let delta = scores(Array3::zeros((1, 2, 1)));
        let eta = arr3(&[[[1u8], [0]]]);
        let c = consistency(&delta, eta.view(), ConsistencyMode::Penalized).unwrap();
        assert_eq!(c.c[[0, 0, 0]], 0.0);
        assert_eq!(c.c[[0, 1, 0]], 1.0);
    }

    #[test]
    fn unnormalized_uncertainty_is_rejected() {
        let delta = scores(arr3(&[[[1.2]]]));
        let eta = arr3(&[[[1u8]]]);
        assert!(consistency(&delta, eta.view(), ConsistencyMode::NoPenalty).is_err());
    }

    #[test]
    fn reliability_is_mean_over_instances_and_classes() {
        let c = ConsistencyScores {
            c: arr3(&[[[1.0, 0.8]], [[0.5, 0.4]], [[0.0, 0.0]]]),
            mode: ConsistencyMode::NoPenalty,
        };
        let (psi, overall) = reliability(&c);
        assert!((psi[[0, 0]] - 0.5).abs() < 1e-12);
        assert!((psi[[0, 1]] - 0.4).abs() < 1e-12);
        assert!((overall[0] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn weights_normalize_per_class() {
        let psi = array![[0.9], [0.3]];
        let omega = weights(psi.view()).unwrap();
        assert!((omega[[0, 0]] - 0.75).abs() < 1e-12);
        assert!((omega[[1, 0]] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_reliability_falls_back_to_uniform() {
        let psi = Array2::zeros((3, 1));
        let omega = weights(psi.view()).unwrap();
        for a in 0..3 {
            assert!((omega[[a, 0]] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_reliability_errors() {
        let psi = array![[-0.1]];
        assert!(weights(psi.view()).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let ww = WorkerWeights {
            reliability: array![[0.75], [0.25]],
            reliability_overall: array![0.75, 0.25],
            weights: array![[0.75], [0.25]],
        };
        let eta = arr3(&[[[1u8], [0]]]);
        let out = aggregate(eta.view(), &ww).unwrap();
        assert!((out.weighted_score[[0, 0]] - 0.75).abs() < 1e-12);
        assert_eq!(out.labels[[0, 0]], 1);

        // an exact half score resolves to 0
        let ww = WorkerWeights {
            reliability: array![[0.5], [0.5]],
            reliability_overall: array![0.5, 0.5],
            weights: array![[0.5], [0.5]],
        };
        let out = aggregate(eta.view(), &ww).unwrap();
        assert!((out.weighted_score[[0, 0]] - 0.5).abs() < 1e-12);
        assert_eq!(out.labels[[0, 0]], 0);
    }

    #[test]
    fn weights_are_scale_invariant() {
        let psi = array![[0.9], [0.3], [0.6]];
        let scaled = psi.mapv(|v| v * 3.7);
        assert_eq!(weights(psi.view()).unwrap(), weights(scaled.view()).unwrap());
    }

    #[test]
    fn equal_weights_reduce_to_majority_vote() {
        // exhaustive over all eta patterns for M = 1..5, N = 1
        for m in 1..=5usize {
            let ww = WorkerWeights {
                reliability: Array2::from_elem((m, 1), 0.5),
                reliability_overall: Array1::from_elem(m, 0.5),
                weights: Array2::from_elem((m, 1), 1.0 / m as f64),
            };
            for pattern in 0..(1u32 << m) {
                let mut eta = Array3::zeros((1, m, 1));
                for a in 0..m {
                    eta[[0, a, 0]] = ((pattern >> a) & 1) as u8;
                }
                let out = aggregate(eta.view(), &ww).unwrap();
                let expect = across_worker_majority(eta.view());
                assert_eq!(out.labels[[0, 0]], expect[[0, 0]], "m={m} pattern={pattern:b}");
            }
        }
    }

    #[test]
    fn penalization_never_raises_consistency() {
        let delta = scores(Array3::from_shape_fn((4, 3, 1), |(i, a, _)| {
            (i as f64 * 0.1 + a as f64 * 0.2).min(1.0)
        }));
        let eta = Array3::from_shape_fn((4, 3, 1), |(i, a, _)| u8::from((i + a) % 2 == 0));
        let plain = consistency(&delta, eta.view(), ConsistencyMode::NoPenalty).unwrap();
        let penalized = consistency(&delta, eta.view(), ConsistencyMode::Penalized).unwrap();
        for (idx, &cp) in penalized.c.indexed_iter() {
            assert!(cp <= plain.c[idx] + 1e-15);
        }
    }
}
