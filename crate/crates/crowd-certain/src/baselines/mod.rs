//! Comparison aggregators operating on raw crowd labels.
//!
//! Ten methods spanning vote counting (majority vote, Sheng, Wawa,
//! zero-based skill), per-instance weighting (Tao), message passing (KOS),
//! latent-variable EM (MACE, GLAD, Dawid-Skene), and rank-one skill recovery
//! (MMSR), plus an oracle-calibrated gold majority vote. All share one tie
//! rule: an exactly split vote resolves to the negative class.

mod dawid_skene;
mod glad;
mod kos;
mod mace;
mod mmsr;
mod tao;

pub use dawid_skene::dawid_skene_slice;
pub use glad::{glad_expected_ll, glad_gradients, glad_slice, GladParams};
pub use kos::kos_slice;
pub use mace::mace_slice;
pub use mmsr::mmsr_slice;
pub use tao::tao;

use ndarray::{Array1, Array2, Array3, ArrayView2, ArrayView3};
use serde::{Deserialize, Serialize};

use crate::aggregation::across_worker_majority;
use crate::confidence::{beta_confidence_matrix, beta_shape, freq_confidence};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::rng;

/// The implemented baseline aggregators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Mv,
    Sheng,
    Tao,
    Wawa,
    Zbs,
    Kos,
    Mace,
    Mmsr,
    Glad,
    DawidSkene,
    /// Majority vote weighted by each worker's accuracy on a held-out gold
    /// fraction; the only method that peeks at ground truth.
    GoldMv,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 10] = [
        Self::Mv,
        Self::Sheng,
        Self::Tao,
        Self::Wawa,
        Self::Zbs,
        Self::Kos,
        Self::Mace,
        Self::Mmsr,
        Self::Glad,
        Self::DawidSkene,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mv" => Ok(Self::Mv),
            "sheng" => Ok(Self::Sheng),
            "tao" => Ok(Self::Tao),
            "wawa" => Ok(Self::Wawa),
            "zbs" => Ok(Self::Zbs),
            "kos" => Ok(Self::Kos),
            "mace" => Ok(Self::Mace),
            "mmsr" => Ok(Self::Mmsr),
            "glad" => Ok(Self::Glad),
            "dawid-skene" => Ok(Self::DawidSkene),
            "gold-mv" => Ok(Self::GoldMv),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mv => "mv",
            Self::Sheng => "sheng",
            Self::Tao => "tao",
            Self::Wawa => "wawa",
            Self::Zbs => "zbs",
            Self::Kos => "kos",
            Self::Mace => "mace",
            Self::Mmsr => "mmsr",
            Self::Glad => "glad",
            Self::DawidSkene => "dawid-skene",
            Self::GoldMv => "gold-mv",
        }
    }
}

/// Hyperparameters shared by the iterative baselines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub em_iters: usize,
    pub tol: f64,
    pub kos_iters: usize,
    pub glad_step: f64,
    pub glad_inner_steps: usize,
    pub mmsr_iters: usize,
    pub zbs_max_iters: usize,
    pub gold_fraction: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            em_iters: 100,
            tol: 1e-6,
            kos_iters: 10,
            glad_step: 0.01,
            glad_inner_steps: 25,
            mmsr_iters: 50,
            zbs_max_iters: 100,
            gold_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Freq- and Beta-style confidence matrices for methods that define them.
#[derive(Debug, Clone)]
pub struct ConfidencePair {
    pub freq: Array2<f64>,
    pub beta: Array2<f64>,
}

/// Output of one baseline run.
#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    /// N x K aggregated labels.
    pub labels: Array2<u8>,
    /// N x K soft score in [0, 1] used for ranking metrics.
    pub score: Array2<f64>,
    /// Per-worker skill/reliability estimate, averaged over classes.
    pub worker_scores: Vec<f64>,
    pub confidence: Option<ConfidencePair>,
    pub iterations_run: usize,
    /// Per-class objective trajectories for the EM methods.
    pub objective_traces: Vec<Vec<f64>>,
}

/// Per-class output of a slice-level baseline.
pub(crate) struct SliceOutcome {
    pub labels: Array1<u8>,
    pub score: Array1<f64>,
    pub worker_scores: Vec<f64>,
    pub iterations_run: usize,
    pub objective_trace: Vec<f64>,
}

fn class_slice(z: ArrayView3<'_, u8>, class: usize) -> Array2<u8> {
    let (n, m, _) = z.dim();
    Array2::from_shape_fn((n, m), |(i, a)| z[[i, a, class]])
}

fn stack_slices(
    method: BaselineMethod,
    z: ArrayView3<'_, u8>,
    run: impl Fn(ArrayView2<'_, u8>, usize) -> Result<SliceOutcome>,
) -> Result<BaselineResult> {
    let (n, m, k) = z.dim();
    let mut labels = Array2::zeros((n, k));
    let mut score = Array2::zeros((n, k));
    let mut worker_scores = vec![0.0; m];
    let mut iterations_run = 0;
    let mut traces = Vec::with_capacity(k);
    for c in 0..k {
        let out = run(class_slice(z, c).view(), c)?;
        for i in 0..n {
            labels[[i, c]] = out.labels[i];
            score[[i, c]] = out.score[i];
        }
        for a in 0..m {
            worker_scores[a] += out.worker_scores[a] / k as f64;
        }
        iterations_run = iterations_run.max(out.iterations_run);
        traces.push(out.objective_trace);
    }
    Ok(BaselineResult {
        method,
        labels,
        score,
        worker_scores,
        confidence: None,
        iterations_run,
        objective_traces: traces,
    })
}

/// Plain majority vote: 1 iff strictly more than half the workers vote 1.
pub fn majority_vote(z: ArrayView3<'_, u8>) -> BaselineResult {
    let (n, m, k) = z.dim();
    let labels = across_worker_majority(z);
    let mut score = Array2::zeros((n, k));
    for i in 0..n {
        for c in 0..k {
            let ones: usize = (0..m).map(|a| z[[i, a, c]] as usize).sum();
            score[[i, c]] = ones as f64 / m as f64;
        }
    }
    BaselineResult {
        method: BaselineMethod::Mv,
        labels,
        score,
        worker_scores: vec![1.0; m],
        confidence: None,
        iterations_run: 1,
        objective_traces: Vec::new(),
    }
}

/// Majority vote with confidence scores at equal worker competence: the freq
/// score uses uniform weights, the Beta score unit vote counts.
pub fn sheng(z: ArrayView3<'_, u8>) -> Result<BaselineResult> {
    let (_, m, k) = z.dim();
    let mut base = majority_vote(z);
    base.method = BaselineMethod::Sheng;

    let uniform = Array2::from_elem((m, k), 1.0 / m as f64);
    let freq = freq_confidence(z, uniform.view(), base.labels.view())?;
    let unit = Array2::from_elem((m, k), 1.0);
    let (l, u) = beta_shape(z, unit.view(), base.labels.view())?;
    let beta = beta_confidence_matrix(l.view(), u.view())?;
    base.confidence = Some(ConfidencePair { freq, beta });
    Ok(base)
}

/// Worker-agreement-with-aggregate: skills are the fraction of cells where a
/// worker matches the majority vote, then one weighted vote with those
/// skills.
pub fn wawa(z: ArrayView3<'_, u8>) -> Result<BaselineResult> {
    let (n, m, k) = z.dim();
    let mv = across_worker_majority(z);
    let mut skills = Array2::zeros((m, k));
    for a in 0..m {
        for c in 0..k {
            let agree = (0..n).filter(|&i| z[[i, a, c]] == mv[[i, c]]).count();
            skills[[a, c]] = agree as f64 / n as f64;
        }
    }
    let weights = normalize_columns(&skills);
    let (labels, score) = weighted_vote(z, weights.view());
    Ok(BaselineResult {
        method: BaselineMethod::Wawa,
        labels,
        score,
        worker_scores: skills.mean_axis(ndarray::Axis(1)).unwrap().to_vec(),
        confidence: None,
        iterations_run: 1,
        objective_traces: Vec::new(),
    })
}

/// Weighted vote iterated to a label fixpoint: skills are re-estimated as
/// agreement with the current aggregate until labels stop changing or the
/// budget runs out.
pub fn zero_based_skill(z: ArrayView3<'_, u8>, max_iters: usize) -> Result<BaselineResult> {
    if max_iters == 0 {
        return Err(Error::InvalidParameter("zero_based_skill needs max_iters >= 1".into()));
    }
    let (n, m, k) = z.dim();
    let mut skills = Array2::from_elem((m, k), 1.0 / m as f64);
    let (mut labels, mut score) = weighted_vote(z, normalize_columns(&skills).view());
    let mut iterations_run = 0;
    for _ in 0..max_iters {
        iterations_run += 1;
        for a in 0..m {
            for c in 0..k {
                let agree = (0..n).filter(|&i| z[[i, a, c]] == labels[[i, c]]).count();
                skills[[a, c]] = agree as f64 / n as f64;
            }
        }
        let weights = normalize_columns(&skills);
        let (new_labels, new_score) = weighted_vote(z, weights.view());
        score = new_score;
        if new_labels == labels {
            break;
        }
        labels = new_labels;
    }
    Ok(BaselineResult {
        method: BaselineMethod::Zbs,
        labels,
        score,
        worker_scores: skills.mean_axis(ndarray::Axis(1)).unwrap().to_vec(),
        confidence: None,
        iterations_run,
        objective_traces: Vec::new(),
    })
}

/// Majority vote weighted by empirical accuracy on a seeded gold fraction of
/// the ground truth.
pub fn gold_majority_vote(
    z: ArrayView3<'_, u8>,
    truth: ArrayView2<'_, u8>,
    gold_fraction: f64,
    seed: u64,
) -> Result<BaselineResult> {
    let (n, m, k) = z.dim();
    if truth.dim() != (n, k) {
        return Err(Error::ShapeMismatch(format!(
            "truth {:?} vs labels for {n} instances / {k} classes",
            truth.dim()
        )));
    }
    if !(0.0 < gold_fraction && gold_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("gold fraction {gold_fraction} outside (0, 1]")));
    }
    let gold_count = ((n as f64 * gold_fraction).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng::stream(seed, "gold-split"));
    let gold: Vec<usize> = order[..gold_count].to_vec();

    let mut skills = Array2::zeros((m, k));
    for a in 0..m {
        for c in 0..k {
            let hits = gold.iter().filter(|&&i| z[[i, a, c]] == truth[[i, c]]).count();
            skills[[a, c]] = hits as f64 / gold.len() as f64;
        }
    }
    let weights = normalize_columns(&skills);
    let (labels, score) = weighted_vote(z, weights.view());
    Ok(BaselineResult {
        method: BaselineMethod::GoldMv,
        labels,
        score,
        worker_scores: skills.mean_axis(ndarray::Axis(1)).unwrap().to_vec(),
        confidence: None,
        iterations_run: 1,
        objective_traces: Vec::new(),
    })
}

/// The shared aggregation rule for weighted crowd labels: 1 iff the weight
/// mass on 1 strictly exceeds one half.
pub fn baseline_aggregate(
    z: ArrayView3<'_, u8>,
    weights: ArrayView2<'_, f64>,
) -> Result<Array2<u8>> {
    let (_, m, k) = z.dim();
    if weights.dim() != (m, k) {
        return Err(Error::ShapeMismatch(format!(
            "weights {:?} vs {m} workers / {k} classes",
            weights.dim()
        )));
    }
    Ok(weighted_vote(z, weights).0)
}

fn normalize_columns(values: &Array2<f64>) -> Array2<f64> {
    let (m, k) = values.dim();
    let mut out = Array2::zeros((m, k));
    for c in 0..k {
        let total: f64 = (0..m).map(|a| values[[a, c]]).sum();
        for a in 0..m {
            out[[a, c]] = if total > 0.0 { values[[a, c]] / total } else { 1.0 / m as f64 };
        }
    }
    out
}

fn weighted_vote(
    z: ArrayView3<'_, u8>,
    weights: ArrayView2<'_, f64>,
) -> (Array2<u8>, Array2<f64>) {
    let (n, m, k) = z.dim();
    let mut labels = Array2::zeros((n, k));
    let mut score = Array2::zeros((n, k));
    for i in 0..n {
        for c in 0..k {
            let s: f64 = (0..m).map(|a| weights[[a, c]] * z[[i, a, c]] as f64).sum();
            score[[i, c]] = s;
            labels[[i, c]] = u8::from(s > 0.5);
        }
    }
    (labels, score)
}

/// Everything a baseline might need beyond the label tensor.
pub struct BaselineContext<'a> {
    pub dataset: &'a Dataset,
    pub config: BaselineConfig,
    pub forest_config: ForestConfig,
}

/// Runs one baseline over the full label tensor.
pub fn run_baseline(
    method: BaselineMethod,
    z: ArrayView3<'_, u8>,
    ctx: &BaselineContext<'_>,
) -> Result<BaselineResult> {
    let cfg = &ctx.config;
    match method {
        BaselineMethod::Mv => Ok(majority_vote(z)),
        BaselineMethod::Sheng => sheng(z),
        BaselineMethod::Wawa => wawa(z),
        BaselineMethod::Zbs => zero_based_skill(z, cfg.zbs_max_iters),
        BaselineMethod::GoldMv => {
            gold_majority_vote(z, ctx.dataset.truth.view(), cfg.gold_fraction, cfg.seed)
        }
        BaselineMethod::Tao => tao(z, ctx.dataset, &ctx.forest_config, cfg.seed),
        BaselineMethod::Kos => stack_slices(method, z, |slice, _| {
            kos_slice(slice, cfg.kos_iters, cfg.seed)
        }),
        BaselineMethod::Mace => stack_slices(method, z, |slice, _| {
            mace_slice(slice, cfg.em_iters, cfg.tol, cfg.seed)
        }),
        BaselineMethod::Mmsr => {
            stack_slices(method, z, |slice, _| mmsr_slice(slice, cfg.mmsr_iters))
        }
        BaselineMethod::Glad => stack_slices(method, z, |slice, _| {
            glad_slice(slice, cfg.em_iters, cfg.glad_step, cfg.glad_inner_steps)
        }),
        BaselineMethod::DawidSkene => stack_slices(method, z, |slice, _| {
            dawid_skene_slice(slice, cfg.em_iters, cfg.tol)
        }),
    }
}

/// Stacks an N x M class slice back into the N x M x 1 tensor shape.
pub fn tensor_from_slice(slice: ArrayView2<'_, u8>) -> Array3<u8> {
    let (n, m) = slice.dim();
    Array3::from_shape_fn((n, m, 1), |(i, a, _)| slice[[i, a]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr3;

    #[test]
    fn majority_vote_examples() {
        let z = arr3(&[[[1u8], [1], [0]]]);
        assert_eq!(majority_vote(z.view()).labels[[0, 0]], 1);
        let tie = arr3(&[[[1u8], [1], [0], [0]]]);
        assert_eq!(majority_vote(tie.view()).labels[[0, 0]], 0);
        let unanimous = arr3(&[[[1u8], [1], [1]]]);
        assert_eq!(majority_vote(unanimous.view()).labels[[0, 0]], 1);
    }

    #[test]
    fn sheng_beta_confidence_examples() {
        // three workers, two positive: l=3, u=2, tail sum 5/16
        let z = arr3(&[[[1u8], [1], [0]]]);
        let out = sheng(z.view()).unwrap();
        let conf = out.confidence.unwrap();
        assert!((conf.beta[[0, 0]] - 0.3125).abs() < 1e-12);
        assert!((conf.freq[[0, 0]] - 2.0 / 3.0).abs() < 1e-12);

        let unanimous = arr3(&[[[1u8], [1], [1]]]);
        let out = sheng(unanimous.view()).unwrap();
        assert!((out.confidence.unwrap().beta[[0, 0]] - 0.0625).abs() < 1e-12);

        let single = arr3(&[[[1u8]]]);
        let out = sheng(single.view()).unwrap();
        assert!((out.confidence.unwrap().beta[[0, 0]] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn wawa_skill_tracks_mv_agreement() {
        // worker 2 always disagrees with the other two
        let z = arr3(&[
            [[1u8], [1], [0]],
            [[0u8], [0], [1]],
            [[1u8], [1], [0]],
            [[0u8], [0], [1]],
        ]);
        let out = wawa(z.view()).unwrap();
        assert_eq!(out.worker_scores[0], 1.0);
        assert_eq!(out.worker_scores[1], 1.0);
        assert_eq!(out.worker_scores[2], 0.0);
        // the opposing worker contributes nothing to the vote
        assert_eq!(out.labels.column(0).to_vec(), vec![1, 0, 1, 0]);
    }

    #[test]
    fn zbs_converges_and_reports_iterations() {
        // unanimous workers hit the fixpoint on the first re-evaluation
        let z = arr3(&[[[1u8], [1], [1]], [[0u8], [0], [0]]]);
        let out = zero_based_skill(z.view(), 50).unwrap();
        assert_eq!(out.iterations_run, 1);
        assert_eq!(out.labels.column(0).to_vec(), vec![1, 0]);
        assert!(zero_based_skill(z.view(), 0).is_err());
    }

    #[test]
    fn baseline_aggregate_examples() {
        let z = arr3(&[[[0u8], [1]]]);
        let w = ndarray::array![[0.75], [0.25]];
        let nu = baseline_aggregate(z.view(), w.view()).unwrap();
        assert_eq!(nu[[0, 0]], 0);

        let w = ndarray::array![[1.0], [0.0]];
        let z = arr3(&[[[1u8], [0]]]);
        let nu = baseline_aggregate(z.view(), w.view()).unwrap();
        assert_eq!(nu[[0, 0]], 1);
    }

    #[test]
    fn uniform_baseline_aggregate_is_majority_vote() {
        for m in 1..=5usize {
            let w = Array2::from_elem((m, 1), 1.0 / m as f64);
            for pattern in 0..(1u32 << m) {
                let mut z = Array3::zeros((1, m, 1));
                for a in 0..m {
                    z[[0, a, 0]] = ((pattern >> a) & 1) as u8;
                }
                let nu = baseline_aggregate(z.view(), w.view()).unwrap();
                let mv = majority_vote(z.view());
                assert_eq!(nu[[0, 0]], mv.labels[[0, 0]], "m={m} pattern={pattern:b}");
            }
        }
    }

    #[test]
    fn gold_mv_weights_reflect_oracle_accuracy() {
        let d = crate::bundled::two_gaussians(400, 3);
        let thresholds = ndarray::array![[0.95], [0.55]];
        let panel = crate::simulation::synthesize_labels(
            &d,
            &thresholds,
            crate::simulation::NoiseMode::PerWorker,
            3,
        )
        .unwrap();
        let out =
            gold_majority_vote(panel.labels.view(), d.truth.view(), 0.25, 7).unwrap();
        assert!(out.worker_scores[0] > out.worker_scores[1]);
    }
}
