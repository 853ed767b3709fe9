//! Evaluation metrics for aggregated labels and confidence scores.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Fraction of (instance, class) cells where the labels agree.
pub fn accuracy(predicted: ArrayView2<'_, u8>, truth: ArrayView2<'_, u8>) -> Result<f64> {
    check(predicted.dim(), truth.dim())?;
    if predicted.is_empty() {
        return Err(Error::EmptyInput("accuracy over an empty tensor".into()));
    }
    let hits = predicted.iter().zip(truth.iter()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Harmonic mean of precision and recall; 0 when there are no true
/// positives.
pub fn f1(predicted: ArrayView2<'_, u8>, truth: ArrayView2<'_, u8>) -> Result<f64> {
    check(predicted.dim(), truth.dim())?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &y) in predicted.iter().zip(truth.iter()) {
        match (p, y) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Probability that a random positive outranks a random negative, ties
/// counted half (the rank-sum formulation). `None` when only one class is
/// present.
pub fn auc_roc(scores: &[f64], truth: &[u8]) -> Result<Option<f64>> {
    if scores.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            truth.len()
        )));
    }
    let positives = truth.iter().filter(|&&y| y == 1).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // midranks over tied score groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if truth[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let auc = (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * negatives as f64);
    Ok(Some(auc))
}

/// Mean squared error between confidence and ground truth (lower is better).
pub fn brier(confidence: ArrayView2<'_, f64>, truth: ArrayView2<'_, u8>) -> Result<f64> {
    check(confidence.dim(), truth.dim())?;
    if confidence.is_empty() {
        return Err(Error::EmptyInput("brier over an empty tensor".into()));
    }
    for &f in confidence.iter() {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!("confidence {f} outside [0, 1]")));
        }
    }
    let sum: f64 = confidence
        .iter()
        .zip(truth.iter())
        .map(|(&f, &y)| (f - y as f64).powi(2))
        .sum();
    Ok(sum / confidence.len() as f64)
}

/// One row of the expected-calibration-error bin table.
#[derive(Debug, Clone, PartialEq)]
pub struct EceBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_confidence: f64,
    pub accuracy: f64,
}

/// Expected calibration error with equal-width bins on [0, 1]. Bins are
/// half-open (lo, hi] with 0 folded into the first bin; per-bin accuracy is
/// agreement of the aggregated label with truth, and empty bins contribute
/// nothing.
pub fn ece(
    confidence: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, u8>,
    predicted: ArrayView2<'_, u8>,
    bins: usize,
) -> Result<f64> {
    Ok(ece_bins(confidence, truth, predicted, bins)?
        .0
        .iter()
        .map(|b| b.count as f64 * (b.accuracy - b.mean_confidence).abs())
        .sum::<f64>()
        / confidence.len() as f64)
}

/// The full bin table behind [`ece`], for external plotting.
pub fn ece_bins(
    confidence: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, u8>,
    predicted: ArrayView2<'_, u8>,
    bins: usize,
) -> Result<(Vec<EceBin>, usize)> {
    check(confidence.dim(), truth.dim())?;
    check(predicted.dim(), truth.dim())?;
    if bins == 0 {
        return Err(Error::InvalidParameter("ece needs at least one bin".into()));
    }
    if confidence.is_empty() {
        return Err(Error::EmptyInput("ece over an empty tensor".into()));
    }

    let mut counts = vec![0usize; bins];
    let mut conf_sums = vec![0.0f64; bins];
    let mut hit_sums = vec![0usize; bins];
    for (&f, (&y, &p)) in confidence.iter().zip(truth.iter().zip(predicted.iter())) {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!("confidence {f} outside [0, 1]")));
        }
        // (lo, hi] bins; 0 lands in the first bin
        let b = if f <= 0.0 { 0 } else { ((f * bins as f64).ceil() as usize - 1).min(bins - 1) };
        counts[b] += 1;
        conf_sums[b] += f;
        hit_sums[b] += usize::from(p == y);
    }

    let table = (0..bins)
        .map(|b| EceBin {
            lo: b as f64 / bins as f64,
            hi: (b + 1) as f64 / bins as f64,
            count: counts[b],
            mean_confidence: if counts[b] > 0 { conf_sums[b] / counts[b] as f64 } else { 0.0 },
            accuracy: if counts[b] > 0 { hit_sums[b] as f64 / counts[b] as f64 } else { 0.0 },
        })
        .collect();
    Ok((table, confidence.len()))
}

/// Spearman rank correlation with midranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter("spearman needs two equal-length series".into()));
    }
    let rx = midranks(x);
    let ry = midranks(y);
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..x.len() {
        let dx = rx[i] - mean;
        let dy = ry[i] - mean;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::InvalidParameter("spearman is undefined for constant series".into()));
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    ranks
}

fn check(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}
