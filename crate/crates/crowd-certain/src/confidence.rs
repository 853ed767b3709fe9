//! Confidence scores for aggregated labels.
//!
//! Two scores per instance and class: the total weight of workers agreeing
//! with the aggregated label ("freq"), and the Beta-distribution CDF at 0.5
//! with shape parameters built from the agreeing and disagreeing weight mass
//! ("beta"). The Beta CDF is evaluated through its binomial tail identity
//! after rounding the shape parameters to the nearest integers.

use ndarray::{Array2, ArrayView2, ArrayView3};

use crate::error::{Error, Result};

/// Weight mass on workers whose predicted label matches the aggregated one.
pub fn freq_confidence(
    predicted: ArrayView3<'_, u8>,
    weights: ArrayView2<'_, f64>,
    aggregated: ArrayView2<'_, u8>,
) -> Result<Array2<f64>> {
    let (n, m, k) = predicted.dim();
    check_shapes(predicted.dim(), weights.dim(), aggregated.dim())?;
    let mut out = Array2::zeros((n, k));
    for i in 0..n {
        for c in 0..k {
            out[[i, c]] = (0..m)
                .filter(|&a| predicted[[i, a, c]] == aggregated[[i, c]])
                .map(|a| weights[[a, c]])
                .sum();
        }
    }
    Ok(out)
}

/// Beta shape parameters: one plus the agreeing weight mass, and one plus the
/// disagreeing weight mass.
pub fn beta_shape(
    predicted: ArrayView3<'_, u8>,
    weights: ArrayView2<'_, f64>,
    aggregated: ArrayView2<'_, u8>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, m, k) = predicted.dim();
    check_shapes(predicted.dim(), weights.dim(), aggregated.dim())?;
    let mut lower = Array2::zeros((n, k));
    let mut upper = Array2::zeros((n, k));
    for i in 0..n {
        for c in 0..k {
            let mut agree = 0.0;
            let mut disagree = 0.0;
            for a in 0..m {
                if predicted[[i, a, c]] == aggregated[[i, c]] {
                    agree += weights[[a, c]];
                } else {
                    disagree += weights[[a, c]];
                }
            }
            lower[[i, c]] = 1.0 + agree;
            upper[[i, c]] = 1.0 + disagree;
        }
    }
    Ok((lower, upper))
}

fn check_shapes(
    predicted: (usize, usize, usize),
    weights: (usize, usize),
    aggregated: (usize, usize),
) -> Result<()> {
    let (n, m, k) = predicted;
    if weights != (m, k) || aggregated != (n, k) {
        return Err(Error::ShapeMismatch(format!(
            "predicted {predicted:?}, weights {weights:?}, aggregated {aggregated:?}"
        )));
    }
    Ok(())
}

fn round_half_away(x: f64) -> i64 {
    if x >= 0.0 {
        (x + 0.5).floor() as i64
    } else {
        (x - 0.5).ceil() as i64
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Beta CDF at 0.5 via the binomial tail: with T the rounded sum of the shape
/// parameters, sums C(T-1, t) / 2^(T-1) for t from the rounded lower shape up
/// to T-1. An empty range yields 0.
pub fn beta_confidence(lower: f64, upper: f64) -> Result<f64> {
    if lower < 1.0 || upper < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "beta shape parameters must be >= 1, got ({lower}, {upper})"
        )));
    }
    let t = round_half_away(lower + upper);
    let start = round_half_away(lower);
    if start > t - 1 {
        return Ok(0.0);
    }
    let trials = (t - 1) as u64;
    let scale = 0.5f64.powi(trials as i32);
    let mut sum = 0.0;
    for votes in (start as u64)..=trials {
        sum += binomial(trials, votes) * scale;
    }
    Ok(sum)
}

/// Elementwise [`beta_confidence`] over shape matrices.
pub fn beta_confidence_matrix(
    lower: ArrayView2<'_, f64>,
    upper: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if lower.dim() != upper.dim() {
        return Err(Error::ShapeMismatch("beta shape matrices differ".into()));
    }
    let mut out = Array2::zeros(lower.dim());
    for (idx, &l) in lower.indexed_iter() {
        out[idx] = beta_confidence(l, upper[idx])?;
    }
    Ok(out)
}

/// Both confidence scores plus the Beta shapes.
#[derive(Debug, Clone)]
pub struct ConfidenceScores {
    pub freq: Array2<f64>,
    pub beta: Array2<f64>,
    pub shape_lower: Array2<f64>,
    pub shape_upper: Array2<f64>,
}

impl ConfidenceScores {
    pub fn compute(
        predicted: ArrayView3<'_, u8>,
        weights: ArrayView2<'_, f64>,
        aggregated: ArrayView2<'_, u8>,
    ) -> Result<Self> {
        let freq = freq_confidence(predicted, weights, aggregated)?;
        let (shape_lower, shape_upper) = beta_shape(predicted, weights, aggregated)?;
        let beta = beta_confidence_matrix(shape_lower.view(), shape_upper.view())?;
        Ok(Self { freq, beta, shape_lower, shape_upper })
    }
}
