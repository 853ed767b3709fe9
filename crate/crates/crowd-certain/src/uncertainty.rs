//! Dispersion of a worker's classifier ensemble, per instance and class.
//!
//! Five measures over the G per-classifier outputs: sample standard
//! deviation of the binarized votes (the default), entropy of the predicted
//! probabilities, committee variance, predictive-interval width, and a
//! conformal p-value. Scores are rescaled by each measure's attainable
//! maximum so downstream consistency lands in [0, 1].

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsemblePredictions;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyMeasure {
    StdDev,
    Entropy,
    CommitteeVariance,
    PredictiveInterval { gamma: f64 },
    Conformal { threshold: f64 },
}

impl Default for UncertaintyMeasure {
    fn default() -> Self {
        Self::StdDev
    }
}

impl UncertaintyMeasure {
    /// Parses the CLI spelling. `pred-interval` and `conformal` take their
    /// defaults (gamma 0.95, threshold 0.5).
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "std-dev" => Ok(Self::StdDev),
            "entropy" => Ok(Self::Entropy),
            "committee-var" => Ok(Self::CommitteeVariance),
            "pred-interval" => Ok(Self::PredictiveInterval { gamma: 0.95 }),
            "conformal" => Ok(Self::Conformal { threshold: 0.5 }),
            other => Err(Error::InvalidParameter(format!("unknown uncertainty measure {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::StdDev => "std-dev",
            Self::Entropy => "entropy",
            Self::CommitteeVariance => "committee-var",
            Self::PredictiveInterval { .. } => "pred-interval",
            Self::Conformal { .. } => "conformal",
        }
    }

    /// Largest value the raw measure can reach for G classifier outputs;
    /// used to rescale scores into [0, 1].
    pub fn max_value(&self, g: usize) -> f64 {
        match self {
            Self::StdDev => 0.5 * (g as f64 / (g as f64 - 1.0)).sqrt(),
            Self::Entropy => g as f64 * std::f64::consts::LN_2,
            Self::CommitteeVariance => g as f64 / (4.0 * (g as f64 - 1.0)),
            Self::PredictiveInterval { .. } | Self::Conformal { .. } => 1.0,
        }
    }
}

/// Sample standard deviation (divisor G-1) of the binarized votes.
pub fn std_dev(votes: &[u8]) -> Result<f64> {
    if votes.len() < 2 {
        return Err(Error::InvalidParameter("std_dev needs at least two votes".into()));
    }
    let g = votes.len() as f64;
    let mean = votes.iter().map(|&v| v as f64).sum::<f64>() / g;
    let ss: f64 = votes.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
    Ok((ss / (g - 1.0)).sqrt())
}

/// Summed plug-in entropy of the per-classifier probabilities, natural log,
/// with 0·ln 0 = 0.
pub fn entropy(probs: &[f64]) -> Result<f64> {
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("probability {p} outside [0, 1]")));
        }
    }
    Ok(-probs.iter().map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>())
}

/// Sample variance (divisor G-1) of the per-classifier probabilities.
pub fn committee_variance(probs: &[f64]) -> Result<f64> {
    if probs.len() < 2 {
        return Err(Error::InvalidParameter("committee_variance needs at least two values".into()));
    }
    let g = probs.len() as f64;
    let mean = probs.iter().sum::<f64>() / g;
    Ok(probs.iter().map(|&p| (p - mean).powi(2)).sum::<f64>() / (g - 1.0))
}

/// Width of the central predictive interval at confidence `gamma`: sort the
/// probabilities, take 1-based indices ceil((G/2)(1-gamma)) and
/// floor((G/2)(1+gamma)) clamped to [1, G], and return the nonnegative gap.
pub fn predictive_interval(probs: &[f64], gamma: f64) -> Result<f64> {
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} outside (0, 1)")));
    }
    if probs.len() < 2 {
        return Err(Error::InvalidParameter("predictive_interval needs at least two values".into()));
    }
    let g = probs.len();
    let mut sorted = probs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let half = g as f64 / 2.0;
    let lower = ((half * (1.0 - gamma)).ceil() as usize).clamp(1, g);
    let upper = ((half * (1.0 + gamma)).floor() as usize).clamp(1, g);
    Ok((sorted[upper - 1] - sorted[lower - 1]).max(0.0))
}

/// Conformal p-value: the fraction of classifiers whose nonconformity score
/// |p - reference| reaches `threshold`.
pub fn conformal_pvalue(probs: &[f64], reference_label: u8, threshold: f64) -> Result<f64> {
    if threshold < 0.0 {
        return Err(Error::InvalidParameter(format!("conformal threshold {threshold} < 0")));
    }
    if probs.is_empty() {
        return Err(Error::EmptyInput("conformal_pvalue needs at least one value".into()));
    }
    let reference = reference_label as f64;
    let hits = probs.iter().filter(|&&p| (p - reference).abs() >= threshold).count();
    Ok(hits as f64 / probs.len() as f64)
}

/// Uncertainty scores for a full prediction tensor, rescaled to [0, 1].
#[derive(Debug, Clone)]
pub struct UncertaintyScores {
    /// N x M x K.
    pub delta: Array3<f64>,
    pub measure: UncertaintyMeasure,
}

impl UncertaintyScores {
    pub fn compute(preds: &EnsemblePredictions, measure: UncertaintyMeasure) -> Result<Self> {
        let (n, m, k, g) = preds.probs.dim();
        if g < 2 {
            return Err(Error::InvalidParameter("uncertainty needs at least two classifiers".into()));
        }
        let max = measure.max_value(g);
        let mut delta = Array3::zeros((n, m, k));
        let mut probs = vec![0.0; g];
        let mut votes = vec![0u8; g];
        for i in 0..n {
            for a in 0..m {
                for c in 0..k {
                    for gi in 0..g {
                        probs[gi] = preds.probs[[i, a, c, gi]];
                        votes[gi] = preds.labels[[i, a, c, gi]];
                    }
                    let raw = match measure {
                        UncertaintyMeasure::StdDev => std_dev(&votes)?,
                        UncertaintyMeasure::Entropy => entropy(&probs)?,
                        UncertaintyMeasure::CommitteeVariance => committee_variance(&probs)?,
                        UncertaintyMeasure::PredictiveInterval { gamma } => {
                            predictive_interval(&probs, gamma)?
                        }
                        UncertaintyMeasure::Conformal { threshold } => {
                            conformal_pvalue(&probs, preds.majority[[i, a, c]], threshold)?
                        }
                    };
                    delta[[i, a, c]] = (raw / max).clamp(0.0, 1.0);
                }
            }
        }
        Ok(Self { delta, measure })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn std_dev_examples() {
        assert!(std_dev(&[1, 1, 1, 1]).unwrap().abs() < TOL);
        assert!((std_dev(&[1, 1, 0, 0]).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < TOL);
        assert!((std_dev(&[1, 0]).unwrap() - 0.5f64.sqrt()).abs() < TOL);
        assert!(std_dev(&[1]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!(entropy(&[1.0, 1.0, 1.0]).unwrap().abs() < TOL);
        assert!((entropy(&[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < TOL);
        // zero entries contribute nothing
        assert!((entropy(&[0.0, 0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < TOL);
        assert!(entropy(&[1.1]).is_err());
    }

    #[test]
    fn committee_variance_examples() {
        assert!((committee_variance(&[0.2, 0.8]).unwrap() - 0.18).abs() < TOL);
        assert!(committee_variance(&[0.3, 0.3, 0.3]).unwrap().abs() < TOL);
        assert!((committee_variance(&[0.0, 1.0, 0.0, 1.0]).unwrap() - 1.0 / 3.0).abs() < TOL);
        assert!(committee_variance(&[0.4]).is_err());
    }

    #[test]
    fn predictive_interval_examples() {
        // G=10, gamma=0.95: indices 1 and 9 of the sorted values.
        let probs: Vec<f64> = (1..=10).map(|v| v as f64 / 10.0).collect();
        assert!((predictive_interval(&probs, 0.95).unwrap() - 0.8).abs() < TOL);
        assert!(predictive_interval(&[0.4, 0.4, 0.4], 0.95).unwrap().abs() < TOL);
        assert!(predictive_interval(&probs, 1.0).is_err());
        assert!(predictive_interval(&probs, 0.0).is_err());
    }

    #[test]
    fn conformal_examples() {
        assert!(conformal_pvalue(&[1.0, 1.0, 1.0], 1, 0.1).unwrap().abs() < TOL);
        assert!((conformal_pvalue(&[0.0, 1.0], 1, 0.5).unwrap() - 0.5).abs() < TOL);
        assert!((conformal_pvalue(&[0.3, 0.9, 0.5], 0, 0.0).unwrap() - 1.0).abs() < TOL);
        assert!(conformal_pvalue(&[0.5], 1, -0.1).is_err());
    }

    #[test]
    fn measures_are_permutation_invariant() {
        let probs = [0.9, 0.1, 0.4, 0.7];
        let shuffled = [0.4, 0.9, 0.7, 0.1];
        assert_eq!(entropy(&probs).unwrap(), entropy(&shuffled).unwrap());
        assert_eq!(
            committee_variance(&probs).unwrap(),
            committee_variance(&shuffled).unwrap()
        );
        assert_eq!(
            predictive_interval(&probs, 0.9).unwrap(),
            predictive_interval(&shuffled, 0.9).unwrap()
        );
        assert_eq!(
            conformal_pvalue(&probs, 1, 0.5).unwrap(),
            conformal_pvalue(&shuffled, 1, 0.5).unwrap()
        );
        let votes = [1u8, 0, 0, 1];
        let votes_shuffled = [0u8, 1, 1, 0];
        assert_eq!(std_dev(&votes).unwrap(), std_dev(&votes_shuffled).unwrap());
    }

    #[test]
    fn population_variance_identity_over_all_patterns() {
        // sd^2 * (G-1)/G == mean(1-mean) for binary votes, all patterns G<=8.
        for g in 2..=8usize {
            for pattern in 0..(1u32 << g) {
                let votes: Vec<u8> = (0..g).map(|b| ((pattern >> b) & 1) as u8).collect();
                let mean = votes.iter().map(|&v| v as f64).sum::<f64>() / g as f64;
                let sd = std_dev(&votes).unwrap();
                let lhs = sd * sd * (g as f64 - 1.0) / g as f64;
                let rhs = mean * (1.0 - mean);
                assert!((lhs - rhs).abs() < 1e-12, "g={g} pattern={pattern:b}");
            }
        }
    }

    #[test]
    fn normalizers_bound_each_measure() {
        let g = 10;
        let half = vec![0.5; g];
        let e = entropy(&half).unwrap();
        assert!(e <= UncertaintyMeasure::Entropy.max_value(g) + 1e-12);

        let votes: Vec<u8> = (0..g).map(|i| (i % 2) as u8).collect();
        let sd = std_dev(&votes).unwrap();
        assert!((sd - UncertaintyMeasure::StdDev.max_value(g)).abs() < 1e-12);

        let extreme: Vec<f64> = (0..g).map(|i| (i % 2) as f64).collect();
        let cv = committee_variance(&extreme).unwrap();
        assert!((cv - UncertaintyMeasure::CommitteeVariance.max_value(g)).abs() < 1e-12);
    }
}
