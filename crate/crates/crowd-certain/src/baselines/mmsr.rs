//! Skill recovery through rank-one completion of the worker agreement
//! matrix.
//!
//! For binary labels the expected off-diagonal of 2*C - 11' is the outer
//! product of the worker skill vector (skills scaled to [-1, 1]). The
//! diagonal is unobserved, so it is imputed from the current estimate while a
//! truncated power iteration extracts the dominant rank-one component.
//! Aggregation is a weighted vote with log-odds weights on the clipped
//! skills.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

use super::SliceOutcome;

const SKILL_CLIP: f64 = 1e-4;

pub fn mmsr_slice(z: ArrayView2<'_, u8>, iters: usize) -> Result<SliceOutcome> {
    let (n, m) = z.dim();
    if m < 3 {
        return Err(Error::TooFewWorkers { min: 3, got: m });
    }
    if iters == 0 {
        return Err(Error::InvalidParameter("mmsr needs at least one iteration".into()));
    }

    // off-diagonal agreement fractions, rescaled so independent workers with
    // accuracies p_a, p_b give entries (2p_a - 1)(2p_b - 1)
    let mut target = Array2::zeros((m, m));
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let agree = (0..n).filter(|&i| z[[i, a]] == z[[i, b]]).count();
            target[[a, b]] = 2.0 * agree as f64 / n as f64 - 1.0;
        }
    }

    let skills = rank_one_power_fit(&target, iters);
    let clipped: Vec<f64> =
        skills.iter().map(|&s| s.clamp(SKILL_CLIP, 1.0 - SKILL_CLIP)).collect();
    let log_odds: Vec<f64> = clipped.iter().map(|&s| (s / (1.0 - s)).ln()).collect();

    let mut labels = Array1::zeros(n);
    let mut score = Array1::zeros(n);
    for i in 0..n {
        let diff: f64 =
            (0..m).map(|a| log_odds[a] * (2.0 * z[[i, a]] as f64 - 1.0)).sum();
        labels[i] = u8::from(diff > 0.0);
        score[i] = 1.0 / (1.0 + (-diff).exp());
    }

    Ok(SliceOutcome {
        labels,
        score,
        worker_scores: clipped,
        iterations_run: iters,
        objective_trace: Vec::new(),
    })
}

/// Truncated power iteration on the diagonal-imputed matrix: each round
/// fills the diagonal from the current estimate, takes one power step, and
/// rescales by the Rayleigh quotient. The sign is fixed so most skills are
/// positive.
fn rank_one_power_fit(masked: &Array2<f64>, iters: usize) -> Array1<f64> {
    let m = masked.nrows();
    let mut estimate = Array1::from_elem(m, 0.5);
    for _ in 0..iters {
        let mut filled = masked.clone();
        for a in 0..m {
            filled[[a, a]] = estimate[a] * estimate[a];
        }
        let product = filled.dot(&estimate);
        let norm = product.dot(&product).sqrt();
        if norm < 1e-12 {
            break;
        }
        let direction = &product / norm;
        let eigenvalue = direction.dot(&filled.dot(&direction)).max(0.0);
        estimate = direction * eigenvalue.sqrt();
        if estimate.sum() < 0.0 {
            estimate = -estimate;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::NoiseMode;

    /// Alternating least squares on the masked entries only; an independent
    /// route to the same rank-one objective.
    fn als_oracle(masked: &Array2<f64>, rounds: usize) -> Array1<f64> {
        let m = masked.nrows();
        let mut s = Array1::from_elem(m, 0.5);
        for _ in 0..rounds {
            for a in 0..m {
                let mut num = 0.0;
                let mut den = 0.0;
                for b in 0..m {
                    if a == b {
                        continue;
                    }
                    num += masked[[a, b]] * s[b];
                    den += s[b] * s[b];
                }
                if den > 1e-12 {
                    s[a] = num / den;
                }
            }
        }
        s
    }

    fn noisy_panel(accuracies: &[f64], n: usize, seed: u64) -> Array2<u8> {
        let d = crate::bundled::two_gaussians(n, seed);
        let thresholds =
            Array2::from_shape_fn((accuracies.len(), 1), |(a, _)| accuracies[a]);
        let panel =
            crate::simulation::synthesize_labels(&d, &thresholds, NoiseMode::PerWorker, seed)
                .unwrap();
        super::super::class_slice(panel.labels.view(), 0)
    }

    #[test]
    fn recovered_skills_match_scaled_accuracy_and_oracle() {
        let z = noisy_panel(&[0.9, 0.9, 0.9], 2000, 11);
        let out = mmsr_slice(z.view(), 50).unwrap();
        for a in 0..3 {
            assert!(
                (out.worker_scores[a] - 0.8).abs() <= 0.1,
                "skill {} vs 2*0.9-1",
                out.worker_scores[a]
            );
        }

        // the power fit agrees with a least-squares fit of the same masked matrix
        let mut target = Array2::zeros((3, 3));
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    let agree = (0..2000).filter(|&i| z[[i, a]] == z[[i, b]]).count();
                    target[[a, b]] = 2.0 * agree as f64 / 2000.0 - 1.0;
                }
            }
        }
        let power = rank_one_power_fit(&target, 50);
        let oracle = als_oracle(&target, 200);
        for a in 0..3 {
            assert!(
                (power[a] - oracle[a]).abs() < 1e-6,
                "power {} vs oracle {}",
                power[a],
                oracle[a]
            );
        }
    }

    #[test]
    fn duplicate_workers_get_equal_skills() {
        let base = noisy_panel(&[0.8, 0.6, 0.9, 0.7], 500, 3);
        let mut z = Array2::zeros((500, 5));
        for i in 0..500 {
            for a in 0..4 {
                z[[i, a]] = base[[i, a]];
            }
            z[[i, 4]] = base[[i, 0]]; // clone of worker 0
        }
        let out = mmsr_slice(z.view(), 50).unwrap();
        assert!((out.worker_scores[0] - out.worker_scores[4]).abs() < 1e-9);
    }

    #[test]
    fn skills_are_clipped_to_finite_weights() {
        // three perfectly agreeing workers drive raw skills to 1
        let z = Array2::from_shape_fn((50, 3), |(i, _)| (i % 2) as u8);
        let out = mmsr_slice(z.view(), 50).unwrap();
        for &s in &out.worker_scores {
            assert!(s <= 1.0 - SKILL_CLIP);
        }
        assert!(out.labels.iter().zip(0..50).all(|(&l, i)| l == (i % 2) as u8));
    }

    #[test]
    fn too_few_workers_error() {
        let z = Array2::zeros((10, 2));
        assert!(mmsr_slice(z.view(), 10).is_err());
    }
}
