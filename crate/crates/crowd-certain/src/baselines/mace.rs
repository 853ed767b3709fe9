//! Spammer-model EM.
//!
//! Each answer is produced either faithfully (with per-worker probability
//! theta) or from the worker's private answer distribution. EM alternates
//! label/spam-state posteriors with closed-form re-estimates of theta and the
//! spam distribution, under a fixed uniform label prior. Parameters are kept
//! off the 0/1 boundary; since each coordinate update maximizes a concave
//! piece of the expected complete-data log-likelihood over the clipped
//! interval, the observed log-likelihood never decreases.

use ndarray::{Array1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

use super::SliceOutcome;

const CLIP: f64 = 1e-6;

pub fn mace_slice(
    z: ArrayView2<'_, u8>,
    em_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<SliceOutcome> {
    if em_iters == 0 {
        return Err(Error::InvalidParameter("mace needs em_iters >= 1".into()));
    }
    let (n, m) = z.dim();

    // competence = P(not spamming); spam_pref = P(answer 1 | spamming)
    let mut competence = vec![0.0f64; m];
    let mut spam_pref = vec![0.0f64; m];
    for a in 0..m {
        let column: Vec<u8> = (0..n).map(|i| z[[i, a]]).collect();
        let mut stream = rng::content_stream(seed, "mace-init", &column);
        competence[a] = 0.5 + stream.random_range(-0.01..0.01);
        spam_pref[a] = 0.5 + stream.random_range(-0.01..0.01);
    }

    let answer_prob = |a: usize, z_val: u8, c: u8, th: &[f64], xi: &[f64]| -> f64 {
        let faithful = if z_val == c { th[a] } else { 0.0 };
        let spam = (1.0 - th[a]) * if z_val == 1 { xi[a] } else { 1.0 - xi[a] };
        faithful + spam
    };

    let mut posterior = Array1::from_elem(n, 0.5); // P(y_i = 1)
    let mut trace = Vec::with_capacity(em_iters);
    let mut iterations_run = 0;

    for _ in 0..em_iters {
        iterations_run += 1;

        // E-step: label posteriors under the current parameters.
        let mut new_posterior = Array1::zeros(n);
        for i in 0..n {
            let mut log_like = [0.0f64; 2];
            for (c, ll) in log_like.iter_mut().enumerate() {
                for a in 0..m {
                    *ll += answer_prob(a, z[[i, a]], c as u8, &competence, &spam_pref)
                        .max(f64::MIN_POSITIVE)
                        .ln();
                }
            }
            let max = log_like[0].max(log_like[1]);
            let w0 = (log_like[0] - max).exp();
            let w1 = (log_like[1] - max).exp();
            new_posterior[i] = w1 / (w0 + w1);
        }

        // M-step: expected spam counts per worker.
        for a in 0..m {
            let mut spam_mass = 0.0;
            let mut spam_ones = 0.0;
            for i in 0..n {
                for c in 0..2u8 {
                    let r = if c == 1 { new_posterior[i] } else { 1.0 - new_posterior[i] };
                    let total = answer_prob(a, z[[i, a]], c, &competence, &spam_pref);
                    if total <= 0.0 {
                        continue;
                    }
                    let spam_part = (1.0 - competence[a])
                        * if z[[i, a]] == 1 { spam_pref[a] } else { 1.0 - spam_pref[a] };
                    let q = spam_part / total;
                    spam_mass += r * q;
                    if z[[i, a]] == 1 {
                        spam_ones += r * q;
                    }
                }
            }
            competence[a] = (1.0 - spam_mass / n as f64).clamp(CLIP, 1.0 - CLIP);
            if spam_mass > 0.0 {
                spam_pref[a] = (spam_ones / spam_mass).clamp(CLIP, 1.0 - CLIP);
            }
        }

        // Observed log-likelihood under the updated parameters.
        let mut ll = 0.0;
        for i in 0..n {
            let mut like = [0.0f64; 2];
            for (c, lv) in like.iter_mut().enumerate() {
                let mut log_l = 0.0;
                for a in 0..m {
                    log_l += answer_prob(a, z[[i, a]], c as u8, &competence, &spam_pref)
                        .max(f64::MIN_POSITIVE)
                        .ln();
                }
                *lv = log_l;
            }
            let max = like[0].max(like[1]);
            ll += max + (0.5 * (like[0] - max).exp() + 0.5 * (like[1] - max).exp()).ln();
        }
        trace.push(ll);

        let change = posterior
            .iter()
            .zip(new_posterior.iter())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()));
        posterior = new_posterior;
        if change < tol {
            break;
        }
    }

    let labels = posterior.mapv(|p| u8::from(p > 0.5));
    Ok(SliceOutcome {
        labels,
        score: posterior,
        worker_scores: competence,
        iterations_run,
        objective_trace: trace,
    })
}
