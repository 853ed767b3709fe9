//! Ability/difficulty EM.
//!
//! Each worker has a real-valued ability, each task a positive inverse
//! difficulty; the chance a worker answers correctly is the sigmoid of their
//! product. The E-step computes label posteriors under a fixed uniform
//! prior; the M-step runs a bounded number of gradient-ascent steps on the
//! expected complete-data log-likelihood, in ability and log inverse
//! difficulty. Steps that would lower the objective are halved until they
//! help, so every M-step is an ascent and the observed log-likelihood is
//! nondecreasing.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};

use super::SliceOutcome;

const PROB_FLOOR: f64 = 1e-12;

/// Worker abilities and per-task log inverse difficulties.
#[derive(Debug, Clone)]
pub struct GladParams {
    pub ability: Vec<f64>,
    pub log_inv_difficulty: Vec<f64>,
}

impl GladParams {
    fn correct_prob(&self, worker: usize, task: usize) -> f64 {
        let x = self.ability[worker] * self.log_inv_difficulty[task].exp();
        1.0 / (1.0 + (-x).exp())
    }
}

/// Expected complete-data log-likelihood (uniform prior terms dropped).
pub fn glad_expected_ll(
    params: &GladParams,
    posterior: &[f64],
    z: ArrayView2<'_, u8>,
) -> f64 {
    let (n, m) = z.dim();
    let mut q = 0.0;
    for i in 0..n {
        for a in 0..m {
            let f = params.correct_prob(a, i).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            for c in 0..2u8 {
                let r = if c == 1 { posterior[i] } else { 1.0 - posterior[i] };
                q += r * if z[[i, a]] == c { f.ln() } else { (1.0 - f).ln() };
            }
        }
    }
    q
}

/// Gradient of [`glad_expected_ll`] in (ability, log inverse difficulty).
pub fn glad_gradients(
    params: &GladParams,
    posterior: &[f64],
    z: ArrayView2<'_, u8>,
) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = z.dim();
    let mut d_ability = vec![0.0; m];
    let mut d_log_beta = vec![0.0; n];
    for i in 0..n {
        let beta = params.log_inv_difficulty[i].exp();
        for a in 0..m {
            let f = params.correct_prob(a, i).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            let mut weight = 0.0;
            for c in 0..2u8 {
                let r = if c == 1 { posterior[i] } else { 1.0 - posterior[i] };
                // d/dx of [delta ln f + (1-delta) ln (1-f)] with f = sigmoid(x)
                weight += r * if z[[i, a]] == c { 1.0 - f } else { -f };
            }
            d_ability[a] += weight * beta;
            d_log_beta[i] += weight * params.ability[a] * beta;
        }
    }
    (d_ability, d_log_beta)
}

fn observed_ll(params: &GladParams, z: ArrayView2<'_, u8>) -> f64 {
    let (n, m) = z.dim();
    let mut ll = 0.0;
    for i in 0..n {
        let mut log_like = [0.0f64; 2];
        for (c, lv) in log_like.iter_mut().enumerate() {
            for a in 0..m {
                let f = params.correct_prob(a, i).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                *lv += if z[[i, a]] == c as u8 { f.ln() } else { (1.0 - f).ln() };
            }
        }
        let max = log_like[0].max(log_like[1]);
        ll += max + (0.5 * (log_like[0] - max).exp() + 0.5 * (log_like[1] - max).exp()).ln();
    }
    ll
}

fn e_step(params: &GladParams, z: ArrayView2<'_, u8>) -> Vec<f64> {
    let (n, m) = z.dim();
    (0..n)
        .map(|i| {
            let mut log_like = [0.0f64; 2];
            for (c, lv) in log_like.iter_mut().enumerate() {
                for a in 0..m {
                    let f = params.correct_prob(a, i).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                    *lv += if z[[i, a]] == c as u8 { f.ln() } else { (1.0 - f).ln() };
                }
            }
            let max = log_like[0].max(log_like[1]);
            let w0 = (log_like[0] - max).exp();
            let w1 = (log_like[1] - max).exp();
            w1 / (w0 + w1)
        })
        .collect()
}

pub fn glad_slice(
    z: ArrayView2<'_, u8>,
    em_iters: usize,
    step: f64,
    inner_steps: usize,
) -> Result<SliceOutcome> {
    if em_iters == 0 {
        return Err(Error::InvalidParameter("glad needs em_iters >= 1".into()));
    }
    if step <= 0.0 {
        return Err(Error::InvalidParameter(format!("glad step {step} must be positive")));
    }
    let (n, m) = z.dim();
    let mut params =
        GladParams { ability: vec![1.0; m], log_inv_difficulty: vec![0.0; n] };

    let mut posterior = vec![0.5; n];
    let mut trace = Vec::with_capacity(em_iters);
    let mut iterations_run = 0;

    for _ in 0..em_iters {
        iterations_run += 1;
        let new_posterior = e_step(&params, z);

        // Ascend Q; shrink any step that would overshoot.
        let mut q = glad_expected_ll(&params, &new_posterior, z);
        for _ in 0..inner_steps {
            let (d_ability, d_log_beta) = glad_gradients(&params, &new_posterior, z);
            let mut scale = step;
            let mut improved = false;
            for _ in 0..30 {
                let candidate = GladParams {
                    ability: params
                        .ability
                        .iter()
                        .zip(&d_ability)
                        .map(|(&p, &g)| p + scale * g)
                        .collect(),
                    log_inv_difficulty: params
                        .log_inv_difficulty
                        .iter()
                        .zip(&d_log_beta)
                        .map(|(&p, &g)| p + scale * g)
                        .collect(),
                };
                let q_new = glad_expected_ll(&candidate, &new_posterior, z);
                if q_new >= q {
                    params = candidate;
                    q = q_new;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !improved {
                break;
            }
        }

        trace.push(observed_ll(&params, z));
        let change = posterior
            .iter()
            .zip(new_posterior.iter())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()));
        posterior = new_posterior;
        if change < 1e-10 {
            break;
        }
    }

    let final_posterior = e_step(&params, z);
    let labels = Array1::from_iter(final_posterior.iter().map(|&p| u8::from(p > 0.5)));
    Ok(SliceOutcome {
        labels,
        score: Array1::from_vec(final_posterior),
        worker_scores: params.ability,
        iterations_run,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn rejects_bad_parameters() {
        let z = Array2::from_elem((4, 3), 1u8);
        assert!(glad_slice(z.view(), 0, 0.01, 5).is_err());
        assert!(glad_slice(z.view(), 10, 0.0, 5).is_err());
    }

    #[test]
    fn perfect_workers_recover_truth() {
        let truth: Vec<u8> = (0..200).map(|i| (i % 2) as u8).collect();
        let z = Array2::from_shape_fn((200, 3), |(i, _)| truth[i]);
        let out = glad_slice(z.view(), 30, 0.01, 25).unwrap();
        for i in 0..200 {
            assert_eq!(out.labels[i], truth[i]);
        }
    }

    #[test]
    fn zero_ability_worker_is_uninformative() {
        let params = GladParams { ability: vec![0.0], log_inv_difficulty: vec![0.0, 1.0] };
        assert!((params.correct_prob(0, 0) - 0.5).abs() < 1e-12);
        assert!((params.correct_prob(0, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_central_differences() {
        let d = crate::bundled::two_gaussians(12, 5);
        let panel = crate::simulation::simulate_panel(
            &d,
            3,
            (0.4, 1.0),
            crate::simulation::NoiseMode::Shared,
            5,
        )
        .unwrap();
        let z = super::super::class_slice(panel.labels.view(), 0);
        let params = GladParams {
            ability: vec![0.7, -0.3, 1.2],
            log_inv_difficulty: (0..12).map(|i| 0.1 * i as f64 - 0.5).collect(),
        };
        let posterior: Vec<f64> = (0..12).map(|i| 0.05 + 0.07 * i as f64).collect();
        let (d_ability, d_log_beta) = glad_gradients(&params, &posterior, z.view());

        let h = 1e-6;
        for a in 0..3 {
            let mut up = params.clone();
            up.ability[a] += h;
            let mut down = params.clone();
            down.ability[a] -= h;
            let fd = (glad_expected_ll(&up, &posterior, z.view())
                - glad_expected_ll(&down, &posterior, z.view()))
                / (2.0 * h);
            let rel = (d_ability[a] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-5, "ability[{a}]: analytic {} vs fd {fd}", d_ability[a]);
        }
        for i in [0usize, 5, 11] {
            let mut up = params.clone();
            up.log_inv_difficulty[i] += h;
            let mut down = params.clone();
            down.log_inv_difficulty[i] -= h;
            let fd = (glad_expected_ll(&up, &posterior, z.view())
                - glad_expected_ll(&down, &posterior, z.view()))
                / (2.0 * h);
            let rel = (d_log_beta[i] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-5, "log_beta[{i}]: analytic {} vs fd {fd}", d_log_beta[i]);
        }
    }

    #[test]
    fn log_likelihood_is_nondecreasing() {
        let d = crate::bundled::two_gaussians(100, 3);
        let panel = crate::simulation::simulate_panel(
            &d,
            4,
            (0.4, 1.0),
            crate::simulation::NoiseMode::Shared,
            3,
        )
        .unwrap();
        let z = super::super::class_slice(panel.labels.view(), 0);
        let out = glad_slice(z.view(), 40, 0.01, 10).unwrap();
        for w in out.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "ll dropped: {} -> {}", w[0], w[1]);
        }
    }
}
