//! Confusion-matrix EM.
//!
//! Every worker is a 2x2 conditional table P(answer | true label), estimated
//! together with the class prior. Posteriors start from majority-vote
//! proportions; each round re-estimates the prior and the add-one smoothed
//! confusion tables, then refreshes the posteriors, until the largest
//! posterior change is below the tolerance or the budget runs out. The traced
//! objective is the observed log-likelihood plus the smoothing log-prior,
//! which EM with a maximum-a-posteriori M-step never decreases.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};

use super::SliceOutcome;

pub fn dawid_skene_slice(
    z: ArrayView2<'_, u8>,
    em_iters: usize,
    tol: f64,
) -> Result<SliceOutcome> {
    if em_iters == 0 {
        return Err(Error::InvalidParameter("dawid_skene needs em_iters >= 1".into()));
    }
    let (n, m) = z.dim();

    // posterior[i] = P(y_i = 1), initialized from vote proportions
    let mut posterior: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|a| z[[i, a]] as f64).sum::<f64>() / m as f64)
        .collect();

    // confusion[a][v][c] = P(worker a answers v | truth c)
    let mut confusion = vec![[[0.5f64; 2]; 2]; m];
    let mut prior = [0.5f64; 2];
    let mut trace = Vec::with_capacity(em_iters);
    let mut iterations_run = 0;

    for _ in 0..em_iters {
        iterations_run += 1;

        // M-step: prior and add-one smoothed confusion tables.
        let mass_1: f64 = posterior.iter().sum();
        prior[1] = (mass_1 / n as f64).clamp(1e-12, 1.0 - 1e-12);
        prior[0] = 1.0 - prior[1];
        for (a, table) in confusion.iter_mut().enumerate() {
            for c in 0..2usize {
                let mut counts = [1.0f64; 2]; // add-one smoothing
                for i in 0..n {
                    let r = if c == 1 { posterior[i] } else { 1.0 - posterior[i] };
                    counts[z[[i, a]] as usize] += r;
                }
                let total = counts[0] + counts[1];
                table[0][c] = counts[0] / total;
                table[1][c] = counts[1] / total;
            }
        }

        // E-step.
        let mut new_posterior = vec![0.0f64; n];
        let mut ll = 0.0;
        for i in 0..n {
            let mut log_like = [prior[0].ln(), prior[1].ln()];
            for (a, table) in confusion.iter().enumerate() {
                let v = z[[i, a]] as usize;
                log_like[0] += table[v][0].ln();
                log_like[1] += table[v][1].ln();
            }
            let max = log_like[0].max(log_like[1]);
            let w0 = (log_like[0] - max).exp();
            let w1 = (log_like[1] - max).exp();
            new_posterior[i] = w1 / (w0 + w1);
            ll += max + (w0 + w1).ln();
        }

        // add-one smoothing contributes a Dirichlet(2,2) log-prior per column
        let log_prior: f64 = confusion
            .iter()
            .flat_map(|table| (0..2).flat_map(move |c| (0..2).map(move |v| table[v][c].ln())))
            .sum();
        trace.push(ll + log_prior);

        let change = posterior
            .iter()
            .zip(new_posterior.iter())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()));
        posterior = new_posterior;
        if change < tol {
            break;
        }
    }

    let labels = Array1::from_iter(posterior.iter().map(|&p| u8::from(p > 0.5)));
    let worker_scores: Vec<f64> =
        confusion.iter().map(|table| 0.5 * (table[0][0] + table[1][1])).collect();
    Ok(SliceOutcome {
        labels,
        score: Array1::from_vec(posterior),
        worker_scores,
        iterations_run,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn zero_iterations_rejected() {
        let z = Array2::from_elem((4, 2), 1u8);
        assert!(dawid_skene_slice(z.view(), 0, 1e-6).is_err());
    }

    #[test]
    fn infinite_tolerance_stops_after_one_iteration() {
        let z = Array2::from_shape_fn((10, 3), |(i, _)| (i % 2) as u8);
        let out = dawid_skene_slice(z.view(), 100, f64::INFINITY).unwrap();
        assert_eq!(out.iterations_run, 1);
    }

    #[test]
    fn single_perfect_worker_dominates() {
        let truth: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let z = Array2::from_shape_fn((100, 1), |(i, _)| truth[i]);
        let out = dawid_skene_slice(z.view(), 100, 1e-9).unwrap();
        for i in 0..100 {
            assert_eq!(out.labels[i], truth[i]);
        }
        // near-identity confusion up to smoothing
        assert!(out.worker_scores[0] > 0.9, "diagonal mass {}", out.worker_scores[0]);
    }

    #[test]
    fn flipped_worker_gets_antidiagonal_confusion() {
        let truth: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        // worker 0 and 1 faithful, worker 2 always flipped
        let z = Array2::from_shape_fn((100, 3), |(i, a)| {
            if a == 2 {
                1 - truth[i]
            } else {
                truth[i]
            }
        });
        let out = dawid_skene_slice(z.view(), 100, 1e-9).unwrap();
        assert!(out.worker_scores[2] < 0.2, "flipped diagonal {}", out.worker_scores[2]);
        assert!(out.worker_scores[0] > 0.8);
    }

    #[test]
    fn objective_is_nondecreasing() {
        let d = crate::bundled::two_gaussians(150, 9);
        let panel = crate::simulation::simulate_panel(
            &d,
            5,
            (0.4, 1.0),
            crate::simulation::NoiseMode::Shared,
            9,
        )
        .unwrap();
        let z = super::super::class_slice(panel.labels.view(), 0);
        let out = dawid_skene_slice(z.view(), 80, 0.0, ).unwrap();
        for w in out.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective dropped: {} -> {}", w[0], w[1]);
        }
    }
}
