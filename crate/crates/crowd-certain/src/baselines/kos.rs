//! Iterative message passing over the worker/task bipartite graph.
//!
//! Votes are mapped to +1/-1. Task messages accumulate reliability-weighted
//! votes, worker messages accumulate how well a worker matches the current
//! task beliefs, leaving the recipient out of each sum. Messages are rescaled
//! every round so magnitudes stay bounded; rescaling preserves signs and
//! ratios, which is all the final decision uses.

use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

use super::SliceOutcome;

pub fn kos_slice(z: ArrayView2<'_, u8>, iters: usize, seed: u64) -> Result<SliceOutcome> {
    if iters == 0 {
        return Err(Error::InvalidParameter("kos needs at least one iteration".into()));
    }
    let (n, m) = z.dim();
    let votes = z.mapv(|v| 2.0 * v as f64 - 1.0);

    // worker messages start near one so early task beliefs follow raw votes;
    // the draw is keyed by each worker's label column, not its position
    let normal = Normal::new(1.0, 0.1).expect("valid parameters");
    let mut worker_msg = Array2::zeros((m, n));
    for a in 0..m {
        let column: Vec<u8> = (0..n).map(|i| z[[i, a]]).collect();
        let mut stream = rng::content_stream(seed, "kos-init", &column);
        for i in 0..n {
            worker_msg[[a, i]] = normal.sample(&mut stream);
        }
    }
    let mut task_msg = Array2::zeros((n, m));

    for _ in 0..iters {
        if m > 1 {
            for i in 0..n {
                let total: f64 = (0..m).map(|a| votes[[i, a]] * worker_msg[[a, i]]).sum();
                for a in 0..m {
                    task_msg[[i, a]] = total - votes[[i, a]] * worker_msg[[a, i]];
                }
            }
            rescale(&mut task_msg);
        }
        if n > 1 {
            for a in 0..m {
                let total: f64 = (0..n).map(|i| votes[[i, a]] * task_msg[[i, a]]).sum();
                for i in 0..n {
                    worker_msg[[a, i]] = total - votes[[i, a]] * task_msg[[i, a]];
                }
            }
            rescale(&mut worker_msg);
        }
    }

    let mut labels = Array1::zeros(n);
    let mut score = Array1::zeros(n);
    for i in 0..n {
        let s: f64 = (0..m).map(|a| votes[[i, a]] * worker_msg[[a, i]]).sum();
        labels[i] = u8::from(s > 0.0);
        score[i] = 1.0 / (1.0 + (-s).exp());
    }
    let worker_scores: Vec<f64> =
        (0..m).map(|a| (0..n).map(|i| worker_msg[[a, i]]).sum::<f64>() / n as f64).collect();

    Ok(SliceOutcome {
        labels,
        score,
        worker_scores,
        iterations_run: iters,
        objective_trace: Vec::new(),
    })
}

fn rescale(messages: &mut Array2<f64>) {
    let max = messages.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if max > 0.0 {
        messages.mapv_inplace(|v| v / max);
    }
}
