//! Synthetic crowd workers.
//!
//! Each worker gets a per-class accuracy threshold drawn uniformly from a
//! configured range. A single uniform noise draw per instance then decides,
//! for every worker and class at once, whether that worker reports the true
//! label (draw below the worker's threshold) or the flipped one.

use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Whether one noise draw is shared by all workers for a given instance, or
/// each (instance, worker) pair gets its own. Shared draws make worker errors
/// co-occur on the same hard instances; per-worker draws decorrelate them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    #[default]
    Shared,
    PerWorker,
}

/// A panel of synthetic workers and the labels they produced.
#[derive(Debug, Clone)]
pub struct WorkerPanel {
    /// M x K accuracy thresholds.
    pub thresholds: Array2<f64>,
    /// N x 1 (shared) or N x M (per-worker) uniform noise draws.
    pub noise_draws: Array2<f64>,
    /// N x M x K labels in {0, 1}.
    pub labels: Array3<u8>,
    pub noise_mode: NoiseMode,
    pub seed: u64,
}

impl WorkerPanel {
    pub fn n_instances(&self) -> usize {
        self.labels.dim().0
    }

    pub fn n_workers(&self) -> usize {
        self.labels.dim().1
    }

    pub fn n_classes(&self) -> usize {
        self.labels.dim().2
    }

    /// Fraction of instances on which each worker's label matches the truth,
    /// per worker and class (M x K).
    pub fn empirical_accuracy(&self, truth: &Array2<u8>) -> Array2<f64> {
        let (n, m, k) = self.labels.dim();
        let mut acc = Array2::zeros((m, k));
        for a in 0..m {
            for c in 0..k {
                let hits = (0..n).filter(|&i| self.labels[[i, a, c]] == truth[[i, c]]).count();
                acc[[a, c]] = hits as f64 / n as f64;
            }
        }
        acc
    }

    /// Long-format export: one row per (instance, worker, class).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(Error::Csv)?;
        w.write_record(["instance_id", "worker_id", "class_id", "label"])?;
        let (n, m, k) = self.labels.dim();
        for i in 0..n {
            for a in 0..m {
                for c in 0..k {
                    w.write_record([
                        i.to_string(),
                        a.to_string(),
                        c.to_string(),
                        self.labels[[i, a, c]].to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Ok(())
    }
}

/// Draws an M x K matrix of accuracy thresholds, i.i.d. uniform on
/// `[range.0, range.1)`.
pub fn draw_thresholds(m: usize, k: usize, range: (f64, f64), seed: u64) -> Result<Array2<f64>> {
    let (lo, hi) = range;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(Error::BadThresholdRange { lo, hi });
    }
    if m == 0 {
        return Err(Error::TooFewWorkers { min: 1, got: 0 });
    }
    let mut rng = rng::stream(seed, "thresholds");
    Ok(Array2::from_shape_fn((m, k), |_| rng.random_range(lo..hi)))
}

/// Synthesizes worker labels from ground truth: worker `a` reports the true
/// label for instance `i` and class `k` when the noise draw for `i` is at or
/// below its threshold, and the flipped label otherwise.
pub fn synthesize_labels(
    dataset: &Dataset,
    thresholds: &Array2<f64>,
    mode: NoiseMode,
    seed: u64,
) -> Result<WorkerPanel> {
    let n = dataset.n_instances();
    let k = dataset.n_classes();
    let m = thresholds.nrows();
    if thresholds.ncols() != k {
        return Err(Error::ShapeMismatch(format!(
            "thresholds have {} classes, dataset has {k}",
            thresholds.ncols()
        )));
    }

    let mut noise_rng = rng::stream(seed, "noise");
    let noise_draws = match mode {
        NoiseMode::Shared => Array2::from_shape_fn((n, 1), |_| noise_rng.random::<f64>()),
        NoiseMode::PerWorker => Array2::from_shape_fn((n, m), |_| noise_rng.random::<f64>()),
    };

    let mut labels = Array3::zeros((n, m, k));
    for i in 0..n {
        for a in 0..m {
            let draw = match mode {
                NoiseMode::Shared => noise_draws[[i, 0]],
                NoiseMode::PerWorker => noise_draws[[i, a]],
            };
            for c in 0..k {
                let truth = dataset.truth[[i, c]];
                labels[[i, a, c]] =
                    if draw <= thresholds[[a, c]] { truth } else { 1 - truth };
            }
        }
    }
    Ok(WorkerPanel { thresholds: thresholds.clone(), noise_draws, labels, noise_mode: mode, seed })
}

/// Convenience: thresholds plus labels in one call.
pub fn simulate_panel(
    dataset: &Dataset,
    m: usize,
    range: (f64, f64),
    mode: NoiseMode,
    seed: u64,
) -> Result<WorkerPanel> {
    let thresholds = draw_thresholds(m, dataset.n_classes(), range, seed)?;
    synthesize_labels(dataset, &thresholds, mode, seed)
}

#[allow(dead_code)]
fn noise_vector(panel: &WorkerPanel) -> Array1<f64> {
    panel.noise_draws.column(0).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use ndarray::array;

    fn toy() -> Dataset {
        Dataset::new(
            "toy",
            vec!["x".into()],
            vec!["label".into()],
            array![[0.0], [1.0], [2.0], [3.0]],
            array![[1], [1], [0], [0]],
        )
        .unwrap()
    }

    #[test]
    fn thresholds_are_deterministic() {
        let a = draw_thresholds(3, 1, (0.4, 1.0), 11).unwrap();
        let b = draw_thresholds(3, 1, (0.4, 1.0), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_mean_matches_uniform_expectation() {
        let t = draw_thresholds(1000, 1, (0.4, 1.0), 5).unwrap();
        let mean = t.iter().sum::<f64>() / 1000.0;
        assert!((mean - 0.7).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn degenerate_range_pins_thresholds() {
        let eps = 1e-9;
        let t = draw_thresholds(5, 1, (0.5, 0.5 + eps), 1).unwrap();
        assert!(t.iter().all(|&v| (v - 0.5).abs() < 1e-8));
    }

    #[test]
    fn invalid_ranges_and_counts_error() {
        assert!(draw_thresholds(3, 1, (0.9, 0.4), 0).is_err());
        assert!(draw_thresholds(3, 1, (-0.1, 0.5), 0).is_err());
        assert!(draw_thresholds(0, 1, (0.4, 1.0), 0).is_err());
    }

    #[test]
    fn label_rule_keeps_or_flips() {
        // threshold 1.0 keeps everything; threshold just above 0 flips almost
        // everything.
        let d = toy();
        let keep = synthesize_labels(&d, &array![[1.0]], NoiseMode::Shared, 3).unwrap();
        for i in 0..4 {
            assert_eq!(keep.labels[[i, 0, 0]], d.truth[[i, 0]]);
        }
        let acc = keep.empirical_accuracy(&d.truth);
        assert_eq!(acc[[0, 0]], 1.0);
    }

    #[test]
    fn shared_draw_is_common_across_workers() {
        let d = toy();
        let panel =
            simulate_panel(&d, 5, (0.4, 1.0), NoiseMode::Shared, 7).unwrap();
        assert_eq!(panel.noise_draws.ncols(), 1);
        // Workers whose thresholds exceed the draw all agree with truth.
        for i in 0..d.n_instances() {
            let rho = panel.noise_draws[[i, 0]];
            for a in 0..5 {
                let expect = if rho <= panel.thresholds[[a, 0]] {
                    d.truth[[i, 0]]
                } else {
                    1 - d.truth[[i, 0]]
                };
                assert_eq!(panel.labels[[i, a, 0]], expect);
            }
        }
    }

    #[test]
    fn per_worker_mode_draws_independently() {
        let d = toy();
        let panel = simulate_panel(&d, 3, (0.4, 1.0), NoiseMode::PerWorker, 7).unwrap();
        assert_eq!(panel.noise_draws.ncols(), 3);
    }

    #[test]
    fn adding_workers_keeps_noise_draws() {
        let d = bundled::two_gaussians(50, 1);
        let p3 = simulate_panel(&d, 3, (0.4, 1.0), NoiseMode::Shared, 9).unwrap();
        let p7 = simulate_panel(&d, 7, (0.4, 1.0), NoiseMode::Shared, 9).unwrap();
        assert_eq!(p3.noise_draws, p7.noise_draws);
    }

    #[test]
    fn empirical_accuracy_tracks_threshold() {
        let d = bundled::two_gaussians(2000, 2);
        let thresholds = array![[0.45], [0.7], [0.95]];
        let panel = synthesize_labels(&d, &thresholds, NoiseMode::Shared, 13).unwrap();
        let acc = panel.empirical_accuracy(&d.truth);
        for a in 0..3 {
            assert!(
                (acc[[a, 0]] - thresholds[[a, 0]]).abs() <= 0.05,
                "worker {a}: acc {} vs threshold {}",
                acc[[a, 0]],
                thresholds[[a, 0]]
            );
        }
    }
}
