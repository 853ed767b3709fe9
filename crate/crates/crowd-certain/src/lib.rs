//! Truth inference for crowdsourced and ensemble labels.
//!
//! Workers' labels are aggregated by a weighted soft majority vote whose
//! weights come from the dispersion of per-worker classifier ensembles:
//! consistent workers earn weight, inconsistent (or consistently contrarian)
//! ones lose it. Each aggregated label ships with two confidence scores, and
//! ten classical aggregators plus a synthetic worker generator and a
//! calibration-aware metrics suite round out a benchmark harness.
//!
//! See the `examples/` directory for runnable walkthroughs of each stage:
//! simulating workers, training ensembles, measuring uncertainty,
//! aggregating, scoring confidence, and sweeping full benchmarks. The
//! `bench` binary drives the same harness from the command line.

pub mod aggregation;
pub mod baselines;
pub mod bench;
pub mod bundled;
pub mod confidence;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod simulation;
pub mod uncertainty;

pub use aggregation::{
    aggregate, consistency, reliability, weights, AggregationResult, ConsistencyMode,
    ConsistencyScores, PenaltyReference, WorkerWeights,
};
pub use baselines::{BaselineConfig, BaselineMethod, BaselineResult};
pub use bench::{run_benchmark, BenchmarkReport, RunConfig};
pub use confidence::{beta_confidence, beta_shape, freq_confidence, ConfidenceScores};
pub use dataset::{load_csv, make_folds, CsvSchema, Dataset, FoldPlan};
pub use ensemble::{
    binarization_threshold, classifier_majority, train_worker_ensemble, EnsemblePredictions,
    ThresholdMode, WorkerEnsembles,
};
pub use error::{Error, Result};
pub use forest::{ForestConfig, RandomForest};
pub use pipeline::{run_cv, run_fold, CrowdCertainConfig, CrowdCertainRun};
pub use simulation::{draw_thresholds, simulate_panel, synthesize_labels, NoiseMode, WorkerPanel};
pub use uncertainty::{UncertaintyMeasure, UncertaintyScores};
