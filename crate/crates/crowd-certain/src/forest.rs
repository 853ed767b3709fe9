//! Seeded random forest for binary targets.
//!
//! The conventional recipe: each tree fits a bootstrap resample, each split
//! considers ceil(sqrt(F)) features drawn without replacement, impurity is
//! gini, leaves hold Laplace-smoothed class frequencies, and the forest
//! probability is the mean over trees. All randomness comes from the seed, so
//! equal inputs and seeds rebuild identical forests.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitCriterion {
    #[default]
    Gini,
}

/// Forest hyperparameters. Defaults: ten forests of four depth-4 trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    /// Number of independently seeded forests per worker.
    pub g_ensembles: usize,
    pub trees_per_forest: usize,
    pub max_depth: usize,
    pub split_criterion: SplitCriterion,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            g_ensembles: 10,
            trees_per_forest: 4,
            max_depth: 4,
            split_criterion: SplitCriterion::Gini,
            min_leaf: 1,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g_ensembles == 0
            || self.trees_per_forest == 0
            || self.max_depth == 0
            || self.min_leaf == 0
        {
            return Err(Error::InvalidParameter(
                "forest counts (ensembles, trees, depth, min_leaf) must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf {
        /// Laplace-smoothed probability of class 1.
        prob: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, row: ArrayView1<'_, f64>) -> f64 {
        match self {
            Node::Leaf { prob } => *prob,
            Node::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    root: Node,
}

impl DecisionTree {
    /// Fits a depth-limited CART tree on the given rows. `feature_sample`
    /// features are drawn per split from `rng`.
    pub fn fit(
        features: ArrayView2<'_, f64>,
        labels: &[u8],
        rows: &[usize],
        max_depth: usize,
        min_leaf: usize,
        feature_sample: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let root = build_node(features, labels, rows, max_depth, min_leaf, feature_sample, rng);
        Self { root }
    }

    pub fn predict_proba(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.root.predict(row)
    }
}

fn leaf_prob(labels: &[u8], rows: &[usize]) -> f64 {
    let ones: usize = rows.iter().map(|&i| labels[i] as usize).sum();
    (ones as f64 + 1.0) / (rows.len() as f64 + 2.0)
}

fn gini(ones: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = ones / total;
    2.0 * p * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn build_node(
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    rows: &[usize],
    depth_left: usize,
    min_leaf: usize,
    feature_sample: usize,
    rng: &mut ChaCha8Rng,
) -> Node {
    let total_ones: usize = rows.iter().map(|&i| labels[i] as usize).sum();
    let pure = total_ones == 0 || total_ones == rows.len();
    if depth_left == 0 || pure || rows.len() < 2 * min_leaf {
        return Node::Leaf { prob: leaf_prob(labels, rows) };
    }

    let n_features = features.ncols();
    let candidates = sample(rng, n_features, feature_sample.min(n_features));
    let mut candidates: Vec<usize> = candidates.into_iter().collect();
    candidates.sort_unstable();

    let parent_impurity = gini(total_ones as f64, rows.len() as f64);
    let mut best: Option<BestSplit> = None;
    let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
    for &feature in &candidates {
        sorted.clear();
        sorted.extend(rows.iter().map(|&i| (features[[i, feature]], labels[i])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let total = rows.len() as f64;
        let mut left_ones = 0.0;
        let mut left_n = 0.0;
        for w in 0..sorted.len() - 1 {
            left_ones += sorted[w].1 as f64;
            left_n += 1.0;
            // Only split between distinct values.
            if sorted[w].0 == sorted[w + 1].0 {
                continue;
            }
            let right_n = total - left_n;
            if (left_n as usize) < min_leaf || (right_n as usize) < min_leaf {
                continue;
            }
            let weighted = (left_n / total) * gini(left_ones, left_n)
                + (right_n / total) * gini(total_ones as f64 - left_ones, right_n);
            let better = match &best {
                None => weighted < parent_impurity - 1e-12,
                Some(b) => weighted < b.impurity - 1e-12,
            };
            if better {
                best = Some(BestSplit {
                    feature,
                    threshold: 0.5 * (sorted[w].0 + sorted[w + 1].0),
                    impurity: weighted,
                });
            }
        }
    }

    match best {
        None => Node::Leaf { prob: leaf_prob(labels, rows) },
        Some(split) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| features[[i, split.feature]] <= split.threshold);
            let left = build_node(
                features, labels, &left_rows, depth_left - 1, min_leaf, feature_sample, rng,
            );
            let right = build_node(
                features, labels, &right_rows, depth_left - 1, min_leaf, feature_sample, rng,
            );
            Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

/// A bootstrap-aggregated set of decision trees with a shared seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForest {
    format_version: u32,
    seed: u64,
    trees: Vec<DecisionTree>,
    /// Set when the training labels were single-class: the forest then
    /// returns this class probability for every input.
    constant: Option<f64>,
}

impl RandomForest {
    /// Trains a forest on `features`/`labels`. All bootstrap and feature
    /// sampling randomness derives from `seed`.
    pub fn fit(
        features: ArrayView2<'_, f64>,
        labels: &[u8],
        cfg: &ForestConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = features.nrows();
        if n == 0 || labels.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} rows vs {} labels",
                n,
                labels.len()
            )));
        }
        let ones: usize = labels.iter().map(|&v| v as usize).sum();
        if ones == 0 || ones == n {
            return Ok(Self {
                format_version: MODEL_FORMAT_VERSION,
                seed,
                trees: Vec::new(),
                constant: Some(if ones == 0 { 0.0 } else { 1.0 }),
            });
        }

        let feature_sample = (features.ncols() as f64).sqrt().ceil() as usize;
        let mut trees = Vec::with_capacity(cfg.trees_per_forest);
        for t in 0..cfg.trees_per_forest {
            let mut rng = rng::indexed_stream(seed, "tree", t as u64);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            trees.push(DecisionTree::fit(
                features,
                labels,
                &rows,
                cfg.max_depth,
                cfg.min_leaf,
                feature_sample,
                &mut rng,
            ));
        }
        Ok(Self { format_version: MODEL_FORMAT_VERSION, seed, trees, constant: None })
    }

    /// Mean class-1 probability across trees for one row.
    pub fn predict_proba_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(row)).sum();
        sum / self.trees.len() as f64
    }

    /// Class-1 probabilities for each row of `features`.
    pub fn predict_proba(&self, features: ArrayView2<'_, f64>) -> Vec<f64> {
        (0..features.nrows()).map(|i| self.predict_proba_row(features.row(i))).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: Self =
            serde_json::from_str(json).map_err(|e| Error::Serialization(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}
