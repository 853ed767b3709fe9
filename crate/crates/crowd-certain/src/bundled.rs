//! Bundled desk-scale datasets.
//!
//! Two deterministic synthetic generators plus two small real tables embedded
//! at build time, so benchmarks and tests run offline. Names accepted by
//! [`by_name`]: `two-gaussians`, `xor-grid`, `iris`, `wine`.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{parse_csv, CsvSchema, Dataset};
use crate::error::{Error, Result};
use crate::rng;

const IRIS_CSV: &str = include_str!("../data/iris.csv");
const WINE_CSV: &str = include_str!("../data/wine.csv");

/// Names resolvable by [`by_name`], in canonical order.
pub const BUNDLED_NAMES: [&str; 4] = ["two-gaussians", "xor-grid", "iris", "wine"];

/// Resolves a bundled dataset by name.
pub fn by_name(name: &str) -> Result<Dataset> {
    match name {
        "two-gaussians" => Ok(two_gaussians(1000, 42)),
        "xor-grid" => Ok(xor_grid(30, 42)),
        "iris" => iris(),
        "wine" => wine(),
        other => Err(Error::UnknownDataset(other.to_string())),
    }
}

/// Two well-separated Gaussian blobs in four dimensions (two informative,
/// two noise), alternating classes so folds stay balanced.
pub fn two_gaussians(n: usize, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, "two-gaussians");
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut features = Array2::zeros((n, 4));
    let mut truth = Array2::zeros((n, 1));
    for i in 0..n {
        let label = (i % 2) as u8;
        let center = if label == 1 { 1.5 } else { -1.5 };
        features[[i, 0]] = center + normal.sample(&mut rng);
        features[[i, 1]] = center + normal.sample(&mut rng);
        features[[i, 2]] = normal.sample(&mut rng);
        features[[i, 3]] = normal.sample(&mut rng);
        truth[[i, 0]] = label;
    }
    Dataset::new(
        format!("two-gaussians-{n}"),
        vec!["x0".into(), "x1".into(), "noise0".into(), "noise1".into()],
        vec!["label".into()],
        features,
        truth,
    )
    .expect("generator invariants hold")
}

/// A jittered `side` x `side` grid on the unit square labeled by the XOR of
/// the two half-plane indicators. Not linearly separable; depth-2 splits
/// recover it.
pub fn xor_grid(side: usize, seed: u64) -> Dataset {
    let n = side * side;
    let mut rng = rng::stream(seed, "xor-grid");
    let mut features = Array2::zeros((n, 2));
    let mut truth = Array2::zeros((n, 1));
    let step = 1.0 / side as f64;
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            let x = (c as f64 + 0.5) * step + rng.random_range(-0.2..0.2) * step;
            let y = (r as f64 + 0.5) * step + rng.random_range(-0.2..0.2) * step;
            features[[i, 0]] = x;
            features[[i, 1]] = y;
            truth[[i, 0]] = u8::from((x > 0.5) ^ (y > 0.5));
        }
    }
    Dataset::new(
        format!("xor-grid-{side}x{side}"),
        vec!["x".into(), "y".into()],
        vec!["label".into()],
        features,
        truth,
    )
    .expect("generator invariants hold")
}

/// Fisher's iris measurements restricted to two species; label 1 = setosa.
/// 100 rows, 50 positives.
pub fn iris() -> Result<Dataset> {
    parse_csv(IRIS_CSV.as_bytes(), &CsvSchema::single_label("label"), "iris")
}

/// The UCI wine table restricted to the first two cultivars; label 1 =
/// cultivar one. 130 rows, 59 positives.
pub fn wine() -> Result<Dataset> {
    parse_csv(WINE_CSV.as_bytes(), &CsvSchema::single_label("label"), "wine")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iris_shape_matches_expected_counts() {
        let d = iris().unwrap();
        assert_eq!(d.n_instances(), 100);
        assert_eq!(d.n_features(), 4);
        let positives: usize = d.truth.column(0).iter().map(|&v| v as usize).sum();
        assert_eq!(positives, 50);
    }

    #[test]
    fn wine_loads() {
        let d = wine().unwrap();
        assert_eq!(d.n_instances(), 130);
        assert_eq!(d.n_features(), 13);
        let positives: usize = d.truth.column(0).iter().map(|&v| v as usize).sum();
        assert_eq!(positives, 59);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = two_gaussians(50, 9);
        let b = two_gaussians(50, 9);
        assert_eq!(a.features, b.features);
        assert_eq!(a.truth, b.truth);

        let a = xor_grid(8, 9);
        let b = xor_grid(8, 9);
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn xor_labels_match_quadrants() {
        let d = xor_grid(10, 3);
        for i in 0..d.n_instances() {
            let x = d.features[[i, 0]];
            let y = d.features[[i, 1]];
            assert_eq!(d.truth[[i, 0]], u8::from((x > 0.5) ^ (y > 0.5)));
        }
    }

    #[test]
    fn all_bundled_names_resolve() {
        for name in BUNDLED_NAMES {
            assert!(by_name(name).is_ok(), "{name} failed to load");
        }
        assert!(by_name("nope").is_err());
    }
}
