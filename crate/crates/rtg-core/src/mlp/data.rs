//! Synthetic 2D classification datasets.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Points with class labels and a fixed train/test split.
///
/// The first `train_count()` rows are the training set, the rest the test
/// set. Points are drawn i.i.d., so a positional split is already a random
/// one.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    /// Fraction of points in the training split, in (0, 1).
    pub split: f64,
}

impl LabeledDataset {
    pub fn new(points: Array2<f64>, labels: Vec<usize>, n_classes: usize, split: f64) -> Result<Self> {
        if labels.len() != points.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} labels",
                points.nrows(),
                labels.len()
            )));
        }
        if points.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if !(split > 0.0 && split < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split fraction must lie strictly between 0 and 1, got {split}"
            )));
        }
        Ok(Self {
            points,
            labels,
            n_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn train_count(&self) -> usize {
        // round() keeps 80/20 exact for the usual sizes and never empties
        // the training split for len >= 2
        ((self.len() as f64) * self.split).round() as usize
    }

    pub fn train_points(&self) -> ArrayView2<'_, f64> {
        self.points.slice(ndarray::s![..self.train_count(), ..])
    }

    pub fn train_labels(&self) -> &[usize] {
        &self.labels[..self.train_count()]
    }

    pub fn test_points(&self) -> ArrayView2<'_, f64> {
        self.points.slice(ndarray::s![self.train_count().., ..])
    }

    pub fn test_labels(&self) -> &[usize] {
        &self.labels[self.train_count()..]
    }
}

/// Radius at which the disk covers half of `[-1,1]^2`: sqrt(2/pi).
pub fn balanced_circle_radius() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

fn uniform_square(rng: &mut ChaCha8Rng, count: usize) -> Array2<f64> {
    let mut points = Array2::zeros((count, 2));
    for i in 0..count {
        for j in 0..2 {
            points[[i, j]] = rng.gen_range(-1.0..=1.0);
        }
    }
    points
}

fn circle_label(x: f64, y: f64, radius: f64) -> usize {
    usize::from(x * x + y * y < radius * radius)
}

/// Binary dataset on `[-1,1]^2`: label 1 strictly inside the origin-centered
/// disk of the given radius, label 0 elsewhere. 80/20 train/test split.
pub fn make_circle_dataset(count: usize, radius: f64, seed: u64) -> Result<LabeledDataset> {
    if count < 10 {
        return Err(Error::InvalidConfig(format!(
            "circle dataset needs at least 10 points, got {count}"
        )));
    }
    if !(radius > 0.0 && radius < std::f64::consts::SQRT_2) {
        return Err(Error::InvalidConfig(format!(
            "radius must lie in (0, sqrt(2)), got {radius}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = uniform_square(&mut rng, count);
    let labels = (0..count)
        .map(|i| circle_label(points[[i, 0]], points[[i, 1]], radius))
        .collect();
    LabeledDataset::new(points, labels, 2, 0.8)
}

/// Points uniform on `[-1,1]^2` with labels drawn uniformly over `n_classes`,
/// independent of the points. Useful as a pure-memorization task: no rule
/// connects inputs to labels. 80/20 train/test split.
pub fn make_random_label_dataset(count: usize, n_classes: usize, seed: u64) -> Result<LabeledDataset> {
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    if n_classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 classes, got {n_classes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = uniform_square(&mut rng, count);
    let labels = (0..count).map(|_| rng.gen_range(0..n_classes)).collect();
    LabeledDataset::new(points, labels, n_classes, 0.8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_rule_is_strict_interior() {
        assert_eq!(circle_label(0.0, 0.0, 0.5), 1);
        assert_eq!(circle_label(1.0, 1.0, 1.4), 0);
        assert_eq!(circle_label(0.5, 0.0, 0.5), 0, "boundary is class 0");
    }

    #[test]
    fn circle_labels_match_rule_and_points_stay_in_square() {
        let data = make_circle_dataset(500, 0.6, 11).unwrap();
        for i in 0..data.len() {
            let (x, y) = (data.points[[i, 0]], data.points[[i, 1]]);
            assert!((-1.0..=1.0).contains(&x) && (-1.0..=1.0).contains(&y));
            assert_eq!(data.labels[i], circle_label(x, y, 0.6));
        }
    }

    #[test]
    fn balanced_radius_balances_classes() {
        let data = make_circle_dataset(10_000, balanced_circle_radius(), 3).unwrap();
        let frac = data.labels.iter().sum::<usize>() as f64 / data.len() as f64;
        assert!((0.48..=0.52).contains(&frac), "class-1 fraction {frac}");
    }

    #[test]
    fn circle_rejects_tiny_counts_and_bad_radii() {
        assert!(make_circle_dataset(9, 0.5, 0).is_err());
        assert!(make_circle_dataset(100, 0.0, 0).is_err());
        assert!(make_circle_dataset(100, 1.5, 0).is_err());
    }

    #[test]
    fn datasets_are_seed_deterministic() {
        assert_eq!(
            make_circle_dataset(200, 0.8, 42).unwrap(),
            make_circle_dataset(200, 0.8, 42).unwrap()
        );
        assert_eq!(
            make_random_label_dataset(200, 4, 42).unwrap(),
            make_random_label_dataset(200, 4, 42).unwrap()
        );
        assert_ne!(
            make_random_label_dataset(200, 4, 42).unwrap(),
            make_random_label_dataset(200, 4, 43).unwrap()
        );
    }

    #[test]
    fn random_labels_are_roughly_balanced() {
        let data = make_random_label_dataset(1000, 2, 7).unwrap();
        let frac = data.labels.iter().sum::<usize>() as f64 / 1000.0;
        assert!((0.44..=0.56).contains(&frac), "label-1 fraction {frac}");
    }

    #[test]
    fn random_label_edge_cases() {
        let tiny = make_random_label_dataset(2, 2, 5).unwrap();
        assert_eq!(tiny.len(), 2);
        assert!(tiny.labels.iter().all(|&l| l < 2));
        assert!(make_random_label_dataset(100, 1, 5).is_err());
        assert!(make_random_label_dataset(0, 2, 5).is_err());
    }

    #[test]
    fn split_is_80_20() {
        let data = make_circle_dataset(10_000, 0.5, 1).unwrap();
        assert_eq!(data.train_count(), 8000);
        assert_eq!(data.train_points().nrows(), 8000);
        assert_eq!(data.test_points().nrows(), 2000);
        assert_eq!(data.train_labels().len() + data.test_labels().len(), 10_000);
    }

    #[test]
    fn new_validates_labels_and_split() {
        let pts = Array2::zeros((3, 2));
        assert!(LabeledDataset::new(pts.clone(), vec![0, 1, 2], 2, 0.8).is_err());
        assert!(LabeledDataset::new(pts.clone(), vec![0, 1], 2, 0.8).is_err());
        assert!(LabeledDataset::new(pts.clone(), vec![0, 1, 1], 2, 1.0).is_err());
        assert!(LabeledDataset::new(pts, vec![0, 1, 1], 2, 0.8).is_ok());
    }
}
