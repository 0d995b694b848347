//! Stroke classifiers: kernel SVMs, k-NN variants and bagged trees.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::knn::{self, Metric, Weighting};
use super::svm::{self, BinarySvm, Kernel};
use super::trees::{self, Tree};
use crate::patterns::TableMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GaussianSvm,
    QuadraticSvm,
    WeightedKnn,
    CosineKnn,
    FineKnn,
    MediumKnn,
    BaggedTrees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSpec {
    pub algorithm: Algorithm,
    /// SVM kernel scale; `None` picks `sqrt(n_features)`.
    pub kernel_scale: Option<f64>,
    pub box_constraint: f64,
    pub neighbors: usize,
    pub max_splits: usize,
    pub learners: usize,
    pub seed: u64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        Self::preset("medium-gaussian-svm").unwrap()
    }
}

pub const PRESETS: [&str; 10] = [
    "medium-gaussian-svm",
    "coarse-gaussian-svm",
    "fine-gaussian-svm",
    "quadratic-svm",
    "fine-knn",
    "medium-knn",
    "cosine-knn",
    "weighted-knn",
    "bagged-trees",
    "auto-gaussian-svm",
];

impl ClassifierSpec {
    fn base(algorithm: Algorithm) -> Self {
        Self { algorithm, kernel_scale: None, box_constraint: 1.0, neighbors: 10, max_splits: 11, learners: 30, seed: 0 }
    }

    pub fn preset(name: &str) -> Result<Self> {
        use Algorithm::*;
        Ok(match name {
            "medium-gaussian-svm" => Self { kernel_scale: Some(2.2), ..Self::base(GaussianSvm) },
            "coarse-gaussian-svm" => Self { kernel_scale: Some(8.9), ..Self::base(GaussianSvm) },
            "fine-gaussian-svm" => Self { kernel_scale: Some(0.56), ..Self::base(GaussianSvm) },
            "auto-gaussian-svm" => Self::base(GaussianSvm),
            "quadratic-svm" => Self::base(QuadraticSvm),
            "fine-knn" => Self { neighbors: 1, ..Self::base(FineKnn) },
            "medium-knn" => Self::base(MediumKnn),
            "cosine-knn" => Self::base(CosineKnn),
            "weighted-knn" => Self::base(WeightedKnn),
            "bagged-trees" => Self::base(BaggedTrees),
            other => {
                return Err(Error::Config(format!("unknown classifier '{other}'; expected one of {}", PRESETS.join(", "))))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.kernel_scale.is_some_and(|s| !(s > 0.0))
            || !(self.box_constraint > 0.0)
            || self.neighbors == 0
            || self.learners == 0;
        if bad {
            return Err(Error::Config("classifier hyperparameters must be positive".into()));
        }
        Ok(())
    }
}

impl FromStr for ClassifierSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::preset(s)
    }
}

/// Angle (degrees) and range (pixels) seen by one microphone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicFeature {
    pub angle: f64,
    pub range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StrokeSample {
    pub bottom: Option<MicFeature>,
    pub top: Option<MicFeature>,
}

impl StrokeSample {
    /// Feature vector for a microphone mode, `None` when a needed microphone
    /// is missing.
    pub fn vector(&self, mode: TableMode) -> Option<Vec<f64>> {
        match mode {
            TableMode::Bottom => self.bottom.map(|b| vec![b.angle, b.range]),
            TableMode::Top => self.top.map(|t| vec![t.angle, t.range]),
            TableMode::Both => match (self.bottom, self.top) {
                (Some(b), Some(t)) => Some(vec![b.angle, b.range, t.angle, t.range]),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledStrokeSample {
    pub stroke: u32,
    #[serde(flatten)]
    pub sample: StrokeSample,
}

/// z-score with training statistics; constant features are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(points: &[Vec<f64>]) -> Self {
        let d = points[0].len();
        let n = points.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|j| {
                let var = points.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Svm { kernel: Kernel, pairs: Vec<(usize, usize, BinarySvm)> },
    Knn { k: usize, metric: Metric, weighting: Weighting, labels: Vec<usize> },
    Trees { trees: Vec<Tree> },
}

/// Trained multi-class model over stroke ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub spec: ClassifierSpec,
    pub mode: TableMode,
    pub classes: Vec<u32>,
    pub standardizer: Standardizer,
    /// Standardized training points (SVM support vectors and k-NN index into these).
    pub points: Vec<Vec<f64>>,
    pub model: Model,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

pub fn train_raw(points: &[Vec<f64>], labels: &[u32], spec: &ClassifierSpec, mode: TableMode) -> Result<Classifier> {
    spec.validate()?;
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::Training("no training samples".into()));
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training(format!("need at least 2 classes, got {}", classes.len())));
    }
    for &c in &classes {
        let n = labels.iter().filter(|&&l| l == c).count();
        if n < 2 {
            return Err(Error::Training(format!("class {c} has {n} sample(s); at least 2 required")));
        }
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite feature value".into()));
    }
    let standardizer = Standardizer::fit(points);
    let pts: Vec<Vec<f64>> = points.iter().map(|p| standardizer.apply(p)).collect();
    let idx: Vec<usize> = labels.iter().map(|l| classes.binary_search(l).unwrap()).collect();
    let dim = pts[0].len() as f64;
    let model = match spec.algorithm {
        Algorithm::GaussianSvm | Algorithm::QuadraticSvm => {
            let scale = spec.kernel_scale.unwrap_or(dim.sqrt());
            let kernel = match spec.algorithm {
                Algorithm::GaussianSvm => Kernel::Gaussian { scale },
                _ => Kernel::Quadratic { scale },
            };
            let mut pairs = Vec::new();
            for a in 0..classes.len() {
                for b in a + 1..classes.len() {
                    let rows: Vec<usize> = (0..pts.len()).filter(|&i| idx[i] == a || idx[i] == b).collect();
                    let y: Vec<f64> = rows.iter().map(|&i| if idx[i] == a { 1.0 } else { -1.0 }).collect();
                    pairs.push((a, b, svm::train(&kernel, &pts, &rows, &y, spec.box_constraint)));
                }
            }
            Model::Svm { kernel, pairs }
        }
        Algorithm::FineKnn | Algorithm::MediumKnn | Algorithm::CosineKnn | Algorithm::WeightedKnn => {
            let (metric, weighting) = match spec.algorithm {
                Algorithm::CosineKnn => (Metric::Cosine, Weighting::Equal),
                Algorithm::WeightedKnn => (Metric::Euclidean, Weighting::InverseSquare),
                _ => (Metric::Euclidean, Weighting::Equal),
            };
            let k = if spec.algorithm == Algorithm::FineKnn { 1 } else { spec.neighbors };
            Model::Knn { k, metric, weighting, labels: idx }
        }
        Algorithm::BaggedTrees => {
            Model::Trees { trees: trees::bag(&pts, &idx, classes.len(), spec.max_splits, spec.learners, spec.seed) }
        }
    };
    let points = if matches!(model, Model::Trees { .. }) { Vec::new() } else { pts };
    Ok(Classifier { spec: spec.clone(), mode, classes, standardizer, points, model })
}

/// Trains on the samples that carry every feature `mode` needs.
pub fn train_stroke_classifier(
    samples: &[LabeledStrokeSample],
    spec: &ClassifierSpec,
    mode: TableMode,
) -> Result<Classifier> {
    let (points, labels): (Vec<_>, Vec<_>) = samples
        .iter()
        .filter_map(|s| s.sample.vector(mode).map(|v| (v, s.stroke)))
        .unzip();
    train_raw(&points, &labels, spec, mode)
}

impl Classifier {
    /// Per-class scores aligned with `classes`; larger is more likely.
    pub fn scores_raw(&self, x: &[f64]) -> Vec<f64> {
        let z = self.standardizer.apply(x);
        let n = self.classes.len();
        match &self.model {
            Model::Svm { kernel, pairs } => {
                let mut votes = vec![0.0; n];
                let mut margin = vec![0.0; n];
                for (a, b, m) in pairs {
                    let d = m.decision(kernel, &self.points, &z);
                    if d > 0.0 {
                        votes[*a] += 1.0;
                    } else {
                        votes[*b] += 1.0;
                    }
                    margin[*a] += d;
                    margin[*b] -= d;
                }
                // Votes decide; summed margins only separate tied vote counts.
                votes.iter().zip(&margin).map(|(v, m)| v + 1e-3 * m.tanh()).collect()
            }
            Model::Knn { k, metric, weighting, labels } => knn::vote(&self.points, labels, n, &z, *k, *metric, *weighting),
            Model::Trees { trees } => trees::predict(trees, n, &z),
        }
    }

    pub fn predict_raw(&self, x: &[f64]) -> u32 {
        let s = self.scores_raw(x);
        let best = (0..s.len()).fold(0, |b, i| if s[i] > s[b] { i } else { b });
        self.classes[best]
    }

    pub fn scores(&self, sample: &StrokeSample) -> Option<Vec<f64>> {
        sample.vector(self.mode).map(|v| self.scores_raw(&v))
    }

    pub fn predict(&self, sample: &StrokeSample) -> Option<u32> {
        sample.vector(self.mode).map(|v| self.predict_raw(&v))
    }

    pub fn score_of(&self, scores: &[f64], stroke: u32) -> f64 {
        self.classes.binary_search(&stroke).map_or(f64::NEG_INFINITY, |i| scores[i])
    }
}

/// Stratified k-fold accuracy, one value per fold.
pub fn cross_validate(
    samples: &[LabeledStrokeSample],
    spec: &ClassifierSpec,
    mode: TableMode,
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if folds < 2 {
        return Err(Error::Config("cross-validation needs at least 2 folds".into()));
    }
    let usable: Vec<&LabeledStrokeSample> = samples.iter().filter(|s| s.sample.vector(mode).is_some()).collect();
    let mut classes: Vec<u32> = usable.iter().map(|s| s.stroke).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; usable.len()];
    let mut next = 0;
    for c in classes {
        let mut members: Vec<usize> = (0..usable.len()).filter(|&i| usable[i].stroke == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    (0..folds)
        .map(|f| {
            let train: Vec<LabeledStrokeSample> =
                (0..usable.len()).filter(|&i| fold_of[i] != f).map(|i| *usable[i]).collect();
            let test: Vec<&LabeledStrokeSample> = (0..usable.len()).filter(|&i| fold_of[i] == f).map(|i| usable[i]).collect();
            let model = train_stroke_classifier(&train, spec, mode)?;
            let hits = test.iter().filter(|s| model.predict(&s.sample) == Some(s.stroke)).count();
            Ok(if test.is_empty() { 0.0 } else { hits as f64 / test.len() as f64 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<u32>) {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let t = i as f64 * 0.1;
            pts.push(vec![1.0 + t, 2.0 - t]);
            labels.push(3);
            pts.push(vec![-1.0 - t, -2.0 + t]);
            labels.push(7);
            pts.push(vec![5.0 + t, -4.0 + t]);
            labels.push(9);
        }
        (pts, labels)
    }

    #[test]
    fn every_algorithm_fits_separable_data() {
        let (pts, labels) = toy();
        for name in PRESETS {
            let spec = ClassifierSpec::preset(name).unwrap();
            let m = train_raw(&pts, &labels, &spec, TableMode::Bottom).unwrap();
            let acc = pts.iter().zip(&labels).filter(|(p, l)| m.predict_raw(p) == **l).count();
            assert_eq!(acc, pts.len(), "{name}");
        }
    }

    #[test]
    fn degenerate_training_sets_rejected() {
        let spec = ClassifierSpec::default();
        assert!(train_raw(&[vec![0.0], vec![1.0]], &[1, 1], &spec, TableMode::Bottom).is_err());
        assert!(train_raw(&[vec![0.0], vec![1.0], vec![2.0]], &[1, 1, 2], &spec, TableMode::Bottom).is_err());
    }

    #[test]
    fn cross_validation_reports_each_fold() {
        let (pts, labels) = toy();
        let samples: Vec<LabeledStrokeSample> = pts
            .iter()
            .zip(&labels)
            .map(|(p, &l)| LabeledStrokeSample {
                stroke: l,
                sample: StrokeSample { bottom: Some(MicFeature { angle: p[0], range: p[1] }), top: None },
            })
            .collect();
        let acc = cross_validate(&samples, &ClassifierSpec::default(), TableMode::Bottom, 5, 1).unwrap();
        assert_eq!(acc.len(), 5);
        assert!(acc.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn presets_parse() {
        assert_eq!("fine-knn".parse::<ClassifierSpec>().unwrap().neighbors, 1);
        assert!("nope".parse::<ClassifierSpec>().is_err());
        assert_eq!(ClassifierSpec::default().kernel_scale, Some(2.2));
    }
}
