//! Random-forest classifier that predicts the direction from a segment to
//! the segment that follows it.

mod tree;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Segment, TileVocabulary, SEGMENT_TILES};
use crate::direction::Direction;
use crate::error::{Error, Result};

pub use tree::{Node, Tree, CLASSES};

/// Anything that scores the four placement directions for a segment.
pub trait DirectionClassifier: Sync {
    /// Probabilities indexed by [`Direction::index`].
    fn predict_proba(&self, segment: &Segment) -> Result<[f64; 4]>;
}

/// Highest-probability direction that is neither the reverse of `arrival`
/// nor in `excluded`. Ties go to the earlier of Up, Down, Left, Right.
pub fn choose_direction(probs: &[f64; 4], arrival: Option<Direction>, excluded: &[Direction]) -> Option<Direction> {
    let forbidden = arrival.map(Direction::opposite);
    let mut best: Option<(f64, Direction)> = None;
    for d in Direction::ALL {
        if Some(d) == forbidden || excluded.contains(&d) {
            continue;
        }
        let p = probs[d.index()];
        if best.is_none_or(|(b, _)| p > b) {
            best = Some((p, d));
        }
    }
    best.map(|(_, d)| d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features examined per split (floor of sqrt(256) by default).
    pub max_features: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    /// Resample minority classes up to the majority count before fitting.
    pub oversample: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_features: 16, min_samples_split: 2, max_depth: None, oversample: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub vocab: TileVocabulary,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
    /// Training-set class counts after oversampling.
    pub class_counts: [usize; CLASSES],
    /// Set when the training data held a single class; the forest then
    /// predicts that class everywhere.
    pub degenerate: bool,
}

fn features(segment: &Segment) -> Vec<u8> {
    segment.iter().collect()
}

/// Brings every present class up to the size of the largest one by cycling
/// through that class's rows in order. Original samples come first.
pub fn oversample(samples: &[(Segment, Direction)]) -> Result<Vec<(Segment, Direction)>> {
    if samples.is_empty() {
        return Err(Error::EmptyCorpus("no labeled segments to oversample".into()));
    }
    let mut by_class: [Vec<usize>; CLASSES] = Default::default();
    for (i, (_, d)) in samples.iter().enumerate() {
        by_class[d.index()].push(i);
    }
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = samples.to_vec();
    for members in by_class.iter().filter(|m| !m.is_empty()) {
        out.extend(members.iter().cycle().take(target - members.len()).map(|&i| samples[i]));
    }
    Ok(out)
}

pub fn train_forest(
    samples: &[(Segment, Direction)],
    vocab: &TileVocabulary,
    config: &ForestConfig,
) -> Result<ForestModel> {
    if samples.is_empty() {
        return Err(Error::EmptyCorpus("no labeled segments".into()));
    }
    if config.n_trees == 0 || config.max_features == 0 || config.min_samples_split < 2 {
        return Err(Error::Config("forest needs n_trees >= 1, max_features >= 1, min_samples_split >= 2".into()));
    }
    for (s, _) in samples {
        s.validate(vocab)?;
    }
    let data = if config.oversample { oversample(samples)? } else { samples.to_vec() };
    let x: Vec<Vec<u8>> = data.iter().map(|(s, _)| features(s)).collect();
    let y: Vec<usize> = data.iter().map(|(_, d)| d.index()).collect();
    let mut class_counts = [0usize; CLASSES];
    for &c in &y {
        class_counts[c] += 1;
    }
    let params = tree::TreeParams {
        max_features: config.max_features.min(SEGMENT_TILES),
        min_samples_split: config.min_samples_split,
        max_depth: config.max_depth,
        levels: vocab.len(),
    };
    let n = x.len();
    // Each tree draws from its own stream, so the result does not depend on
    // how rayon schedules the work.
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64 + 1);
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            Tree::fit(&x, &y, rows, params, &mut rng)
        })
        .collect();
    let degenerate = class_counts.iter().filter(|&&c| c > 0).count() < 2;
    Ok(ForestModel { vocab: vocab.clone(), config: config.clone(), trees, class_counts, degenerate })
}

impl ForestModel {
    /// Mean of the per-tree normalized leaf histograms.
    pub fn predict_proba(&self, segment: &Segment) -> Result<[f64; 4]> {
        segment.validate(&self.vocab)?;
        let x = features(segment);
        let mut p = [0.0f64; 4];
        for t in &self.trees {
            let counts = t.leaf(&x);
            let n = counts.iter().sum::<u32>() as f64;
            for (acc, &c) in p.iter_mut().zip(counts) {
                *acc += c as f64 / n;
            }
        }
        let n = self.trees.len() as f64;
        Ok(p.map(|v| v / n))
    }

    /// Most likely direction, excluding the reverse of `arrival`.
    pub fn predict_direction(&self, segment: &Segment, arrival: Option<Direction>) -> Result<Direction> {
        let p = self.predict_proba(segment)?;
        Ok(choose_direction(&p, arrival, &[]).expect("at most one direction is forbidden"))
    }
}

impl DirectionClassifier for ForestModel {
    fn predict_proba(&self, segment: &Segment) -> Result<[f64; 4]> {
        ForestModel::predict_proba(self, segment)
    }
}

/// Confusion matrix (`rows = true`, `columns = predicted`) and per-class scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub confusion: [[usize; CLASSES]; CLASSES],
    pub precision: [Option<f64>; CLASSES],
    pub recall: [Option<f64>; CLASSES],
    pub support: [usize; CLASSES],
    pub accuracy: f64,
}

impl ClassificationReport {
    pub fn from_predictions(pairs: impl IntoIterator<Item = (Direction, Direction)>) -> ClassificationReport {
        let mut confusion = [[0usize; CLASSES]; CLASSES];
        for (truth, pred) in pairs {
            confusion[truth.index()][pred.index()] += 1;
        }
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..CLASSES).map(|i| confusion[i][i]).sum();
        let support = std::array::from_fn(|i| confusion[i].iter().sum());
        let predicted: [usize; CLASSES] = std::array::from_fn(|j| (0..CLASSES).map(|i| confusion[i][j]).sum());
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        ClassificationReport {
            confusion,
            precision: std::array::from_fn(|i| ratio(confusion[i][i], predicted[i])),
            recall: std::array::from_fn(|i| ratio(confusion[i][i], support[i])),
            support,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        }
    }

    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        let mut out = String::from("class   precision  recall  support\n");
        for d in Direction::ALL {
            let i = d.index();
            out += &format!(
                "{:<7} {:>9}  {:>6}  {:>7}\n",
                d.name(),
                fmt(self.precision[i]),
                fmt(self.recall[i]),
                self.support[i]
            );
        }
        out += &format!("accuracy {:.3}\n", self.accuracy);
        out
    }
}

/// Unconstrained arg-max predictions scored against the true labels.
pub fn evaluate(model: &ForestModel, samples: &[(Segment, Direction)]) -> Result<ClassificationReport> {
    let preds = samples
        .iter()
        .map(|(s, d)| Ok((*d, model.predict_direction(s, None)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassificationReport::from_predictions(preds))
}

/// Per-class shuffled split; each class contributes `round(test_fraction * n)`
/// samples to the test side.
pub fn stratified_split(
    samples: &[(Segment, Direction)],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<(Segment, Direction)>, Vec<(Segment, Direction)>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Range(format!("test fraction {test_fraction} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for d in Direction::ALL {
        let mut members: Vec<_> = samples.iter().filter(|(_, l)| *l == d).copied().collect();
        members.shuffle(&mut rng);
        let k = (test_fraction * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    Ok((train, test))
}
