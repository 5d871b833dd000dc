//! Segment metrics, level aggregates, normalization, and the rank-sum test.

mod tiles;
mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::corpus::TileVocabulary;
use crate::error::{Error, Result};
use crate::generator::LevelLayout;

pub use tiles::{
    density, discontinuity, interestingness, leniency, non_linearity, path_prop, tile_metrics, MetricVector,
    METRIC_NAMES, MISSING_PATH,
};
pub use wilcoxon::{midranks, rank_sum_exact, rank_sum_normal, wilcoxon_rank_sum, RankSumTest, EXACT_LIMIT};

/// Min-max scaling onto `[0, 1]`; a constant population maps to zeros.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("nothing to normalize".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// Mean discontinuity over a layout's adjacent placements, or `None` for a
/// single segment.
pub fn level_discontinuity(layout: &LevelLayout, vocab: &TileVocabulary) -> Option<f64> {
    let values: Vec<f64> = layout.adjacent_pairs().map(|(a, b, d)| discontinuity(a, b, d, vocab)).collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Means of the five tile metrics over a slice of placements plus the mean
/// discontinuity over the adjacent pairs inside it (16 when it has none).
pub fn group_metrics(layout: &LevelLayout, range: std::ops::Range<usize>, vocab: &TileVocabulary) -> MetricVector {
    let placements = &layout.placements[range];
    let mut sums = [0.0f64; 6];
    for p in placements {
        for (s, v) in sums.iter_mut().zip(tile_metrics(&p.segment, vocab)) {
            *s += v;
        }
    }
    let n = placements.len().max(1) as f64;
    for s in sums.iter_mut().take(5) {
        *s /= n;
    }
    let pairs: Vec<f64> = placements
        .windows(2)
        .map(|w| discontinuity(&w[0].segment, &w[1].segment, w[1].arrival.expect("validated layout"), vocab))
        .collect();
    sums[5] = if pairs.is_empty() { MISSING_PATH } else { pairs.iter().sum::<f64>() / pairs.len() as f64 };
    MetricVector::from_array(sums)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { n, mean, sd }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.sd)
    }
}
