//! Level generation: the sequential encode/decode chain, classifier-driven
//! placement on a 2D cell grid, and the independent-sampling baseline.
//!
//! Cells use `x` growing to the right and `y` growing upward. Both the
//! sequential and the independent mode funnel their segments through
//! [`place_segments`], so they differ only in how segments are produced.

use std::collections::{BTreeMap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Segment, TileVocabulary, SEGMENT_SIZE};
use crate::direction::Direction;
use crate::error::{Error, Result};
use crate::forest::{choose_direction, DirectionClassifier};
use crate::vae::sample_prior_dim;

/// Anything that encodes segments to latents and decodes latents to
/// segments.
pub trait SegmentModel: Sync {
    fn encode(&self, segment: &Segment) -> Result<Vec<f32>>;
    fn decode(&self, z: &[f32]) -> Result<Segment>;
    fn latent_dim(&self) -> usize;
}

pub type Cell = (i32, i32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub segment: Segment,
    pub cell: Cell,
    /// Direction from the previous placement to this one.
    pub arrival: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelLayout {
    pub placements: Vec<Placement>,
    /// Set when placement stopped early because every neighboring cell
    /// was occupied.
    pub truncated: bool,
}

impl LevelLayout {
    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.placements.iter().map(|p| p.segment).collect()
    }

    /// Checks unique cells, 4-adjacency of consecutive placements, and
    /// arrival directions consistent with the cell offsets.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (k, p) in self.placements.iter().enumerate() {
            if !seen.insert(p.cell) {
                return Err(Error::Shape(format!("placement {k} overwrites cell {:?}", p.cell)));
            }
            match (k, p.arrival) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::Shape("first placement has an arrival direction".into())),
                (_, None) => return Err(Error::Shape(format!("placement {k} has no arrival direction"))),
                (_, Some(d)) => {
                    if step(self.placements[k - 1].cell, d) != p.cell {
                        return Err(Error::Shape(format!("placement {k} is not adjacent to its predecessor")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Inclusive `(min_x, min_y, max_x, max_y)` over placed cells.
    pub fn bounds(&self) -> Option<(i32, i32, i32, i32)> {
        let first = self.placements.first()?.cell;
        Some(self.placements.iter().fold((first.0, first.1, first.0, first.1), |(a, b, c, d), p| {
            (a.min(p.cell.0), b.min(p.cell.1), c.max(p.cell.0), d.max(p.cell.1))
        }))
    }

    /// Adjacent placement pairs with the direction from the first to the
    /// second.
    pub fn adjacent_pairs(&self) -> impl Iterator<Item = (&Segment, &Segment, Direction)> {
        self.placements.windows(2).map(|w| (&w[0].segment, &w[1].segment, w[1].arrival.expect("validated layout")))
    }
}

fn step(cell: Cell, d: Direction) -> Cell {
    let (dx, dy) = d.offset();
    (cell.0 + dx, cell.1 + dy)
}

/// Places `segments` in order. Each step asks the classifier about the
/// current segment, never goes back the way it came, and falls back to the
/// next most likely free neighbor when the preferred cell is taken. Stops
/// with `truncated` set when no neighbor is free.
pub fn place_segments(segments: &[Segment], classifier: &dyn DirectionClassifier) -> Result<LevelLayout> {
    let mut layout = LevelLayout::default();
    let Some(first) = segments.first() else {
        return Ok(layout);
    };
    let mut occupied = HashSet::from([(0, 0)]);
    layout.placements.push(Placement { segment: *first, cell: (0, 0), arrival: None });
    for next in &segments[1..] {
        let current = layout.placements.last().expect("non-empty");
        let probs = classifier.predict_proba(&current.segment)?;
        let taken: Vec<Direction> =
            Direction::ALL.into_iter().filter(|&d| occupied.contains(&step(current.cell, d))).collect();
        let Some(d) = choose_direction(&probs, current.arrival, &taken) else {
            layout.truncated = true;
            break;
        };
        let cell = step(current.cell, d);
        occupied.insert(cell);
        layout.placements.push(Placement { segment: *next, cell, arrival: Some(d) });
    }
    Ok(layout)
}

/// `init` followed by `n` successive decodes of the previous segment's
/// posterior mean.
pub fn generate_level(model: &dyn SegmentModel, init: Segment, n: usize) -> Result<Vec<Segment>> {
    if n == 0 {
        return Err(Error::Range("number of generated segments must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(init);
    for _ in 0..n {
        let z = model.encode(out.last().expect("non-empty"))?;
        out.push(model.decode(&z)?);
    }
    Ok(out)
}

/// [`generate_level`] with each segment placed by `classifier`.
pub fn generate_level_with_dirs(
    model: &dyn SegmentModel,
    classifier: &dyn DirectionClassifier,
    init: Segment,
    n: usize,
) -> Result<LevelLayout> {
    place_segments(&generate_level(model, init, n)?, classifier)
}

/// Sub-seeds for a level: element `k` seeds the prior sample of segment `k`.
pub fn sub_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Decodes a prior sample drawn with `seed`.
pub fn prior_segment(model: &dyn SegmentModel, seed: u64) -> Result<Segment> {
    model.decode(&sample_prior_dim(model.latent_dim(), seed))
}

/// `n` segments decoded from independently seeded prior samples. Segment 0
/// uses `sub_seeds(seed, n)[0]`, the same initial segment a paired
/// sequential level starts from.
pub fn independent_segments(model: &dyn SegmentModel, n: usize, seed: u64) -> Result<Vec<Segment>> {
    independent_segments_from(model, &sub_seeds(seed, n))
}

pub fn independent_segments_from(model: &dyn SegmentModel, seeds: &[u64]) -> Result<Vec<Segment>> {
    seeds.iter().map(|&s| prior_segment(model, s)).collect()
}

pub fn generate_independent(
    model: &dyn SegmentModel,
    classifier: &dyn DirectionClassifier,
    n: usize,
    seed: u64,
) -> Result<LevelLayout> {
    if n == 0 {
        return Err(Error::Range("number of generated segments must be at least 1".into()));
    }
    place_segments(&independent_segments(model, n, seed)?, classifier)
}

/// A layout rendered into one tile grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StitchedLevel {
    /// Rows from top to bottom.
    pub rows: Vec<Vec<u8>>,
    /// Top-left `(row, col)` of each placement's tiles in `rows`, keyed by cell.
    pub cell_map: BTreeMap<Cell, (usize, usize)>,
}

impl StitchedLevel {
    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn to_text(&self, vocab: &TileVocabulary) -> String {
        let mut out = String::with_capacity(self.height() * (self.width() + 1));
        for row in &self.rows {
            out.extend(row.iter().map(|&t| vocab.symbol(t)));
            out.push('\n');
        }
        out
    }
}

/// Minimal bounding grid of the layout, unplaced cells filled with the
/// background tile.
pub fn stitch(layout: &LevelLayout, vocab: &TileVocabulary) -> StitchedLevel {
    let Some((min_x, min_y, max_x, max_y)) = layout.bounds() else {
        return StitchedLevel { rows: Vec::new(), cell_map: BTreeMap::new() };
    };
    let width = (max_x - min_x + 1) as usize * SEGMENT_SIZE;
    let height = (max_y - min_y + 1) as usize * SEGMENT_SIZE;
    let mut rows = vec![vec![vocab.background(); width]; height];
    let mut cell_map = BTreeMap::new();
    for p in &layout.placements {
        let top = (max_y - p.cell.1) as usize * SEGMENT_SIZE;
        let left = (p.cell.0 - min_x) as usize * SEGMENT_SIZE;
        for (r, line) in p.segment.rows().iter().enumerate() {
            rows[top + r][left..left + SEGMENT_SIZE].copy_from_slice(line);
        }
        cell_map.insert(p.cell, (top, left));
    }
    StitchedLevel { rows, cell_map }
}
