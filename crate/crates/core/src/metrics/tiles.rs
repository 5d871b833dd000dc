//! Per-segment tile metrics and the edge discontinuity between neighbors.

use serde::{Deserialize, Serialize};

use crate::corpus::{Category, Segment, TileVocabulary, SEGMENT_SIZE, SEGMENT_TILES};
use crate::direction::Direction;

/// Discontinuity reported when either adjoining edge has no path tile.
pub const MISSING_PATH: f64 = SEGMENT_SIZE as f64;

fn proportion(segment: &Segment, vocab: &TileVocabulary, category: Category) -> f64 {
    segment.iter().filter(|&t| vocab.is(category, t)).count() as f64 / SEGMENT_TILES as f64
}

/// Fraction of tiles the player can stand on.
pub fn density(segment: &Segment, vocab: &TileVocabulary) -> f64 {
    proportion(segment, vocab, Category::Standable)
}

/// One minus the fraction of enemy and hazard tiles.
pub fn leniency(segment: &Segment, vocab: &TileVocabulary) -> f64 {
    1.0 - proportion(segment, vocab, Category::HazardOrEnemy)
}

/// Fraction of collectable and power-up tiles.
pub fn interestingness(segment: &Segment, vocab: &TileVocabulary) -> f64 {
    proportion(segment, vocab, Category::Interactable)
}

pub fn path_prop(segment: &Segment, vocab: &TileVocabulary) -> f64 {
    proportion(segment, vocab, Category::Path)
}

/// Mean squared residual of a least-squares line through the height of the
/// topmost standable tile of each column (bottom row = 0). Columns without
/// standable tiles are skipped; fewer than two columns give 0.
pub fn non_linearity(segment: &Segment, vocab: &TileVocabulary) -> f64 {
    let points: Vec<(f64, f64)> = (0..SEGMENT_SIZE)
        .filter_map(|c| {
            (0..SEGMENT_SIZE)
                .find(|&r| vocab.is(Category::Standable, segment.get(r, c)))
                .map(|r| (c as f64, (SEGMENT_SIZE - 1 - r) as f64))
        })
        .collect();
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    points.iter().map(|&(x, y)| (y - (slope * x + intercept)).powi(2)).sum::<f64>() / n
}

/// Positions of path tiles along the edge of `segment` facing `toward`:
/// row indices for a vertical edge, column indices for a horizontal one.
fn edge_path(segment: &Segment, toward: Direction, vocab: &TileVocabulary) -> Vec<usize> {
    let last = SEGMENT_SIZE - 1;
    let at = |i: usize| match toward {
        Direction::Right => segment.get(i, last),
        Direction::Left => segment.get(i, 0),
        Direction::Up => segment.get(0, i),
        Direction::Down => segment.get(last, i),
    };
    (0..SEGMENT_SIZE).filter(|&i| vocab.is(Category::Path, at(i))).collect()
}

/// Smallest offset between a path tile on `a`'s edge toward `b` and one on
/// `b`'s edge toward `a`, where `b` sits in direction `dir` from `a`.
/// Returns 16 when either edge lacks a path tile.
pub fn discontinuity(a: &Segment, b: &Segment, dir: Direction, vocab: &TileVocabulary) -> f64 {
    let ea = edge_path(a, dir, vocab);
    let eb = edge_path(b, dir.opposite(), vocab);
    ea.iter()
        .flat_map(|&i| eb.iter().map(move |&j| i.abs_diff(j)))
        .min()
        .map_or(MISSING_PATH, |d| d as f64)
}

/// The five tile metrics plus discontinuity with the preceding segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub density: f64,
    pub non_linearity: f64,
    pub leniency: f64,
    pub interestingness: f64,
    pub path_prop: f64,
    pub discontinuity: f64,
}

pub const METRIC_NAMES: [&str; 6] =
    ["density", "non_linearity", "leniency", "interestingness", "path_prop", "discontinuity"];

impl MetricVector {
    pub fn to_array(&self) -> [f64; 6] {
        [self.density, self.non_linearity, self.leniency, self.interestingness, self.path_prop, self.discontinuity]
    }

    pub fn from_array(v: [f64; 6]) -> MetricVector {
        MetricVector {
            density: v[0],
            non_linearity: v[1],
            leniency: v[2],
            interestingness: v[3],
            path_prop: v[4],
            discontinuity: v[5],
        }
    }
}

/// The five tile metrics of one segment, in [`METRIC_NAMES`] order.
pub fn tile_metrics(segment: &Segment, vocab: &TileVocabulary) -> [f64; 5] {
    [
        density(segment, vocab),
        non_linearity(segment, vocab),
        leniency(segment, vocab),
        interestingness(segment, vocab),
        path_prop(segment, vocab),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Game;

    fn smb() -> TileVocabulary {
        TileVocabulary::builtin(Game::Smb)
    }

    fn t(v: &TileVocabulary, c: char) -> u8 {
        v.index_of(c).unwrap()
    }

    fn with_count(v: &TileVocabulary, c: char, n: usize) -> Segment {
        let mut s = Segment::filled(v.background());
        for i in 0..n {
            s.set(i / 16, i % 16, t(v, c));
        }
        s
    }

    #[test]
    fn proportions() {
        let v = smb();
        let bg = Segment::filled(v.background());
        assert_eq!(density(&bg, &v), 0.0);
        assert_eq!(density(&Segment::filled(t(&v, 'X')), &v), 1.0);
        assert_eq!(density(&with_count(&v, 'X', 128), &v), 0.5);
        assert_eq!(leniency(&bg, &v), 1.0);
        assert_eq!(leniency(&Segment::filled(t(&v, 'E')), &v), 0.0);
        assert_eq!(leniency(&with_count(&v, 'E', 64), &v), 0.75);
        assert_eq!(interestingness(&bg, &v), 0.0);
        assert_eq!(interestingness(&Segment::filled(t(&v, 'o')), &v), 1.0);
        assert_eq!(interestingness(&with_count(&v, 'o', 32), &v), 0.125);
        assert_eq!(path_prop(&bg, &v), 0.0);
        assert_eq!(path_prop(&Segment::filled(t(&v, 'x')), &v), 1.0);
        assert_eq!(path_prop(&with_count(&v, 'x', 16), &v), 0.0625);
    }

    fn with_heights(v: &TileVocabulary, heights: &[usize]) -> Segment {
        let mut s = Segment::filled(v.background());
        for (c, &h) in heights.iter().enumerate() {
            s.set(15 - h, c, t(v, 'X'));
        }
        s
    }

    #[test]
    fn non_linearity_examples() {
        let v = smb();
        assert_eq!(non_linearity(&with_heights(&v, &[3; 16]), &v), 0.0);
        let stairs: Vec<usize> = (0..16).collect();
        assert!(non_linearity(&with_heights(&v, &stairs), &v) < 1e-20);
        // Alternating 0,2: the fitted slope is 8/340, so the MSE is
        // 1 - (8^2 / 340) / 16, just under 1.
        let zigzag: Vec<usize> = (0..16).map(|c| 2 * (c % 2)).collect();
        let expected = 1.0 - (64.0 / 340.0) / 16.0;
        assert!((non_linearity(&with_heights(&v, &zigzag), &v) - expected).abs() < 1e-12);
        assert_eq!(non_linearity(&with_heights(&v, &[5]), &v), 0.0);
    }

    #[test]
    fn non_linearity_depends_on_position() {
        let v = smb();
        let flat = with_heights(&v, &[0; 16]);
        let mut moved = flat;
        moved.set(15, 7, v.background());
        moved.set(3, 7, t(&v, 'X'));
        assert_eq!(density(&flat, &v), density(&moved, &v));
        assert!(non_linearity(&moved, &v) > 0.0);
    }

    fn path_at(v: &TileVocabulary, cells: &[(usize, usize)]) -> Segment {
        let mut s = Segment::filled(v.background());
        for &(r, c) in cells {
            s.set(r, c, t(v, 'x'));
        }
        s
    }

    #[test]
    fn discontinuity_examples() {
        let v = smb();
        let a = path_at(&v, &[(5, 15)]);
        let b = path_at(&v, &[(5, 0)]);
        assert_eq!(discontinuity(&a, &b, Direction::Right, &v), 0.0);
        let a = path_at(&v, &[(3, 15)]);
        let b = path_at(&v, &[(7, 0)]);
        assert_eq!(discontinuity(&a, &b, Direction::Right, &v), 4.0);
        assert_eq!(discontinuity(&a, &Segment::filled(0), Direction::Right, &v), 16.0);
        // Vertical: b above a compares a's top row with b's bottom row.
        let a = path_at(&v, &[(0, 2)]);
        let b = path_at(&v, &[(15, 9), (15, 4)]);
        assert_eq!(discontinuity(&a, &b, Direction::Up, &v), 2.0);
        assert_eq!(discontinuity(&b, &a, Direction::Down, &v), 2.0);
    }

    #[test]
    fn discontinuity_depends_on_position() {
        let v = smb();
        let a = path_at(&v, &[(5, 15)]);
        let b = path_at(&v, &[(5, 0)]);
        let moved = path_at(&v, &[(5, 8)]);
        assert_eq!(path_prop(&b, &v), path_prop(&moved, &v));
        assert_ne!(discontinuity(&a, &b, Direction::Right, &v), discontinuity(&a, &moved, Direction::Right, &v));
    }
}
