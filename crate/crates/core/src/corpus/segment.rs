use serde::{Deserialize, Serialize};

use super::vocab::TileVocabulary;
use crate::error::{Error, Result};

/// Side length of a square segment in tiles.
pub const SEGMENT_SIZE: usize = 16;
/// Tiles per segment.
pub const SEGMENT_TILES: usize = SEGMENT_SIZE * SEGMENT_SIZE;

/// A 16x16 window of tile channel indices. Row 0 is the top row.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Segment {
    tiles: [[u8; SEGMENT_SIZE]; SEGMENT_SIZE],
}

impl Segment {
    pub fn filled(tile: u8) -> Segment {
        Segment { tiles: [[tile; SEGMENT_SIZE]; SEGMENT_SIZE] }
    }

    pub fn from_tiles(tiles: [[u8; SEGMENT_SIZE]; SEGMENT_SIZE]) -> Segment {
        Segment { tiles }
    }

    /// Builds a segment from a row-major slice of 256 tile indices.
    pub fn from_flat(flat: &[u8]) -> Result<Segment> {
        if flat.len() != SEGMENT_TILES {
            return Err(Error::Shape(format!("expected {SEGMENT_TILES} tiles, got {}", flat.len())));
        }
        let mut tiles = [[0u8; SEGMENT_SIZE]; SEGMENT_SIZE];
        for (r, row) in tiles.iter_mut().enumerate() {
            row.copy_from_slice(&flat[r * SEGMENT_SIZE..(r + 1) * SEGMENT_SIZE]);
        }
        Ok(Segment { tiles })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.tiles[row][col]
    }

    pub fn set(&mut self, row: usize, col: usize, tile: u8) {
        self.tiles[row][col] = tile;
    }

    pub fn rows(&self) -> &[[u8; SEGMENT_SIZE]; SEGMENT_SIZE] {
        &self.tiles
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.tiles.iter().flat_map(|r| r.iter().copied())
    }

    pub fn validate(&self, vocab: &TileVocabulary) -> Result<()> {
        match self.iter().position(|t| t as usize >= vocab.len()) {
            None => Ok(()),
            Some(i) => Err(Error::Vocabulary {
                expected: format!("tiles < {} for {}", vocab.len(), vocab.id()),
                found: format!("tile {} at row {}, column {}", self.get(i / 16, i % 16), i / 16, i % 16),
            }),
        }
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Segment {
        let mut out = *self;
        for row in out.tiles.iter_mut() {
            row.reverse();
        }
        out
    }

    pub fn to_lines(&self, vocab: &TileVocabulary) -> Vec<String> {
        self.tiles.iter().map(|row| row.iter().map(|&t| vocab.symbol(t)).collect()).collect()
    }

    pub fn from_lines<S: AsRef<str>>(lines: &[S], vocab: &TileVocabulary) -> Result<Segment> {
        if lines.len() != SEGMENT_SIZE {
            return Err(Error::Shape(format!("expected 16 rows, got {}", lines.len())));
        }
        let mut tiles = [[0u8; SEGMENT_SIZE]; SEGMENT_SIZE];
        for (r, line) in lines.iter().enumerate() {
            let chars: Vec<char> = line.as_ref().chars().collect();
            if chars.len() != SEGMENT_SIZE {
                return Err(Error::Shape(format!("row {r} has {} columns, expected 16", chars.len())));
            }
            for (c, ch) in chars.into_iter().enumerate() {
                tiles[r][c] =
                    vocab.index_of(ch).ok_or(Error::UnknownTile { ch, row: r, col: c })?;
            }
        }
        Ok(Segment { tiles })
    }
}

/// Length of the one-hot encoding of a segment under `vocab`.
pub fn one_hot_len(vocab: &TileVocabulary) -> usize {
    SEGMENT_TILES * vocab.len()
}

/// Channel-major one-hot encoding: entry `c * 256 + row * 16 + col` is 1
/// when the tile at (row, col) has channel `c`.
pub fn one_hot(segment: &Segment, vocab: &TileVocabulary) -> Vec<f32> {
    let mut out = vec![0.0f32; one_hot_len(vocab)];
    write_one_hot(segment, &mut out);
    out
}

/// Writes the one-hot encoding into `out`, which must be zeroed and sized for
/// the vocabulary the segment belongs to.
pub fn write_one_hot<T: num_traits::One + Copy>(segment: &Segment, out: &mut [T]) {
    for (i, tile) in segment.iter().enumerate() {
        out[tile as usize * SEGMENT_TILES + i] = T::one();
    }
}

/// Inverse of [`one_hot`]: per tile position, the channel with the largest
/// value. Ties go to the lowest channel index.
pub fn argmax_decode<T: PartialOrd + Copy>(values: &[T], channels: usize) -> Result<Segment> {
    if values.len() != channels * SEGMENT_TILES || channels == 0 {
        return Err(Error::Shape(format!(
            "decoder output has {} entries, expected {}",
            values.len(),
            channels * SEGMENT_TILES
        )));
    }
    let mut flat = [0u8; SEGMENT_TILES];
    for (pos, slot) in flat.iter_mut().enumerate() {
        let mut best = 0usize;
        let mut best_value = values[pos];
        for c in 1..channels {
            let v = values[c * SEGMENT_TILES + pos];
            if v > best_value {
                best = c;
                best_value = v;
            }
        }
        *slot = best as u8;
    }
    Segment::from_flat(&flat)
}
