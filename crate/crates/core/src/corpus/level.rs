//! Level parsing, padding, and sliding-window segmentation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::segment::{Segment, SEGMENT_SIZE};
use super::vocab::{Game, TileVocabulary};
use crate::direction::Direction;
use crate::error::{Error, Result};

/// A straight stretch of a level along which windows slide.
///
/// Coordinates are in level rows/columns of the parsed (and, for horizontal
/// games, padded) grid. A horizontal run shorter than 16 rows is padded with
/// background rows on top when its windows are cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub direction: Direction,
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Run {
    /// Extent of the run along its sliding axis.
    pub fn length(&self) -> usize {
        if self.direction.is_horizontal() {
            self.width
        } else {
            self.height
        }
    }

    fn cross_extent(&self) -> usize {
        if self.direction.is_horizontal() {
            self.height
        } else {
            self.width
        }
    }
}

/// Top-left corner of a window in level coordinates. The row may be negative
/// when a window includes padding above a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowOrigin {
    pub run: usize,
    pub row: isize,
    pub col: isize,
}

/// A parsed level: a rectangular tile grid plus the runs that define its
/// progression order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelGrid {
    rows: Vec<Vec<u8>>,
    runs: Vec<Run>,
    padded_rows: usize,
    background: u8,
}

/// Windows cut from a level, plus the indices of runs too short to yield any.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub windows: Vec<(Segment, WindowOrigin)>,
    pub short_runs: Vec<usize>,
}

/// A segment paired with the segment that follows it along the progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub current: Segment,
    pub follower: Segment,
    pub direction: Direction,
}

impl LevelGrid {
    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    /// Background rows inserted above the source text.
    pub fn padded_rows(&self) -> usize {
        self.padded_rows
    }

    pub fn to_text(&self, vocab: &TileVocabulary) -> String {
        let mut out = String::new();
        for row in &self.rows {
            for &t in row {
                out.push(vocab.symbol(t));
            }
            out.push('\n');
        }
        out
    }

    /// Replaces the progression with an explicit list of runs.
    pub fn with_runs(mut self, runs: Vec<Run>) -> Result<LevelGrid> {
        for (i, run) in runs.iter().enumerate() {
            if run.top + run.height > self.height() || run.left + run.width > self.width() {
                return Err(Error::Shape(format!(
                    "run {i} ({}x{} at {},{}) exceeds level bounds {}x{}",
                    run.height,
                    run.width,
                    run.top,
                    run.left,
                    self.height(),
                    self.width()
                )));
            }
            if run.cross_extent() > SEGMENT_SIZE || run.cross_extent() == 0 {
                return Err(Error::Shape(format!(
                    "run {i} is {} tiles across its sliding axis, expected 1..=16",
                    run.cross_extent()
                )));
            }
            if !run.direction.is_horizontal() && run.width != SEGMENT_SIZE {
                return Err(Error::Shape(format!("vertical run {i} must be 16 columns wide")));
            }
        }
        self.runs = runs;
        Ok(self)
    }

    fn tile(&self, row: isize, col: isize) -> u8 {
        if row < 0 || col < 0 {
            return self.background;
        }
        self.rows
            .get(row as usize)
            .and_then(|r| r.get(col as usize))
            .copied()
            .unwrap_or(self.background)
    }

    fn cut(&self, origin: WindowOrigin, run: &Run) -> Segment {
        let mut seg = Segment::filled(self.background);
        for r in 0..SEGMENT_SIZE {
            let row = origin.row + r as isize;
            if row < run.top as isize {
                continue; // padding above a short horizontal run
            }
            for c in 0..SEGMENT_SIZE {
                seg.set(r, c, self.tile(row, origin.col + c as isize));
            }
        }
        seg
    }

    /// Window origins of one run in progression order.
    fn run_origins(&self, index: usize, stride: usize) -> Vec<WindowOrigin> {
        let run = &self.runs[index];
        let len = run.length();
        if len < SEGMENT_SIZE {
            return Vec::new();
        }
        let steps: Vec<usize> = (0..=len - SEGMENT_SIZE).step_by(stride).collect();
        // Horizontal runs shorter than 16 rows are bottom-aligned in the window.
        let pad = SEGMENT_SIZE.saturating_sub(run.height) as isize;
        let top = run.top as isize - if run.direction.is_horizontal() { pad } else { 0 };
        let last = len - SEGMENT_SIZE;
        steps
            .into_iter()
            .map(|s| {
                let (row, col) = match run.direction {
                    Direction::Right => (top, run.left + s),
                    Direction::Left => (top, run.left + last - s),
                    Direction::Down => (top + s as isize, run.left),
                    Direction::Up => (top + (last - s) as isize, run.left),
                };
                WindowOrigin { run: index, row, col: col as isize }
            })
            .collect()
    }
}

fn clean_lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.lines().map(|l| l.trim_end()).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let leading = lines.iter().take_while(|l| l.is_empty()).count();
    lines.drain(..leading);
    lines
}

/// Parses level text into a rectangular grid without padding or runs.
pub fn parse_rows(text: &str, vocab: &TileVocabulary) -> Result<Vec<Vec<u8>>> {
    let lines = clean_lines(text);
    if lines.is_empty() {
        return Err(Error::Parse { line: 0, message: "level text is empty".into() });
    }
    let width = lines[0].chars().count();
    let mut rows = Vec::with_capacity(lines.len());
    for (r, line) in lines.iter().enumerate() {
        let mut row = Vec::with_capacity(width);
        for (c, ch) in line.chars().enumerate() {
            row.push(vocab.index_of(ch).ok_or(Error::UnknownTile { ch, row: r, col: c })?);
        }
        if row.len() != width {
            return Err(Error::Parse {
                line: r + 1,
                message: format!("row has {} tiles, expected {width}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// How a level's progression is derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Progression {
    /// Left-to-right; the grid is padded on top to 16 rows.
    Horizontal,
    /// Bottom-to-top over a 16-column grid.
    Vertical,
    /// Explicit runs, typically from an annotation file.
    Annotated(Vec<Run>),
}

impl Progression {
    /// Default progression for a game, or `None` when the game needs an
    /// annotation (MM). The blended domain infers orientation from the grid
    /// shape.
    pub fn default_for(game: Game, height: usize, width: usize) -> Option<Progression> {
        match game {
            Game::Smb => Some(Progression::Horizontal),
            Game::Ki => Some(Progression::Vertical),
            Game::Mm => None,
            Game::SmbKi => Some(if width == SEGMENT_SIZE && height > SEGMENT_SIZE {
                Progression::Vertical
            } else {
                Progression::Horizontal
            }),
        }
    }
}

/// Parses a level using its game's default progression. MM levels come back
/// without runs; attach them with [`LevelGrid::with_runs`].
pub fn parse_level(text: &str, vocab: &TileVocabulary) -> Result<LevelGrid> {
    let rows = parse_rows(text, vocab)?;
    let (h, w) = (rows.len(), rows[0].len());
    match Progression::default_for(vocab.game(), h, w) {
        Some(p) => build_level(rows, vocab, p),
        None => Ok(LevelGrid { rows, runs: Vec::new(), padded_rows: 0, background: vocab.background() }),
    }
}

pub fn parse_level_with(text: &str, vocab: &TileVocabulary, progression: Progression) -> Result<LevelGrid> {
    build_level(parse_rows(text, vocab)?, vocab, progression)
}

fn build_level(mut rows: Vec<Vec<u8>>, vocab: &TileVocabulary, progression: Progression) -> Result<LevelGrid> {
    let background = vocab.background();
    let width = rows[0].len();
    match progression {
        Progression::Horizontal => {
            if rows.len() > SEGMENT_SIZE {
                return Err(Error::Shape(format!(
                    "horizontal level has {} rows, at most 16 supported",
                    rows.len()
                )));
            }
            let pad = SEGMENT_SIZE - rows.len();
            for _ in 0..pad {
                rows.insert(0, vec![background; width]);
            }
            let run = Run { direction: Direction::Right, top: 0, left: 0, height: SEGMENT_SIZE, width };
            Ok(LevelGrid { rows, runs: vec![run], padded_rows: pad, background })
        }
        Progression::Vertical => {
            if width != SEGMENT_SIZE {
                return Err(Error::Shape(format!("vertical level has width {width}, expected 16")));
            }
            let run = Run { direction: Direction::Up, top: 0, left: 0, height: rows.len(), width };
            Ok(LevelGrid { rows, runs: vec![run], padded_rows: 0, background })
        }
        Progression::Annotated(runs) => {
            LevelGrid { rows, runs: Vec::new(), padded_rows: 0, background }.with_runs(runs)
        }
    }
}

/// Parses a run annotation: one run per line as
/// `<direction> <top> <left> <height> <width>`; `#` starts a comment.
pub fn parse_runs(text: &str) -> Result<Vec<Run>> {
    let mut runs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let direction: Direction = fields[0]
            .parse()
            .map_err(|_| Error::Parse { line: i + 1, message: format!("bad direction {:?}", fields[0]) })?;
        let mut nums = [0usize; 4];
        for (slot, f) in nums.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse()
                .map_err(|_| Error::Parse { line: i + 1, message: format!("bad integer {f:?}") })?;
        }
        runs.push(Run { direction, top: nums[0], left: nums[1], height: nums[2], width: nums[3] });
    }
    Ok(runs)
}

pub fn format_runs(runs: &[Run]) -> String {
    let mut out = String::from("# direction top left height width\n");
    for r in runs {
        let _ = writeln!(out, "{} {} {} {} {}", r.direction, r.top, r.left, r.height, r.width);
    }
    out
}

/// Cuts 16x16 windows along every run at the given stride.
pub fn segment_level(level: &LevelGrid, stride: usize) -> Result<Segmentation> {
    if stride == 0 {
        return Err(Error::Range("stride must be positive".into()));
    }
    let mut windows = Vec::new();
    let mut short_runs = Vec::new();
    for (i, run) in level.runs.iter().enumerate() {
        let origins = level.run_origins(i, stride);
        if origins.is_empty() {
            short_runs.push(i);
        }
        windows.extend(origins.into_iter().map(|o| (level.cut(o, run), o)));
    }
    if windows.is_empty() {
        let length = level.runs.iter().map(Run::length).max().unwrap_or(0);
        let axis = match level.runs.first() {
            Some(r) if !r.direction.is_horizontal() => "rows",
            _ => "columns",
        };
        return Err(Error::EmptySegmentation { axis, length });
    }
    Ok(Segmentation { windows, short_runs })
}

/// Pairs each window with the window `offset` tiles further along its run.
pub fn make_training_pairs(level: &LevelGrid, stride: usize, offset: usize) -> Result<Vec<TrainingPair>> {
    Ok(pair_origins(level, stride, offset)?
        .into_iter()
        .map(|(current, follower, direction)| {
            let run = &level.runs[current.run];
            TrainingPair { current: level.cut(current, run), follower: level.cut(follower, run), direction }
        })
        .collect())
}

/// Window origins of every (current, follower) pair, in progression order.
pub fn pair_origins(
    level: &LevelGrid,
    stride: usize,
    offset: usize,
) -> Result<Vec<(WindowOrigin, WindowOrigin, Direction)>> {
    if offset == 0 {
        return Err(Error::Range("follower offset must be positive".into()));
    }
    // Surfaces empty-level errors consistently with segmentation.
    segment_level(level, stride)?;
    let mut pairs = Vec::new();
    for (i, run) in level.runs.iter().enumerate() {
        let len = run.length();
        if len < SEGMENT_SIZE + offset {
            continue;
        }
        let origins = level.run_origins(i, stride);
        let first = origins[0];
        for origin in origins {
            let advanced = step(origin, run.direction, offset);
            let along = (advanced.row - first.row).abs() + (advanced.col - first.col).abs();
            if along as usize > len - SEGMENT_SIZE {
                continue;
            }
            pairs.push((origin, advanced, run.direction));
        }
    }
    Ok(pairs)
}

impl LevelGrid {
    /// The segment whose top-left corner is `origin`.
    pub fn window(&self, origin: WindowOrigin) -> Segment {
        self.cut(origin, &self.runs[origin.run])
    }
}

fn step(origin: WindowOrigin, direction: Direction, by: usize) -> WindowOrigin {
    let by = by as isize;
    let (row, col) = match direction {
        Direction::Right => (origin.row, origin.col + by),
        Direction::Left => (origin.row, origin.col - by),
        Direction::Down => (origin.row + by, origin.col),
        Direction::Up => (origin.row - by, origin.col),
    };
    WindowOrigin { row, col, ..origin }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smb() -> TileVocabulary {
        TileVocabulary::builtin(Game::Smb)
    }

    fn flat_level(rows: usize, width: usize) -> String {
        let mut s = String::new();
        for r in 0..rows {
            let ch = if r + 1 == rows { 'X' } else { '-' };
            s.extend(std::iter::repeat_n(ch, width));
            s.push('\n');
        }
        s
    }

    #[test]
    fn three_rows_parse_without_padding() {
        let mm = TileVocabulary::builtin(Game::Mm);
        let level = parse_level("---\n-#-\n###\n", &mm).unwrap();
        assert_eq!((level.height(), level.width()), (3, 3));
        assert!(level.runs().is_empty());
    }

    #[test]
    fn smb_level_is_padded_on_top() {
        let level = parse_level(&flat_level(14, 32), &smb()).unwrap();
        assert_eq!(level.height(), 16);
        assert_eq!(level.padded_rows(), 2);
        let bg = smb().background();
        assert!(level.rows()[..2].iter().all(|r| r.iter().all(|&t| t == bg)));
        assert_eq!(level.rows()[15][0], smb().index_of('X').unwrap());
    }

    #[test]
    fn unknown_character_is_reported_with_position() {
        let err = parse_level("--\n-~\n", &smb()).unwrap_err();
        assert!(matches!(err, Error::UnknownTile { ch: '~', row: 1, col: 1 }), "{err}");
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = parse_level("---\n--\n", &smb()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn trailing_whitespace_and_blank_lines_ignored() {
        let level = parse_level("--  \r\nXX\n\n\n", &smb()).unwrap();
        assert_eq!(level.width(), 2);
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(parse_level("\n\n", &smb()), Err(Error::Parse { .. })));
    }

    #[test]
    fn window_counts() {
        for (w, expected) in [(16, 1), (20, 5), (40, 25)] {
            let level = parse_level(&flat_level(14, w), &smb()).unwrap();
            assert_eq!(segment_level(&level, 1).unwrap().windows.len(), expected);
        }
    }

    #[test]
    fn short_level_has_empty_segmentation() {
        let level = parse_level(&flat_level(14, 12), &smb()).unwrap();
        assert!(matches!(segment_level(&level, 1), Err(Error::EmptySegmentation { length: 12, .. })));
    }

    #[test]
    fn pair_counts() {
        for (w, expected) in [(32, 1), (48, 17), (31, 0)] {
            let level = parse_level(&flat_level(14, w), &smb()).unwrap();
            assert_eq!(make_training_pairs(&level, 1, 16).unwrap().len(), expected, "width {w}");
        }
    }

    #[test]
    fn vertical_pairs_go_up_and_follow_from_below() {
        let ki = TileVocabulary::builtin(Game::Ki);
        // Distinct marker per row so windows can be located.
        let mut text = String::new();
        for r in 0..40 {
            let mut row = vec!['-'; 16];
            row[r % 16] = '#';
            text.extend(row);
            text.push('\n');
        }
        let level = parse_level(&text, &ki).unwrap();
        let pairs = make_training_pairs(&level, 1, 16).unwrap();
        assert_eq!(pairs.len(), 40 - 16 + 1 - 16);
        assert!(pairs.iter().all(|p| p.direction == Direction::Up));
        // First window is the bottom of the level; its follower sits 16 rows higher.
        let bottom = level.cut(WindowOrigin { run: 0, row: 24, col: 0 }, &level.runs()[0]);
        let above = level.cut(WindowOrigin { run: 0, row: 8, col: 0 }, &level.runs()[0]);
        assert_eq!(pairs[0].current, bottom);
        assert_eq!(pairs[0].follower, above);
    }

    #[test]
    fn annotated_short_horizontal_run_pads_on_top() {
        let mm = TileVocabulary::builtin(Game::Mm);
        let mut text = String::new();
        for r in 0..15 {
            let ch = if r == 14 { '#' } else { '-' };
            text.extend(std::iter::repeat_n(ch, 32));
            text.push('\n');
        }
        let runs = vec![Run { direction: Direction::Right, top: 0, left: 0, height: 15, width: 32 }];
        let level = parse_level(&text, &mm).unwrap().with_runs(runs).unwrap();
        let seg = segment_level(&level, 16).unwrap();
        assert_eq!(seg.windows.len(), 2);
        let (first, origin) = seg.windows[0];
        assert_eq!(origin.row, -1);
        assert!(first.rows()[0].iter().all(|&t| t == mm.background()));
        assert!(first.rows()[15].iter().all(|&t| t == mm.index_of('#').unwrap()));
    }

    #[test]
    fn left_and_down_runs_progress_in_their_direction() {
        let mm = TileVocabulary::builtin(Game::Mm);
        let mut text = String::new();
        for _ in 0..16 {
            text.extend(std::iter::repeat_n('-', 48));
            text.push('\n');
        }
        let runs = vec![Run { direction: Direction::Left, top: 0, left: 0, height: 16, width: 48 }];
        let level = parse_level(&text, &mm).unwrap().with_runs(runs).unwrap();
        let cols: Vec<isize> = segment_level(&level, 16).unwrap().windows.iter().map(|w| w.1.col).collect();
        assert_eq!(cols, vec![32, 16, 0]);
        assert_eq!(make_training_pairs(&level, 16, 16).unwrap().len(), 2);
    }

    #[test]
    fn runs_round_trip_through_text() {
        let runs = vec![
            Run { direction: Direction::Right, top: 0, left: 0, height: 15, width: 64 },
            Run { direction: Direction::Up, top: 15, left: 64, height: 45, width: 16 },
        ];
        assert_eq!(parse_runs(&format_runs(&runs)).unwrap(), runs);
        assert!(parse_runs("right 1 2 3\n").is_err());
    }

    #[test]
    fn runs_outside_grid_rejected() {
        let mm = TileVocabulary::builtin(Game::Mm);
        let level = parse_level("----\n----\n", &mm).unwrap();
        let runs = vec![Run { direction: Direction::Right, top: 0, left: 0, height: 2, width: 5 }];
        assert!(matches!(level.with_runs(runs), Err(Error::Shape(_))));
    }
}
