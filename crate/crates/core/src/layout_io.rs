//! Text form of a [`LevelLayout`].
//!
//! ```text
//! levelchain-layout 1
//! vocab smb
//! meta seed 7
//! truncated false
//! placements 2
//! placement 0 0 -
//! <16 rows of 16 tile characters>
//! placement 1 0 right
//! <16 rows>
//! ```
//!
//! `meta` lines carry free-form provenance (seeds, model hashes) and may
//! repeat. Cells are `x y` with `y` growing upward; the arrival is `-` for
//! the first placement.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::{Category, Game, Segment, TileVocabulary, SEGMENT_SIZE};
use crate::direction::Direction;
use crate::error::{Error, Result};
use crate::generator::{stitch, LevelLayout, Placement};

pub const LAYOUT_HEADER: &str = "levelchain-layout";
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutFile {
    pub vocab: TileVocabulary,
    pub meta: BTreeMap<String, String>,
    pub layout: LevelLayout,
}

pub fn write_layout(layout: &LevelLayout, vocab: &TileVocabulary, meta: &BTreeMap<String, String>) -> String {
    let mut out = format!("{LAYOUT_HEADER} {LAYOUT_VERSION}\nvocab {}\n", vocab.id());
    for (k, v) in meta {
        let _ = writeln!(out, "meta {k} {v}");
    }
    let _ = writeln!(out, "truncated {}", layout.truncated);
    let _ = writeln!(out, "placements {}", layout.len());
    for p in &layout.placements {
        let arrival = p.arrival.map_or("-", Direction::name);
        let _ = writeln!(out, "placement {} {} {arrival}", p.cell.0, p.cell.1);
        for line in p.segment.to_lines(vocab) {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line: line + 1, message: message.into() }
}

pub fn parse_layout(text: &str) -> Result<LayoutFile> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let mut next = |what: &str| -> Result<(usize, &str)> {
        let n = i;
        i += 1;
        lines.get(n).map(|l| (n, *l)).ok_or_else(|| parse_err(n, format!("expected {what}, found end of file")))
    };
    let (n, header) = next("header")?;
    match header.split_once(' ') {
        Some((LAYOUT_HEADER, v)) if v.trim() == LAYOUT_VERSION.to_string() => {}
        Some((LAYOUT_HEADER, v)) => return Err(parse_err(n, format!("unsupported layout version {v}"))),
        _ => return Err(parse_err(n, "missing layout header")),
    }
    let (n, vocab_line) = next("vocab line")?;
    let id = vocab_line.strip_prefix("vocab ").ok_or_else(|| parse_err(n, "expected `vocab <id>`"))?;
    let game: Game = id.trim().parse().map_err(|_| parse_err(n, format!("unknown vocabulary {id}")))?;
    let vocab = TileVocabulary::builtin(game);

    let mut meta = BTreeMap::new();
    let (mut n, mut line) = next("truncated line")?;
    while let Some(rest) = line.strip_prefix("meta ") {
        let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
        meta.insert(k.to_string(), v.to_string());
        (n, line) = next("truncated line")?;
    }
    let truncated = match line.strip_prefix("truncated ") {
        Some("true") => true,
        Some("false") => false,
        _ => return Err(parse_err(n, "expected `truncated true|false`")),
    };
    let (n, count_line) = next("placement count")?;
    let count: usize = count_line
        .strip_prefix("placements ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| parse_err(n, "expected `placements <count>`"))?;

    let mut layout = LevelLayout { placements: Vec::with_capacity(count), truncated };
    for _ in 0..count {
        let (n, head) = next("placement")?;
        let fields: Vec<&str> = head.split_whitespace().collect();
        let [tag, x, y, arrival] = fields[..] else {
            return Err(parse_err(n, "expected `placement <x> <y> <arrival>`"));
        };
        if tag != "placement" {
            return Err(parse_err(n, "expected `placement <x> <y> <arrival>`"));
        }
        let coord = |s: &str| s.parse::<i32>().map_err(|_| parse_err(n, format!("bad cell coordinate {s}")));
        let cell = (coord(x)?, coord(y)?);
        let arrival = match arrival {
            "-" => None,
            d => Some(d.parse::<Direction>().map_err(|_| parse_err(n, format!("bad direction {d}")))?),
        };
        let mut rows = Vec::with_capacity(SEGMENT_SIZE);
        let start = n + 1;
        for _ in 0..SEGMENT_SIZE {
            rows.push(next("segment row")?.1);
        }
        let segment = Segment::from_lines(&rows, &vocab).map_err(|e| match e {
            Error::UnknownTile { ch, row, col } => {
                parse_err(start + row, format!("unknown tile {ch:?} at column {col}"))
            }
            other => other,
        })?;
        layout.placements.push(Placement { segment, cell, arrival });
    }
    if let Some(extra) = lines.get(i).filter(|l| !l.trim().is_empty()) {
        return Err(parse_err(i, format!("unexpected trailing content {extra:?}")));
    }
    layout.validate()?;
    Ok(LayoutFile { vocab, meta, layout })
}

/// The stitched level as text, one line per row.
pub fn render_text(layout: &LevelLayout, vocab: &TileVocabulary) -> String {
    stitch(layout, vocab).to_text(vocab)
}

/// RGB colour of a tile, by category (path over hazard over interactable
/// over standable; anything else is background).
fn tile_colour(vocab: &TileVocabulary, tile: u8) -> [u8; 3] {
    const PALETTE: [(Category, [u8; 3]); 4] = [
        (Category::Path, [230, 40, 40]),
        (Category::HazardOrEnemy, [140, 40, 160]),
        (Category::Interactable, [240, 190, 40]),
        (Category::Standable, [120, 80, 40]),
    ];
    PALETTE.iter().find(|(c, _)| vocab.is(*c, tile)).map_or([150, 200, 250], |(_, rgb)| *rgb)
}

/// The stitched level as a binary PPM (P6) image, `scale` pixels per tile.
pub fn render_ppm(layout: &LevelLayout, vocab: &TileVocabulary, scale: usize) -> Vec<u8> {
    let grid = stitch(layout, vocab);
    let scale = scale.max(1);
    let (w, h) = (grid.width() * scale, grid.height() * scale);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h * 3);
    for row in &grid.rows {
        let line: Vec<u8> = row.iter().flat_map(|&t| tile_colour(vocab, t).repeat(scale)).collect();
        for _ in 0..scale {
            out.extend_from_slice(&line);
        }
    }
    out
}
