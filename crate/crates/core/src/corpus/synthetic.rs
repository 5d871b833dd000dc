//! Procedural stand-in corpora.
//!
//! Produces VGLC-style text levels for SMB, KI, and MM with path tiles, so
//! the pipeline can be trained and evaluated without the real corpus. Layout
//! follows each game's orientation: SMB is 14 rows high and scrolls right,
//! KI is 16 columns wide and climbs up, MM chains horizontal corridors with
//! ladder shafts going up and drop shafts going down.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::level::{format_runs, Run};
use super::LevelSource;
use crate::direction::Direction;
use crate::corpus::vocab::Game;

struct Canvas {
    cells: Vec<Vec<char>>,
}

impl Canvas {
    fn new(height: usize, width: usize, fill: char) -> Canvas {
        Canvas { cells: vec![vec![fill; width]; height] }
    }

    fn height(&self) -> usize {
        self.cells.len()
    }

    fn width(&self) -> usize {
        self.cells[0].len()
    }

    fn set(&mut self, row: isize, col: isize, ch: char) {
        if row >= 0 && col >= 0 && (row as usize) < self.height() && (col as usize) < self.width() {
            self.cells[row as usize][col as usize] = ch;
        }
    }

    fn get(&self, row: isize, col: isize) -> Option<char> {
        if row < 0 || col < 0 {
            return None;
        }
        self.cells.get(row as usize).and_then(|r| r.get(col as usize)).copied()
    }

    /// Marks a path tile if the cell is open.
    fn path(&mut self, row: isize, col: isize, path: char, open: char) {
        if self.get(row, col) == Some(open) {
            self.set(row, col, path);
        }
    }

    fn text(&self) -> String {
        let mut s = String::with_capacity(self.height() * (self.width() + 1));
        for row in &self.cells {
            s.extend(row.iter());
            s.push('\n');
        }
        s
    }
}

/// Stand-in level sources for a game. `SmbKi` yields the SMB levels followed
/// by the KI levels, in their own characters; ingest them with the blended
/// vocabulary.
pub fn sources(game: Game, seed: u64) -> Vec<LevelSource> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1e7e1);
    match game {
        Game::Smb => (0..15).map(|i| smb_level(&mut rng, i)).collect(),
        Game::Ki => (0..6).map(|i| ki_level(&mut rng, i)).collect(),
        Game::Mm => (0..10).map(|i| mm_level(&mut rng, i)).collect(),
        Game::SmbKi => {
            let mut v = sources(Game::Smb, seed);
            v.extend(sources(Game::Ki, seed));
            v
        }
    }
}

/// Files to write for a source: the level text and, for annotated levels,
/// the run annotation text.
pub fn files(source: &LevelSource) -> (String, Option<String>) {
    (source.text.clone(), source.runs.as_deref().map(format_runs))
}

fn smb_level(rng: &mut ChaCha8Rng, index: usize) -> LevelSource {
    const H: usize = 14;
    let width = rng.random_range(150..=220);
    let mut cv = Canvas::new(H, width, '-');
    // Ground height per column; 0 marks a gap.
    let mut heights = vec![0usize; width];
    let mut c = 0;
    let mut h = rng.random_range(1..=3);
    while c < width {
        let len = rng.random_range(6..=22).min(width - c);
        for hc in heights.iter_mut().skip(c).take(len) {
            *hc = h;
        }
        c += len;
        if c + 8 < width && rng.random_bool(0.3) {
            let gap = rng.random_range(2..=3).min(width - c);
            c += gap;
        }
        let next = h as isize + rng.random_range(-2i64..=2) as isize;
        h = next.clamp(1, 6) as usize;
    }
    for (col, &hc) in heights.iter().enumerate() {
        for r in H - hc..H {
            cv.set(r as isize, col as isize, 'X');
        }
    }
    // Topmost solid row per column.
    let mut surface: Vec<Option<usize>> = heights.iter().map(|&hc| (hc > 0).then(|| H - hc)).collect();
    let mut col = 8;
    while col + 4 < width {
        let top = match (surface[col], surface[col + 1]) {
            (Some(a), Some(b)) if a == b && heights[col + 2] > 0 => a,
            _ => {
                col += 1;
                continue;
            }
        };
        match rng.random_range(0..10) {
            0 | 1 => {
                // Pipe.
                let ph = rng.random_range(2..=4).min(top.saturating_sub(4));
                if ph >= 2 {
                    let pt = top - ph;
                    cv.set(pt as isize, col as isize, '<');
                    cv.set(pt as isize, col as isize + 1, '>');
                    for r in pt + 1..top {
                        cv.set(r as isize, col as isize, '[');
                        cv.set(r as isize, col as isize + 1, ']');
                    }
                    surface[col] = Some(pt);
                    surface[col + 1] = Some(pt);
                }
                col += rng.random_range(6..12);
            }
            2 | 3 => {
                // Floating block row with coins above.
                let len = rng.random_range(3..=6).min(width - col - 1);
                if top >= 6 {
                    let br = top - 4;
                    for k in 0..len {
                        let ch = if rng.random_bool(0.35) { '?' } else { 'S' };
                        cv.set(br as isize, (col + k) as isize, ch);
                        if rng.random_bool(0.3) {
                            cv.set(br as isize - 2, (col + k) as isize, 'o');
                        }
                    }
                }
                col += len + rng.random_range(3..8);
            }
            4 => {
                cv.set(top as isize - 1, col as isize, 'E');
                col += rng.random_range(4..9);
            }
            5 if top >= 4 => {
                cv.set(top as isize - 2, col as isize, 'B');
                cv.set(top as isize - 1, col as isize, 'b');
                surface[col] = Some(top - 2);
                col += rng.random_range(6..10);
            }
            6 => {
                for k in 0..3 {
                    cv.set(top as isize - 3, (col + k) as isize, 'o');
                }
                col += 5;
            }
            _ => col += rng.random_range(2..6),
        }
    }
    // Path: one tile above the surface, arcing over gaps and bridging steps.
    let mut prev: Option<isize> = None;
    let mut c = 0;
    while c < width {
        match surface[c] {
            Some(top) => {
                let row = top as isize - 1;
                if let Some(p) = prev {
                    let (lo, hi) = if p < row { (p, row) } else { (row, p) };
                    let bridge = if row < p { c as isize } else { c as isize - 1 };
                    for r in lo..=hi {
                        cv.path(r, bridge, 'x', '-');
                    }
                }
                cv.path(row, c as isize, 'x', '-');
                prev = Some(row);
                c += 1;
            }
            None => {
                let start = c;
                while c < width && surface[c].is_none() {
                    c += 1;
                }
                let before = prev.unwrap_or(H as isize - 2);
                let after = surface.get(c).copied().flatten().map_or(before, |t| t as isize - 1);
                let arc = before.min(after) - 2;
                for r in arc..=before {
                    cv.path(r, start as isize - 1, 'x', '-');
                }
                for k in start..c {
                    cv.path(arc, k as isize, 'x', '-');
                }
                prev = Some(arc);
            }
        }
    }
    LevelSource { name: format!("smb-{index:02}"), text: cv.text(), runs: None }
}

fn ki_level(rng: &mut ChaCha8Rng, index: usize) -> LevelSource {
    const W: usize = 16;
    let height = rng.random_range(150..=230);
    let mut cv = Canvas::new(height, W, '-');
    for r in 0..height {
        if rng.random_bool(0.85) {
            cv.set(r as isize, 0, '#');
        }
        if rng.random_bool(0.85) {
            cv.set(r as isize, W as isize - 1, '#');
        }
    }
    for r in height - 2..height {
        for c in 0..W {
            cv.set(r as isize, c as isize, '#');
        }
    }
    // Platforms climbing upward; the path walks each one and climbs beside
    // the next.
    let mut stand = height as isize - 3;
    let mut x = rng.random_range(2i64..6) as isize;
    cv.path(stand, x, 'P', '-');
    loop {
        let next = stand - rng.random_range(3i64..=5) as isize;
        if next < 2 {
            for r in 0..stand {
                cv.path(r, x, 'P', '-');
            }
            break;
        }
        let len = rng.random_range(3i64..=7) as isize;
        let a = rng.random_range(2..=(W as i64 - 2 - len as i64)) as isize;
        let b = a + len;
        let kind = match rng.random_range(0..10) {
            0 => 'M',
            1..=4 => '#',
            _ => 'T',
        };
        for c in a..b {
            cv.set(next, c, kind);
        }
        if rng.random_bool(0.2) {
            cv.set(next, if rng.random_bool(0.5) { a } else { b - 1 }, 'H');
        }
        if rng.random_bool(0.08) {
            cv.set(next - 1, b - 1, 'D');
        }
        let climb = if a - 1 >= 1 && (x <= a || b > W as isize - 2) { a - 1 } else { b };
        let (lo, hi) = if x < climb { (x, climb) } else { (climb, x) };
        for c in lo..=hi {
            cv.path(stand, c, 'P', '-');
        }
        for r in next - 1..=stand {
            cv.path(r, climb, 'P', '-');
        }
        let target = rng.random_range(a as i64..b as i64) as isize;
        let (lo, hi) = if climb < target { (climb, target) } else { (target, climb) };
        for c in lo..=hi {
            cv.path(next - 1, c, 'P', '-');
        }
        stand = next - 1;
        x = target;
        if rng.random_bool(0.3) {
            cv.set(next - 2 - rng.random_range(0i64..2) as isize, rng.random_range(1i64..15) as isize, 'H');
        }
    }
    LevelSource { name: format!("ki-{index:02}"), text: cv.text(), runs: None }
}

#[derive(Clone, Copy)]
enum Piece {
    Corridor(usize),
    Shaft(Direction, usize),
}

fn mm_level(rng: &mut ChaCha8Rng, index: usize) -> LevelSource {
    // Sequence of pieces: corridors alternate with shafts.
    let count = rng.random_range(5..=7);
    let mut pieces = Vec::new();
    for i in 0..count {
        if i % 2 == 0 {
            pieces.push(Piece::Corridor(16 * rng.random_range(2..=4)));
        } else {
            let dir = if rng.random_bool(0.5) { Direction::Up } else { Direction::Down };
            pieces.push(Piece::Shaft(dir, 15 * rng.random_range(2..=4)));
        }
    }
    // Place pieces left to right; rows may go negative and are shifted after.
    let mut placed: Vec<(Piece, isize, usize)> = Vec::new();
    let (mut row, mut col) = (0isize, 0usize);
    for (i, piece) in pieces.iter().enumerate() {
        match *piece {
            Piece::Corridor(w) => {
                placed.push((*piece, row, col));
                col += w;
            }
            Piece::Shaft(dir, h) => {
                let top = match dir {
                    Direction::Up => row + 15 - h as isize,
                    _ => row,
                };
                placed.push((*piece, top, col));
                col += 16;
                if i + 1 < pieces.len() {
                    row = match dir {
                        Direction::Up => top,
                        _ => top + h as isize - 15,
                    };
                }
            }
        }
    }
    let min_row = placed.iter().map(|p| p.1).min().unwrap_or(0);
    let max_row = placed
        .iter()
        .map(|&(p, r, _)| r + match p {
            Piece::Corridor(_) => 15,
            Piece::Shaft(_, h) => h as isize,
        })
        .max()
        .unwrap_or(15);
    let mut cv = Canvas::new((max_row - min_row) as usize, col, '@');
    let mut runs = Vec::new();
    for (piece, r, c) in placed {
        let top = (r - min_row) as usize;
        match piece {
            Piece::Corridor(w) => {
                mm_corridor(rng, &mut cv, top, c, w);
                runs.push(Run { direction: Direction::Right, top, left: c, height: 15, width: w });
            }
            Piece::Shaft(dir, h) => {
                if dir == Direction::Up {
                    mm_ladder_shaft(rng, &mut cv, top, c, h);
                } else {
                    mm_drop_shaft(rng, &mut cv, top, c, h);
                }
                runs.push(Run { direction: dir, top, left: c, height: h, width: 16 });
            }
        }
    }
    LevelSource { name: format!("mm-{index:02}"), text: cv.text(), runs: Some(runs) }
}

fn mm_corridor(rng: &mut ChaCha8Rng, cv: &mut Canvas, top: usize, left: usize, width: usize) {
    for r in 0..15 {
        for c in 0..width {
            cv.set((top + r) as isize, (left + c) as isize, '-');
        }
    }
    for c in 0..width {
        cv.set(top as isize, (left + c) as isize, '#');
    }
    let mut h = rng.random_range(1..=3);
    let mut c = 0;
    let mut surface = vec![0usize; width];
    while c < width {
        let len = rng.random_range(4..=12).min(width - c);
        let spikes = c > 2 && rng.random_bool(0.2);
        for k in c..c + len {
            for r in 15 - h..15 {
                cv.set((top + r) as isize, (left + k) as isize, '#');
            }
            if spikes && k < c + 2 {
                cv.set((top + 14 - h) as isize, (left + k) as isize, 'H');
            }
            surface[k] = 14 - h;
        }
        if rng.random_bool(0.3) && len > 4 {
            let pr = 14 - h - 3;
            for k in c + 1..c + 4 {
                cv.set((top + pr) as isize, (left + k) as isize, if rng.random_bool(0.5) { 'M' } else { 'B' });
            }
            if rng.random_bool(0.5) {
                cv.set((top + pr - 1) as isize, (left + c + 2) as isize, if rng.random_bool(0.5) { 'C' } else { 'U' });
            }
        }
        c += len;
        h = (h as isize + rng.random_range(-1i64..=1) as isize).clamp(1, 4) as usize;
    }
    let mut prev: Option<usize> = None;
    for (k, &s) in surface.iter().enumerate() {
        let mut row_here = s;
        if cv.get((top + s) as isize, (left + k) as isize) == Some('H') {
            row_here -= 1;
        }
        if let Some(p) = prev {
            let (lo, hi) = (p.min(row_here), p.max(row_here));
            for r in lo..=hi {
                cv.path((top + r) as isize, (left + k) as isize, 'x', '-');
            }
        }
        cv.path((top + row_here) as isize, (left + k) as isize, 'x', '-');
        prev = Some(row_here);
    }
}

fn shaft_walls(rng: &mut ChaCha8Rng, cv: &mut Canvas, top: usize, left: usize, height: usize) {
    for r in 0..height {
        for c in 0..16 {
            let ch = if c == 0 || c == 15 { '#' } else { '-' };
            cv.set((top + r) as isize, (left + c) as isize, ch);
        }
        if rng.random_bool(0.1) {
            let side = if rng.random_bool(0.5) { 1 } else { 14 };
            cv.set((top + r) as isize, (left + side) as isize, 'H');
        }
    }
}

fn mm_ladder_shaft(rng: &mut ChaCha8Rng, cv: &mut Canvas, top: usize, left: usize, height: usize) {
    shaft_walls(rng, cv, top, left, height);
    let mut lc = rng.random_range(3..11);
    let mut r = height;
    // Ladders in stretches of 5-10 rows, shifting sideways on small ledges.
    while r > 0 {
        let len = rng.random_range(5..=10).min(r);
        for k in r - len..r {
            cv.set((top + k) as isize, (left + lc) as isize, 'L');
            cv.set((top + k) as isize, (left + lc + 1) as isize, 'x');
        }
        r -= len;
        if r > 0 {
            let shift: isize = if lc <= 4 { 2 } else if lc >= 10 { -2 } else if rng.random_bool(0.5) { 2 } else { -2 };
            let nc = (lc as isize + shift) as usize;
            for c in lc.min(nc)..=lc.max(nc) + 1 {
                cv.set((top + r) as isize, (left + c) as isize, '#');
            }
            // Walk across the ledge.
            for c in lc.min(nc) + 1..=lc.max(nc) + 1 {
                cv.path((top + r - 1) as isize, (left + c) as isize, 'x', '-');
            }
            r -= 1;
            lc = nc;
        }
    }
}

fn mm_drop_shaft(rng: &mut ChaCha8Rng, cv: &mut Canvas, top: usize, left: usize, height: usize) {
    shaft_walls(rng, cv, top, left, height);
    // Staggered ledges; the path crosses each ledge and drops off its end.
    let mut r = 2;
    let mut from_left = rng.random_bool(0.5);
    let mut x: usize = if from_left { 2 } else { 13 };
    while r < height {
        let len = rng.random_range(6..=10);
        let (a, b) = if from_left { (1, 1 + len) } else { (15 - len, 15) };
        let ledge = (r + rng.random_range(3..=5)).min(height - 1);
        for c in a..b {
            cv.set((top + ledge) as isize, (left + c) as isize, '#');
        }
        if rng.random_bool(0.25) {
            cv.set((top + ledge) as isize - 1, (left + (a + b) / 2) as isize, 'H');
        }
        let drop = if from_left { b } else { a - 1 };
        for k in r..ledge {
            cv.path((top + k) as isize, (left + x) as isize, 'x', '-');
        }
        let (lo, hi) = (x.min(drop), x.max(drop));
        for c in lo..=hi {
            cv.path((top + ledge) as isize - 1, (left + c) as isize, 'x', '-');
        }
        x = drop;
        r = ledge + 1;
        from_left = !from_left;
        if ledge + 1 >= height {
            break;
        }
    }
    for k in r..height {
        cv.path((top + k) as isize, (left + x) as isize, 'x', '-');
    }
}
