//! Level corpus ingestion: parsing VGLC-style text levels, cutting 16x16
//! segments along each level's progression, pairing every segment with its
//! follower, and the versioned corpus archive consumed by training.

mod level;
mod segment;
pub mod synthetic;
mod vocab;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use level::{
    format_runs, make_training_pairs, pair_origins, parse_level, parse_level_with, parse_rows, parse_runs,
    segment_level, LevelGrid, Progression, Run, Segmentation, TrainingPair, WindowOrigin,
};
pub use segment::{
    argmax_decode, one_hot, one_hot_len, write_one_hot, Segment, SEGMENT_SIZE, SEGMENT_TILES,
};
pub use vocab::{Category, Game, TileVocabulary, VocabConfig};

use crate::direction::Direction;
use crate::error::{Error, Result};

pub const CORPUS_FORMAT: &str = "levelchain-corpus";
pub const CORPUS_VERSION: u32 = 1;

/// One level handed to [`ingest`].
#[derive(Debug, Clone)]
pub struct LevelSource {
    pub name: String,
    pub text: String,
    /// Explicit runs; required for MM, optional elsewhere.
    pub runs: Option<Vec<Run>>,
}

/// Per-level ingestion summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub name: String,
    pub height: usize,
    pub width: usize,
    pub padded_rows: usize,
    pub runs: Vec<Run>,
    pub segments: usize,
    pub pairs: usize,
    pub short_runs: Vec<usize>,
}

/// Index-based pair: `current` and `follower` index into [`Corpus::segments`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRef {
    pub current: u32,
    pub follower: u32,
    pub direction: Direction,
}

/// Segments, follower pairs, and direction labels of one domain.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub vocab: TileVocabulary,
    pub stride: usize,
    pub offset: usize,
    pub levels: Vec<LevelRecord>,
    /// Every window cut at `stride`, levels in input order.
    pub segments: Vec<Segment>,
    pub pairs: Vec<PairRef>,
}

#[derive(Serialize, Deserialize)]
struct ArchiveDoc {
    format: String,
    version: u32,
    vocabulary: VocabConfig,
    stride: usize,
    offset: usize,
    levels: Vec<LevelRecord>,
    segments: Vec<Vec<String>>,
    pairs: Vec<PairRef>,
}

/// Reads every `*.txt` level in `dir`, sorted by file name. A sibling
/// `<stem>.runs` file, when present, supplies the level's runs.
pub fn load_dir(dir: &Path, prefix: &str) -> Result<Vec<LevelSource>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyCorpus(format!("no .txt level files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let runs_path = p.with_extension("runs");
            let runs = if runs_path.exists() { Some(parse_runs(&std::fs::read_to_string(&runs_path)?)?) } else { None };
            Ok(LevelSource { name: format!("{prefix}{stem}"), text: std::fs::read_to_string(p)?, runs })
        })
        .collect()
}

/// Parses and segments every level. Windows are cut at `stride`; each
/// window is paired with the window `offset` tiles ahead of it.
pub fn ingest(sources: &[LevelSource], vocab: &TileVocabulary, stride: usize, offset: usize) -> Result<Corpus> {
    if stride == 0 || offset == 0 || offset % stride != 0 {
        return Err(Error::Config(format!(
            "follower offset {offset} must be a positive multiple of stride {stride}"
        )));
    }
    let mut corpus = Corpus {
        vocab: vocab.clone(),
        stride,
        offset,
        levels: Vec::new(),
        segments: Vec::new(),
        pairs: Vec::new(),
    };
    for source in sources {
        let level = match &source.runs {
            Some(runs) => parse_level(&source.text, vocab)?.with_runs(runs.clone())?,
            None => parse_level(&source.text, vocab)?,
        };
        let seg = segment_level(&level, stride)?;
        let base = corpus.segments.len();
        let index: HashMap<WindowOrigin, usize> =
            seg.windows.iter().enumerate().map(|(i, (_, o))| (*o, base + i)).collect();
        corpus.segments.extend(seg.windows.iter().map(|(s, _)| *s));
        let origins = pair_origins(&level, stride, offset)?;
        for (cur, fol, direction) in &origins {
            corpus.pairs.push(PairRef {
                current: index[cur] as u32,
                follower: index[fol] as u32,
                direction: *direction,
            });
        }
        corpus.levels.push(LevelRecord {
            name: source.name.clone(),
            height: level.height(),
            width: level.width(),
            padded_rows: level.padded_rows(),
            runs: level.runs().to_vec(),
            segments: seg.windows.len(),
            pairs: origins.len(),
            short_runs: seg.short_runs,
        });
    }
    Ok(corpus)
}

impl Corpus {
    pub fn training_pairs(&self) -> Vec<TrainingPair> {
        self.pairs
            .iter()
            .map(|p| TrainingPair {
                current: self.segments[p.current as usize],
                follower: self.segments[p.follower as usize],
                direction: p.direction,
            })
            .collect()
    }

    /// Classifier rows: each paired segment with the direction its follower lies in.
    pub fn labeled_segments(&self) -> Vec<(Segment, Direction)> {
        self.pairs.iter().map(|p| (self.segments[p.current as usize], p.direction)).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = ArchiveDoc {
            format: CORPUS_FORMAT.into(),
            version: CORPUS_VERSION,
            vocabulary: self.vocab.config().clone(),
            stride: self.stride,
            offset: self.offset,
            levels: self.levels.clone(),
            segments: self.segments.iter().map(|s| s.to_lines(&self.vocab)).collect(),
            pairs: self.pairs.clone(),
        };
        serde_json::to_string(&doc).expect("corpus serializes")
    }

    pub fn from_json(text: &str) -> Result<Corpus> {
        let doc: ArchiveDoc =
            serde_json::from_str(text).map_err(|e| Error::Archive(format!("corpus archive: {e}")))?;
        if doc.format != CORPUS_FORMAT {
            return Err(Error::Archive(format!("not a corpus archive (format {:?})", doc.format)));
        }
        if doc.version != CORPUS_VERSION {
            return Err(Error::Archive(format!(
                "corpus archive version {} unsupported (expected {CORPUS_VERSION})",
                doc.version
            )));
        }
        let vocab = TileVocabulary::from_config(doc.vocabulary)?;
        let segments = doc
            .segments
            .iter()
            .map(|lines| Segment::from_lines(lines, &vocab))
            .collect::<Result<Vec<_>>>()?;
        for p in &doc.pairs {
            if p.current as usize >= segments.len() || p.follower as usize >= segments.len() {
                return Err(Error::Archive("pair index out of range".into()));
            }
        }
        Ok(Corpus { vocab, stride: doc.stride, offset: doc.offset, levels: doc.levels, segments, pairs: doc.pairs })
    }

    /// SHA-256 of the archive encoding, hex encoded.
    pub fn digest(&self) -> String {
        hex_digest(self.to_json().as_bytes())
    }

    /// Keeps the first `n` pairs in corpus order, dropping unreferenced segments.
    pub fn truncated(&self, n: usize) -> Corpus {
        let mut out = Corpus { segments: Vec::new(), pairs: Vec::new(), ..self.clone() };
        let mut remap = HashMap::new();
        for p in self.pairs.iter().take(n) {
            let mut idx = |i: u32| {
                *remap.entry(i).or_insert_with(|| {
                    out.segments.push(self.segments[i as usize]);
                    (out.segments.len() - 1) as u32
                })
            };
            let (current, follower) = (idx(p.current), idx(p.follower));
            out.pairs.push(PairRef { current, follower, direction: p.direction });
        }
        out
    }
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn hex_digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Concatenates SMB pairs with the KI pairs taken twice.
pub fn blend_pairs(smb: &[TrainingPair], ki: &[TrainingPair]) -> Vec<TrainingPair> {
    let mut out = Vec::with_capacity(smb.len() + 2 * ki.len());
    out.extend_from_slice(smb);
    out.extend_from_slice(ki);
    out.extend_from_slice(ki);
    out
}

/// Builds the blended domain corpus: all SMB segments and pairs followed by
/// the KI segments and pairs duplicated once. Both inputs must have been
/// ingested with the blended vocabulary.
pub fn build_blend_corpus(smb: &Corpus, ki: &Corpus) -> Result<Corpus> {
    let blend = TileVocabulary::builtin(Game::SmbKi);
    for c in [smb, ki] {
        if c.vocab.game() != Game::SmbKi {
            return Err(Error::Vocabulary { expected: blend.id().into(), found: c.vocab.id().into() });
        }
    }
    smb.vocab.ensure_same(&ki.vocab)?;
    let mut out = smb.clone();
    for _ in 0..2 {
        let base = out.segments.len() as u32;
        out.segments.extend_from_slice(&ki.segments);
        out.pairs.extend(ki.pairs.iter().map(|p| PairRef {
            current: p.current + base,
            follower: p.follower + base,
            direction: p.direction,
        }));
        out.levels.extend(ki.levels.iter().cloned());
    }
    Ok(out)
}
