//! Shared fixtures for the pipeline benchmarks.

use levelchain::corpus::{ingest, synthetic, Corpus};
use levelchain::{Game, TileVocabulary};

/// Synthetic stand-in corpus for `game`, cut at stride 1.
pub fn corpus(game: Game) -> Corpus {
    let vocab = TileVocabulary::builtin(game);
    ingest(&synthetic::sources(game, 0), &vocab, 1, 16).expect("synthetic corpus ingests")
}
