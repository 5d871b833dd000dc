//! Sequential segment-based platformer level generation.
//!
//! A VAE is trained to decode the *follower* of each encoded 16x16 segment,
//! so repeatedly encoding the last segment and decoding the result unrolls
//! a level one segment at a time. A random forest predicts which side of the
//! current segment the next one goes on, which lets levels turn upward,
//! downward, or sideways and lets blended domains mix orientations.

pub mod archive;
pub mod corpus;
pub mod direction;
pub mod error;
pub mod experiments;
pub mod forest;
pub mod generator;
pub mod layout_io;
pub mod metrics;
pub mod nn;
pub mod vae;

pub use corpus::{Game, Segment, TileVocabulary, TrainingPair};
pub use direction::Direction;
pub use error::{Error, Result};
pub use forest::{DirectionClassifier, ForestModel};
pub use generator::{LevelLayout, SegmentModel};
pub use vae::VaeModel;
