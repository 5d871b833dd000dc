//! Per-game tile vocabularies and tile categories.
//!
//! Vocabularies are data: each one is a small TOML document listing the
//! tile characters, the background and path symbols, the category sets used
//! by the metrics, and an optional character remap applied during parsing
//! (used by the blended domain to share background and path tiles).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A game domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Game {
    #[serde(rename = "smb")]
    Smb,
    #[serde(rename = "ki")]
    Ki,
    #[serde(rename = "mm")]
    Mm,
    #[serde(rename = "smb-ki")]
    SmbKi,
}

impl Game {
    pub fn id(self) -> &'static str {
        match self {
            Game::Smb => "smb",
            Game::Ki => "ki",
            Game::Mm => "mm",
            Game::SmbKi => "smb-ki",
        }
    }

    /// Segments per generated level used by the evaluations: 16 for MM,
    /// 12 for the others.
    pub fn segments_per_level(self) -> usize {
        match self {
            Game::Mm => 16,
            _ => 12,
        }
    }
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Game {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smb" => Ok(Game::Smb),
            "ki" => Ok(Game::Ki),
            "mm" => Ok(Game::Mm),
            "smb-ki" | "smbki" | "smb_ki" => Ok(Game::SmbKi),
            other => Err(Error::Config(format!("unknown game {other:?}"))),
        }
    }
}

/// Tile categories consumed by the segment metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Standable,
    HazardOrEnemy,
    Interactable,
    Path,
    Background,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Standable,
        Category::HazardOrEnemy,
        Category::Interactable,
        Category::Path,
        Category::Background,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Category::Standable => "standable",
            Category::HazardOrEnemy => "hazard-or-enemy",
            Category::Interactable => "interactable",
            Category::Path => "path",
            Category::Background => "background",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// On-disk form of a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabConfig {
    pub game: Game,
    pub symbols: Vec<char>,
    pub background: char,
    pub path: char,
    pub categories: BTreeMap<String, Vec<char>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub remap: BTreeMap<char, char>,
}

/// The tile alphabet of one game domain.
#[derive(Debug, Clone)]
pub struct TileVocabulary {
    config: VocabConfig,
    index: HashMap<char, u8>,
    masks: Vec<u8>,
    background: u8,
    path: u8,
}

impl PartialEq for TileVocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
    }
}

impl TileVocabulary {
    pub fn builtin(game: Game) -> TileVocabulary {
        let text = match game {
            Game::Smb => include_str!("../../vocab/smb.toml"),
            Game::Ki => include_str!("../../vocab/ki.toml"),
            Game::Mm => include_str!("../../vocab/mm.toml"),
            Game::SmbKi => include_str!("../../vocab/smb_ki.toml"),
        };
        Self::from_toml(text).expect("builtin vocabulary is valid")
    }

    pub fn from_toml(text: &str) -> Result<TileVocabulary> {
        let config: VocabConfig =
            toml::from_str(text).map_err(|e| Error::InvalidVocabulary(e.to_string()))?;
        Self::from_config(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.config).expect("vocabulary serializes")
    }

    pub fn from_config(config: VocabConfig) -> Result<TileVocabulary> {
        if config.symbols.is_empty() || config.symbols.len() > 255 {
            return Err(Error::InvalidVocabulary(format!(
                "symbol count {} outside 1..=255",
                config.symbols.len()
            )));
        }
        let mut index = HashMap::new();
        for (i, &c) in config.symbols.iter().enumerate() {
            if index.insert(c, i as u8).is_some() {
                return Err(Error::InvalidVocabulary(format!("duplicate symbol {c:?}")));
            }
        }
        let lookup = |c: char, what: &str| {
            index
                .get(&c)
                .copied()
                .ok_or_else(|| Error::InvalidVocabulary(format!("{what} symbol {c:?} not in symbols")))
        };
        let background = lookup(config.background, "background")?;
        let path = lookup(config.path, "path")?;
        for (from, to) in &config.remap {
            lookup(*to, &format!("remap target of {from:?}"))?;
        }

        let mut masks = vec![0u8; config.symbols.len()];
        for (key, chars) in &config.categories {
            let cat = Category::ALL
                .iter()
                .copied()
                .find(|c| c.key() == key)
                .ok_or_else(|| Error::InvalidVocabulary(format!("unknown category {key:?}")))?;
            for &c in chars {
                masks[lookup(c, key)? as usize] |= cat.bit();
            }
        }
        for (cat, sym) in [(Category::Path, path), (Category::Background, background)] {
            let members: Vec<usize> =
                (0..masks.len()).filter(|&i| masks[i] & cat.bit() != 0).collect();
            if members != [sym as usize] {
                return Err(Error::InvalidVocabulary(format!(
                    "category {} must contain exactly the {} symbol",
                    cat.key(),
                    cat.key()
                )));
            }
        }
        Ok(TileVocabulary { config, index, masks, background, path })
    }

    pub fn game(&self) -> Game {
        self.config.game
    }

    pub fn id(&self) -> &'static str {
        self.config.game.id()
    }

    pub fn symbols(&self) -> &[char] {
        &self.config.symbols
    }

    pub fn len(&self) -> usize {
        self.config.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.symbols.is_empty()
    }

    pub fn config(&self) -> &VocabConfig {
        &self.config
    }

    /// Channel index of a character after applying the remap.
    pub fn index_of(&self, c: char) -> Option<u8> {
        let c = self.config.remap.get(&c).copied().unwrap_or(c);
        self.index.get(&c).copied()
    }

    pub fn symbol(&self, tile: u8) -> char {
        self.config.symbols[tile as usize]
    }

    pub fn background(&self) -> u8 {
        self.background
    }

    pub fn path(&self) -> u8 {
        self.path
    }

    pub fn is(&self, category: Category, tile: u8) -> bool {
        self.masks.get(tile as usize).is_some_and(|m| m & category.bit() != 0)
    }

    pub fn ensure_same(&self, other: &TileVocabulary) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Vocabulary { expected: self.id().into(), found: other.id().into() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_bijective() {
        for game in [Game::Smb, Game::Ki, Game::Mm, Game::SmbKi] {
            let v = TileVocabulary::builtin(game);
            for (i, &c) in v.symbols().iter().enumerate() {
                assert_eq!(v.index_of(c), Some(i as u8));
                assert_eq!(v.symbol(i as u8), c);
            }
        }
    }

    #[test]
    fn blend_shares_background_and_path() {
        let v = TileVocabulary::builtin(Game::SmbKi);
        assert_eq!(v.index_of('P'), v.index_of('x'));
        assert_eq!(v.index_of('P'), Some(v.path()));
        let paths = (0..v.len() as u8).filter(|&t| v.is(Category::Path, t)).count();
        let backgrounds = (0..v.len() as u8).filter(|&t| v.is(Category::Background, t)).count();
        assert_eq!((paths, backgrounds), (1, 1));
    }

    #[test]
    fn duplicate_symbols_rejected() {
        let text = r#"
game = "smb"
symbols = ["-", "x", "-"]
background = "-"
path = "x"
[categories]
path = ["x"]
background = ["-"]
"#;
        assert!(matches!(TileVocabulary::from_toml(text), Err(Error::InvalidVocabulary(_))));
    }

    #[test]
    fn toml_round_trip() {
        let v = TileVocabulary::builtin(Game::SmbKi);
        let back = TileVocabulary::from_toml(&v.to_toml()).unwrap();
        assert_eq!(v, back);
    }
}
