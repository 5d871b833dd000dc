//! Binary model archives.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "LVLCHAIN"
//! 8       4     format version, u32 LE
//! 12      1     kind: 1 = vae, 2 = forest
//! 13      4     manifest length M, u32 LE
//! 17      M     manifest, UTF-8 JSON (hyperparameters, seeds, vocabulary)
//! 17+M    8     payload length P, u64 LE
//! 25+M    P     payload
//! 25+M+P  32    SHA-256 of every preceding byte
//! ```
//!
//! VAE payload: u32 network count (2: encoder, decoder); per network a u32
//! layer count; per layer an activation byte (0 none, 1 relu, 2 sigmoid),
//! u32 rows (outputs), u32 columns (inputs), rows*columns f32 LE weights in
//! row-major order, then rows f32 LE biases.
//!
//! Forest payload: u32 tree count; per tree a u32 node count; per node a tag
//! byte, then for a leaf (tag 0) four u32 class counts, for a split (tag 1) a
//! u16 feature index, a u8 threshold, and u32 left and right child indices.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{TileVocabulary, VocabConfig};
use crate::error::{Error, Result};
use crate::forest::{ForestConfig, ForestModel, Node, Tree, CLASSES};
use crate::nn::{Activation, DenseNet, Layer};
use crate::vae::{VaeManifest, VaeModel};

pub const MAGIC: &[u8; 8] = b"LVLCHAIN";
pub const FORMAT_VERSION: u32 = 1;
const HEADER: usize = 8 + 4 + 1 + 4;
const CHECKSUM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vae,
    Forest,
}

impl ModelKind {
    fn code(self) -> u8 {
        match self {
            ModelKind::Vae => 1,
            ModelKind::Forest => 2,
        }
    }

    fn from_code(code: u8) -> Result<ModelKind> {
        match code {
            1 => Ok(ModelKind::Vae),
            2 => Ok(ModelKind::Forest),
            _ => Err(Error::Archive(format!("unknown model kind {code}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VaeHeader {
    vocab: VocabConfig,
    manifest: VaeManifest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ForestHeader {
    vocab: VocabConfig,
    config: ForestConfig,
    class_counts: [usize; CLASSES],
    degenerate: bool,
}

/// An archive split into its parts, checksum already verified.
#[derive(Debug, Clone)]
pub struct RawArchive {
    pub version: u32,
    pub kind: ModelKind,
    pub manifest: serde_json::Value,
    pub payload: Vec<u8>,
    pub checksum: String,
}

pub enum Model {
    Vae(VaeModel),
    Forest(ForestModel),
}

fn assemble(kind: ModelKind, manifest: &impl Serialize, payload: &[u8]) -> Vec<u8> {
    let manifest = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(HEADER + manifest.len() + 8 + payload.len() + CHECKSUM);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind.code());
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

/// Splits and verifies an archive: magic, then version, then checksum.
pub fn read_raw(bytes: &[u8]) -> Result<RawArchive> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Archive("not a model archive (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Archive(format!(
            "unsupported format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    if bytes.len() < HEADER + 8 + CHECKSUM {
        return Err(Error::Archive("checksum mismatch: archive is truncated".into()));
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM);
    let digest = Sha256::digest(body);
    if digest.as_slice() != stored {
        return Err(Error::Archive("checksum mismatch: archive is corrupt or truncated".into()));
    }
    let kind = ModelKind::from_code(body[12])?;
    let mut r = Reader::new(&body[13..]);
    let m = r.u32()? as usize;
    let manifest = serde_json::from_slice(r.take(m)?)
        .map_err(|e| Error::Archive(format!("manifest is not valid JSON: {e}")))?;
    let p = r.u64()? as usize;
    let payload = r.take(p)?.to_vec();
    if !r.is_empty() {
        return Err(Error::Archive("trailing bytes after payload".into()));
    }
    Ok(RawArchive { version, kind, manifest, payload, checksum: crate::corpus::hex(stored) })
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.bytes.len() {
            return Err(Error::Archive("unexpected end of data".into()));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Archive("array too large".into()))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

fn write_net(out: &mut Vec<u8>, net: &DenseNet<f32>) {
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        out.push(layer.activation.code());
        let (rows, cols) = layer.weight.dim();
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in layer.weight.iter().chain(layer.bias.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn read_net(r: &mut Reader) -> Result<DenseNet<f32>> {
    let n = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let code = r.u8()?;
        let activation = Activation::from_code(code).ok_or_else(|| Error::Archive(format!("bad activation {code}")))?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let weight = Array2::from_shape_vec((rows, cols), r.f32s(rows * cols)?)
            .map_err(|e| Error::Archive(e.to_string()))?;
        let bias = Array1::from(r.f32s(rows)?);
        layers.push(Layer { weight, bias, activation });
    }
    DenseNet::new(layers)
}

pub fn vae_to_bytes(model: &VaeModel) -> Vec<u8> {
    let mut payload = 2u32.to_le_bytes().to_vec();
    write_net(&mut payload, &model.encoder);
    write_net(&mut payload, &model.decoder);
    let header = VaeHeader { vocab: model.vocab.config().clone(), manifest: model.manifest.clone() };
    assemble(ModelKind::Vae, &header, &payload)
}

pub fn forest_to_bytes(model: &ForestModel) -> Vec<u8> {
    let mut p = (model.trees.len() as u32).to_le_bytes().to_vec();
    for tree in &model.trees {
        p.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
        for node in &tree.nodes {
            match *node {
                Node::Leaf(counts) => {
                    p.push(0);
                    for c in counts {
                        p.extend_from_slice(&c.to_le_bytes());
                    }
                }
                Node::Split { feature, threshold, left, right } => {
                    p.push(1);
                    p.extend_from_slice(&feature.to_le_bytes());
                    p.push(threshold);
                    p.extend_from_slice(&left.to_le_bytes());
                    p.extend_from_slice(&right.to_le_bytes());
                }
            }
        }
    }
    let header = ForestHeader {
        vocab: model.vocab.config().clone(),
        config: model.config.clone(),
        class_counts: model.class_counts,
        degenerate: model.degenerate,
    };
    assemble(ModelKind::Forest, &header, &p)
}

fn parse_header<T: for<'de> Deserialize<'de>>(raw: &RawArchive) -> Result<T> {
    serde_json::from_value(raw.manifest.clone()).map_err(|e| Error::Archive(format!("bad manifest: {e}")))
}

fn decode_vae(raw: &RawArchive) -> Result<VaeModel> {
    let header: VaeHeader = parse_header(raw)?;
    let vocab = TileVocabulary::from_config(header.vocab)?;
    let mut r = Reader::new(&raw.payload);
    if r.u32()? != 2 {
        return Err(Error::Archive("VAE payload must hold exactly two networks".into()));
    }
    let encoder = read_net(&mut r)?;
    let decoder = read_net(&mut r)?;
    if !r.is_empty() {
        return Err(Error::Archive("trailing bytes in VAE payload".into()));
    }
    VaeModel::from_parts(encoder, decoder, vocab, header.manifest)
}

fn decode_forest(raw: &RawArchive) -> Result<ForestModel> {
    let header: ForestHeader = parse_header(raw)?;
    let vocab = TileVocabulary::from_config(header.vocab)?;
    let mut r = Reader::new(&raw.payload);
    let n = r.u32()? as usize;
    let mut trees = Vec::with_capacity(n.min(4096));
    for t in 0..n {
        let m = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(m.min(1 << 20));
        for _ in 0..m {
            nodes.push(match r.u8()? {
                0 => Node::Leaf([r.u32()?, r.u32()?, r.u32()?, r.u32()?]),
                1 => Node::Split { feature: r.u16()?, threshold: r.u8()?, left: r.u32()?, right: r.u32()? },
                tag => return Err(Error::Archive(format!("tree {t}: bad node tag {tag}"))),
            });
        }
        let tree = Tree { nodes };
        if !tree.validate(crate::corpus::SEGMENT_TILES) {
            return Err(Error::Archive(format!("tree {t} is malformed")));
        }
        trees.push(tree);
    }
    if !r.is_empty() {
        return Err(Error::Archive("trailing bytes in forest payload".into()));
    }
    if trees.is_empty() {
        return Err(Error::Archive("forest has no trees".into()));
    }
    Ok(ForestModel { vocab, config: header.config, trees, class_counts: header.class_counts, degenerate: header.degenerate })
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    let raw = read_raw(bytes)?;
    match raw.kind {
        ModelKind::Vae => decode_vae(&raw).map(Model::Vae),
        ModelKind::Forest => decode_forest(&raw).map(Model::Forest),
    }
}

pub fn vae_from_bytes(bytes: &[u8]) -> Result<VaeModel> {
    match model_from_bytes(bytes)? {
        Model::Vae(m) => Ok(m),
        Model::Forest(_) => Err(Error::Archive("expected a vae archive, found a forest".into())),
    }
}

pub fn forest_from_bytes(bytes: &[u8]) -> Result<ForestModel> {
    match model_from_bytes(bytes)? {
        Model::Forest(m) => Ok(m),
        Model::Vae(_) => Err(Error::Archive("expected a forest archive, found a vae".into())),
    }
}

/// SHA-256 (hex) of a whole archive, used as the model hash in provenance.
pub fn archive_hash(bytes: &[u8]) -> String {
    crate::corpus::hex_digest(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Game, Segment};
    use crate::direction::Direction;
    use crate::forest::train_forest;
    use crate::nn::Schedule;
    use crate::vae::{sample_prior, VaeConfig};

    fn small_vae() -> VaeModel {
        let vocab = TileVocabulary::builtin(Game::Ki);
        let config = VaeConfig { hidden: vec![32], schedule: Schedule::desk(), seed: 4, ..VaeConfig::default() };
        VaeModel::init(&vocab, &config).unwrap()
    }

    #[test]
    fn vae_round_trip_is_bit_exact() {
        let model = small_vae();
        let bytes = vae_to_bytes(&model);
        let back = vae_from_bytes(&bytes).unwrap();
        assert_eq!(back.encoder, model.encoder);
        assert_eq!(back.decoder, model.decoder);
        assert_eq!(back.manifest, model.manifest);
        let z = sample_prior(1);
        assert_eq!(back.decode_probs(&z).unwrap(), model.decode_probs(&z).unwrap());
        assert_eq!(vae_to_bytes(&back), bytes);
    }

    #[test]
    fn forest_round_trip() {
        let vocab = TileVocabulary::builtin(Game::Smb);
        let data: Vec<_> = (0..8)
            .map(|k| {
                let mut s = Segment::filled(0);
                s.set(3, 3, (k % 3) as u8);
                (s, if k % 3 == 0 { Direction::Up } else { Direction::Right })
            })
            .collect();
        let model = train_forest(&data, &vocab, &ForestConfig { n_trees: 5, ..ForestConfig::default() }).unwrap();
        let back = forest_from_bytes(&forest_to_bytes(&model)).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn version_bump_is_refused() {
        let mut bytes = vae_to_bytes(&small_vae());
        bytes[8] = 2;
        let err = vae_from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
    }

    #[test]
    fn truncation_and_corruption_fail_the_checksum() {
        let bytes = vae_to_bytes(&small_vae());
        for cut in [bytes.len() - 1, bytes.len() / 2, 40] {
            let err = vae_from_bytes(&bytes[..cut]).unwrap_err().to_string();
            assert!(err.contains("checksum"), "{err}");
        }
        let mut flipped = bytes.clone();
        flipped[bytes.len() / 2] ^= 1;
        assert!(vae_from_bytes(&flipped).unwrap_err().to_string().contains("checksum"));
        assert!(vae_from_bytes(b"nonsense").unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let bytes = vae_to_bytes(&small_vae());
        assert!(forest_from_bytes(&bytes).is_err());
        assert_eq!(read_raw(&bytes).unwrap().kind, ModelKind::Vae);
    }
}
