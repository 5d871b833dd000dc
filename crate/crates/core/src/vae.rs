//! The sequential-segment VAE.
//!
//! The encoder maps a segment's one-hot encoding to the mean and log-variance
//! of a 128-dimensional Gaussian; the decoder maps a latent vector to
//! per-tile channel probabilities. Training scores the decoder output against
//! the *follower* of the encoded segment, never the segment itself, so at
//! inference `decode(encode(s))` proposes the segment that comes after `s`.

use std::time::Instant;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{argmax_decode, one_hot_len, write_one_hot, Segment, TileVocabulary, TrainingPair};
use crate::error::{Error, Result};
use crate::generator::SegmentModel;
use crate::nn::{Activation, AdamConfig, AdamState, DenseNet, Gradients, OutputGrad, Real, Schedule};

pub const LATENT_DIM: usize = 128;
/// Hidden widths of the published architecture.
pub const PAPER_HIDDEN: [usize; 3] = [1024, 512, 256];
/// Hidden widths of the desk profile.
pub const DESK_HIDDEN: [usize; 3] = [256, 128, 128];

/// Hyperparameters for [`train_vae`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Stop after this many epochs (the schedule still spans its full length).
    #[serde(default)]
    pub max_epochs: Option<usize>,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            hidden: PAPER_HIDDEN.to_vec(),
            batch_size: 64,
            schedule: Schedule::paper(),
            adam: AdamConfig::default(),
            seed: 0,
            max_epochs: None,
        }
    }
}

impl VaeConfig {
    /// Single-machine profile: the schedule compressed proportionally to
    /// 2000 epochs and narrower hidden layers.
    pub fn desk() -> VaeConfig {
        VaeConfig { hidden: DESK_HIDDEN.to_vec(), schedule: Schedule::desk(), ..VaeConfig::default() }
    }

    pub fn epochs(&self) -> usize {
        self.max_epochs.map_or(self.schedule.total_epochs, |m| m.min(self.schedule.total_epochs))
    }

    fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.batch_size == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("batch size and hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to reproduce a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeManifest {
    pub config: VaeConfig,
    pub latent_dim: usize,
    pub pairs: usize,
    pub corpus_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample reconstruction term over the epoch.
    pub recon: f64,
    /// Mean per-sample KL term over the epoch.
    pub kl: f64,
    pub lr: f64,
    pub kl_weight: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct VaeModel {
    pub encoder: DenseNet<f32>,
    pub decoder: DenseNet<f32>,
    pub vocab: TileVocabulary,
    pub manifest: VaeManifest,
}

fn encoder_shape(input: usize, hidden: &[usize]) -> (Vec<usize>, Vec<Activation>) {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(2 * LATENT_DIM);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(Activation::None);
    (sizes, acts)
}

fn decoder_shape(output: usize, hidden: &[usize]) -> (Vec<usize>, Vec<Activation>) {
    let mut sizes = vec![LATENT_DIM];
    sizes.extend(hidden.iter().rev());
    sizes.push(output);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(Activation::Sigmoid);
    (sizes, acts)
}

impl VaeModel {
    /// Freshly initialized model.
    pub fn init(vocab: &TileVocabulary, config: &VaeConfig) -> Result<VaeModel> {
        config.validate()?;
        let d = one_hot_len(vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let (es, ea) = encoder_shape(d, &config.hidden);
        let (ds, da) = decoder_shape(d, &config.hidden);
        Ok(VaeModel {
            encoder: DenseNet::init(&es, &ea, &mut rng)?,
            decoder: DenseNet::init(&ds, &da, &mut rng)?,
            vocab: vocab.clone(),
            manifest: VaeManifest { config: config.clone(), latent_dim: LATENT_DIM, pairs: 0, corpus_digest: None },
        })
    }

    /// Reassembles a model from stored parts, checking the invariants.
    pub fn from_parts(
        encoder: DenseNet<f32>,
        decoder: DenseNet<f32>,
        vocab: TileVocabulary,
        manifest: VaeManifest,
    ) -> Result<VaeModel> {
        let d = one_hot_len(&vocab);
        if encoder.input_size() != d || decoder.output_size() != d {
            return Err(Error::Shape(format!(
                "encoder input {} / decoder output {} do not match one-hot length {d}",
                encoder.input_size(),
                decoder.output_size()
            )));
        }
        if encoder.output_size() != 2 * LATENT_DIM || decoder.input_size() != LATENT_DIM {
            return Err(Error::Shape(format!("latent dimension must be {LATENT_DIM}")));
        }
        Ok(VaeModel { encoder, decoder, vocab, manifest })
    }

    fn input(&self, segment: &Segment) -> Result<Vec<f32>> {
        segment.validate(&self.vocab)?;
        let mut x = vec![0.0f32; one_hot_len(&self.vocab)];
        write_one_hot(segment, &mut x);
        Ok(x)
    }

    /// Posterior mean and log-variance.
    pub fn posterior(&self, segment: &Segment) -> Result<(Vec<f32>, Vec<f32>)> {
        let mut h = self.encoder.infer_one(&self.input(segment)?)?;
        let logvar = h.split_off(LATENT_DIM);
        Ok((h, logvar))
    }

    /// Posterior mean of the segment's encoding.
    pub fn encode(&self, segment: &Segment) -> Result<Vec<f32>> {
        Ok(self.posterior(segment)?.0)
    }

    /// A reparameterized sample from the posterior.
    pub fn encode_sampled<R: Rng + ?Sized>(&self, segment: &Segment, rng: &mut R) -> Result<Vec<f32>> {
        let (mu, logvar) = self.posterior(segment)?;
        let noise: Vec<f32> = (0..LATENT_DIM).map(|_| rng.sample(StandardNormal)).collect();
        crate::nn::reparameterize(&mu, &logvar, &noise)
    }

    /// Per-tile channel probabilities, channel-major.
    pub fn decode_probs(&self, z: &[f32]) -> Result<Vec<f32>> {
        if z.len() != LATENT_DIM {
            return Err(Error::Shape(format!("latent vector has {} entries, expected {LATENT_DIM}", z.len())));
        }
        self.decoder.infer_one(z)
    }

    /// Arg-max decoding; ties go to the lowest channel.
    pub fn decode(&self, z: &[f32]) -> Result<Segment> {
        argmax_decode(&self.decode_probs(z)?, self.vocab.len())
    }
}

impl SegmentModel for VaeModel {
    fn encode(&self, segment: &Segment) -> Result<Vec<f32>> {
        VaeModel::encode(self, segment)
    }

    fn decode(&self, z: &[f32]) -> Result<Segment> {
        VaeModel::decode(self, z)
    }

    fn latent_dim(&self) -> usize {
        LATENT_DIM
    }
}

/// 128 standard-normal draws determined by `seed`.
pub fn sample_prior(seed: u64) -> Vec<f32> {
    sample_prior_dim(LATENT_DIM, seed)
}

pub fn sample_prior_dim(dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// `(1 - t) * a + t * b` for `t` in `[0, 1]`.
pub fn interpolate(a: &[f32], b: &[f32], t: f64) -> Result<Vec<f32>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Range(format!("interpolation weight {t} outside [0, 1]")));
    }
    if a.len() != b.len() {
        return Err(Error::Shape(format!("latent lengths differ: {} vs {}", a.len(), b.len())));
    }
    let t = t as f32;
    Ok(a.iter().zip(b).map(|(&x, &y)| (1.0 - t) * x + t * y).collect())
}

/// Loss terms and gradients for one batch, exposed for verification.
pub struct BatchOutcome<T = f32> {
    /// Summed (not averaged) reconstruction term over the batch.
    pub recon: f64,
    /// Summed KL term over the batch.
    pub kl: f64,
    pub encoder_grads: Gradients<T>,
    pub decoder_grads: Gradients<T>,
}

/// Forward and backward pass for one batch. `inputs` holds the one-hot
/// current segments and `targets` the one-hot followers, one per row; the
/// loss is `mean(recon) + kl_weight * mean(kl)` over rows.
pub fn batch_step(
    model: &VaeModel,
    inputs: ArrayView2<f32>,
    targets: ArrayView2<f32>,
    noise: ArrayView2<f32>,
    kl_weight: f64,
) -> Result<BatchOutcome> {
    if targets.ncols() != model.decoder.output_size() {
        return Err(Error::Shape("batch targets have the wrong width".into()));
    }
    vae_step(&model.encoder, &model.decoder, inputs, targets, noise, kl_weight)
}

/// [`batch_step`] over bare networks of any precision; the encoder's output
/// is split in half into mean and log-variance.
pub fn vae_step<T: Real>(
    encoder: &DenseNet<T>,
    decoder: &DenseNet<T>,
    inputs: ArrayView2<T>,
    targets: ArrayView2<T>,
    noise: ArrayView2<T>,
    kl_weight: f64,
) -> Result<BatchOutcome<T>> {
    let b = inputs.nrows();
    let latent = decoder.input_size();
    if encoder.output_size() != 2 * latent || targets.dim() != (b, decoder.output_size()) || noise.dim() != (b, latent) {
        return Err(Error::Shape("batch targets or noise have the wrong shape".into()));
    }
    let (h, enc_cache) = encoder.forward(inputs)?;
    let mu = h.slice(s![.., ..latent]);
    let logvar = h.slice(s![.., latent..]);
    let half = T::from_f64(0.5).expect("representable");
    let std = logvar.mapv(|v| (half * v).exp());
    let z = &mu + &(&std * &noise);
    let (p, dec_cache) = decoder.forward(z.view())?;

    let mut recon = 0.0f64;
    for (&pv, &t) in p.iter().zip(targets.iter()) {
        let (pv, t) = (pv.to_f64().expect("real"), t.to_f64().expect("real"));
        if !pv.is_finite() {
            return Err(Error::Numerical("decoder produced a non-finite probability".into()));
        }
        let pc = pv.clamp(crate::nn::PROB_CLAMP, 1.0 - crate::nn::PROB_CLAMP);
        recon -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
    }
    let mut kl = 0.0f64;
    for (&m, &lv) in mu.iter().zip(logvar.iter()) {
        let (m, lv) = (m.to_f64().expect("real"), lv.to_f64().expect("real"));
        kl += 0.5 * (lv.exp() + m * m - 1.0 - lv);
    }

    let inv_b = T::from_f64(1.0 / b as f64).expect("representable");
    let w = T::from_f64(kl_weight).expect("representable");
    // Sigmoid + BCE fused: d/dlogit = p - t.
    let dlogit = (&p - &targets) * inv_b;
    let decoder_grads = decoder.backward(&dec_cache, OutputGrad::PreActivation(dlogit.view()))?;
    let dz = &decoder_grads.input;
    let dmu = dz + &(&mu * (w * inv_b));
    let dlogvar = (dz * &noise * &std) * half + &(logvar.mapv(|v| v.exp() - T::one()) * (half * w * inv_b));
    let dh = concatenate(Axis(1), &[dmu.view(), dlogvar.view()]).expect("matching rows");
    let encoder_grads = encoder.backward(&enc_cache, OutputGrad::Output(dh.view()))?;
    Ok(BatchOutcome { recon, kl, encoder_grads, decoder_grads })
}

fn one_hot_rows(segments: impl ExactSizeIterator<Item = Segment>, width: usize) -> Array2<f32> {
    let n = segments.len();
    let mut m = Array2::<f32>::zeros((n, width));
    for (i, seg) in segments.enumerate() {
        write_one_hot(&seg, m.row_mut(i).as_slice_mut().expect("row-major"));
    }
    m
}

/// Trains a model to decode each pair's follower from its current segment.
pub fn train_vae(pairs: &[TrainingPair], vocab: &TileVocabulary, config: &VaeConfig) -> Result<(VaeModel, TrainReport)> {
    train_vae_with(pairs, vocab, config, |_| {})
}

/// [`train_vae`] with a callback invoked after every epoch.
pub fn train_vae_with(
    pairs: &[TrainingPair],
    vocab: &TileVocabulary,
    config: &VaeConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(VaeModel, TrainReport)> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus("no training pairs".into()));
    }
    for p in pairs {
        p.current.validate(vocab)?;
        p.follower.validate(vocab)?;
    }
    let mut model = VaeModel::init(vocab, config)?;
    model.manifest.pairs = pairs.len();
    let d = one_hot_len(vocab);
    let inputs = one_hot_rows(pairs.iter().map(|p| p.current), d);
    let targets = one_hot_rows(pairs.iter().map(|p| p.follower), d);

    let mut enc_opt = AdamState::new(&model.encoder, config.adam);
    let mut dec_opt = AdamState::new(&model.decoder, config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut report = TrainReport { seed: config.seed, epochs: Vec::with_capacity(config.epochs()) };

    for epoch in 0..config.epochs() {
        let started = Instant::now();
        let (lr, kl_weight) = config.schedule.at(epoch)?;
        order.shuffle(&mut rng);
        let (mut recon, mut kl) = (0.0, 0.0);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let x = inputs.select(Axis(0), chunk);
            let t = targets.select(Axis(0), chunk);
            let noise = Array2::from_shape_simple_fn((chunk.len(), LATENT_DIM), || rng.sample(StandardNormal));
            let out = batch_step(&model, x.view(), t.view(), noise.view(), kl_weight)?;
            if !(out.recon.is_finite() && out.kl.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {batch} (recon {}, kl {})",
                    out.recon, out.kl
                )));
            }
            recon += out.recon;
            kl += out.kl;
            enc_opt
                .step(&mut model.encoder, &out.encoder_grads, lr)
                .map_err(|e| Error::Numerical(format!("epoch {epoch}, batch {batch}, encoder: {e}")))?;
            dec_opt
                .step(&mut model.decoder, &out.decoder_grads, lr)
                .map_err(|e| Error::Numerical(format!("epoch {epoch}, batch {batch}, decoder: {e}")))?;
        }
        let n = pairs.len() as f64;
        let record = EpochRecord {
            epoch,
            recon: recon / n,
            kl: kl / n,
            lr,
            kl_weight,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        report.epochs.push(record);
    }
    Ok((model, report))
}

/// Mean per-pair reconstruction term of `pairs` under `model`, decoding the
/// posterior mean. Used to compare against a plain supervised target.
pub fn mean_follower_bce(model: &VaeModel, pairs: &[TrainingPair]) -> Result<f64> {
    let d = one_hot_len(&model.vocab);
    let x = one_hot_rows(pairs.iter().map(|p| p.current), d);
    let t = one_hot_rows(pairs.iter().map(|p| p.follower), d);
    let h = model.encoder.infer(x.view())?;
    let mu = h.slice(s![.., ..LATENT_DIM]).to_owned();
    let p = model.decoder.infer(mu.view())?;
    crate::nn::bce(p.as_slice().unwrap(), t.as_slice().unwrap()).map(|v| v / pairs.len() as f64)
}
