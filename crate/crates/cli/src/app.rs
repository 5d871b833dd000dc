//! Argument parsing and the subcommand pipelines.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use levelchain::archive::{self, Model};
use levelchain::corpus::{self, synthetic, Corpus, Game, LevelSource, TileVocabulary, TrainingPair};
use levelchain::experiments::{self, ExperimentConfig, Models, Provenance};
use levelchain::forest::{self, ForestModel};
use levelchain::generator::{self, LevelLayout};
use levelchain::layout_io;
use levelchain::vae::{self, VaeModel};
use levelchain::Direction;

use crate::config::{Profile, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "levelchain", version, about = "Sequential segment-based platformer level generation")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed for every random choice of the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse level files into a corpus archive.
    Ingest(IngestArgs),
    /// Train the follower-decoding VAE on a corpus.
    TrainVae(TrainVaeArgs),
    /// Train the placement-direction forest on a corpus.
    TrainForest(TrainForestArgs),
    /// Generate one level and write its layout.
    Generate(GenerateArgs),
    /// Sequential vs independent discontinuity comparison.
    EvalDiscontinuity(EvalArgs),
    /// Blend-set direction proportions and tile metrics.
    EvalBlend(EvalBlendArgs),
    /// Metric trends along long generated levels.
    EvalProgression(EvalArgs),
    /// Stitch a layout into a text grid (and optionally an image).
    Render(RenderArgs),
    /// Describe a model archive, corpus archive, or layout file.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub domain: Game,
    /// Directory of `*.txt` levels (with optional `*.runs`). The blended
    /// domain takes two: the SMB directory, then the KI directory.
    #[arg(long, value_name = "DIR", required_unless_present = "synthetic")]
    pub input: Vec<PathBuf>,
    /// Use the built-in stand-in levels instead of files.
    #[arg(long, conflicts_with = "input")]
    pub synthetic: bool,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub offset: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainVaeArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    /// Stop after this many epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Encoder hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Train on an evenly spaced subset of at most this many pairs.
    #[arg(long)]
    pub max_pairs: Option<usize>,
    /// Print progress every this many epochs (0 disables).
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
}

#[derive(Debug, Args)]
pub struct TrainForestArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub no_oversample: bool,
    /// Held-out share for the report; 0 trains on every segment.
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sequential,
    Independent,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_name = "FILE")]
    pub vae: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub forest: PathBuf,
    /// Expected domain; checked against the models' vocabulary.
    #[arg(long)]
    pub domain: Option<Game>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long, value_enum, default_value_t = Mode::Sequential)]
    pub mode: Mode,
    /// Segments in the level, including the initial one.
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub segments: Option<usize>,
    /// Progression levels are this many times the usual length.
    #[arg(long)]
    pub multiplier: Option<usize>,
    /// Write the full report as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalBlendArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Blended corpus; supplies the interpolation endpoints and baselines.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub layout: PathBuf,
    /// Write the text grid here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write an uncompressed PPM image.
    #[arg(long, value_name = "FILE")]
    pub ppm: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub file: PathBuf,
}

/// Parses `argv` and runs the command, returning the process exit status.
/// Usage errors exit 2; failures print `error[<kind>]: <message>` and exit 1.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}

/// One-line, machine-parsable rendering of an error chain.
pub fn error_line(e: &anyhow::Error) -> String {
    let kind = e
        .chain()
        .find_map(|c| {
            c.downcast_ref::<levelchain::Error>().map(|e| e.kind()).or_else(|| {
                c.downcast_ref::<std::io::Error>()
                    .map(|io| if io.kind() == std::io::ErrorKind::NotFound { "not-found" } else { "io" })
            })
        })
        .unwrap_or("usage");
    let message = e.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ");
    format!("error[{kind}]: {}", message.replace('\n', " "))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Ingest(a) => ingest(a, &config),
        Command::TrainVae(a) => train_vae(a, config),
        Command::TrainForest(a) => train_forest(a, config),
        Command::Generate(a) => generate(a, &config),
        Command::EvalDiscontinuity(a) => eval_discontinuity(a, &config),
        Command::EvalBlend(a) => eval_blend(a, &config),
        Command::EvalProgression(a) => eval_progression(a, &config),
        Command::Render(a) => render(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn load_corpus(path: &Path) -> anyhow::Result<Corpus> {
    let text = String::from_utf8(read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Corpus::from_json(&text).with_context(|| format!("loading corpus {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ingest(a: IngestArgs, config: &RunConfig) -> anyhow::Result<()> {
    let stride = a.stride.unwrap_or(config.corpus.stride);
    let offset = a.offset.unwrap_or(config.corpus.offset);
    let load = |dir: &Path, prefix: &str| {
        corpus::load_dir(dir, prefix).with_context(|| format!("reading levels from {}", dir.display()))
    };
    let synth = |game: Game| -> Vec<LevelSource> { synthetic::sources(game, config.seed) };
    let corpus = if a.domain == Game::SmbKi {
        let (smb, ki) = if a.synthetic {
            (synth(Game::Smb), synth(Game::Ki))
        } else {
            let [smb, ki] = &a.input[..] else {
                bail!(levelchain::Error::Config("the smb-ki domain takes --input SMB_DIR --input KI_DIR".into()));
            };
            (load(smb, "smb/")?, load(ki, "ki/")?)
        };
        let vocab = TileVocabulary::builtin(Game::SmbKi);
        corpus::build_blend_corpus(
            &corpus::ingest(&smb, &vocab, stride, offset)?,
            &corpus::ingest(&ki, &vocab, stride, offset)?,
        )?
    } else {
        let sources = if a.synthetic {
            synth(a.domain)
        } else {
            let mut all = Vec::new();
            for dir in &a.input {
                all.extend(load(dir, "")?);
            }
            all
        };
        corpus::ingest(&sources, &TileVocabulary::builtin(a.domain), stride, offset)?
    };
    write(&a.out, corpus.to_json())?;
    println!(
        "{} levels, {} segments, {} pairs (stride {stride}, offset {offset}) -> {}",
        corpus.levels.len(),
        corpus.segments.len(),
        corpus.pairs.len(),
        a.out.display()
    );
    for level in corpus.levels.iter().filter(|l| !l.short_runs.is_empty()) {
        println!("note: {} has runs shorter than one window: {:?}", level.name, level.short_runs);
    }
    Ok(())
}

/// At most `max` pairs spread evenly over `pairs`, in order.
pub fn evenly_spaced(pairs: &[TrainingPair], max: usize) -> Vec<TrainingPair> {
    if max == 0 || max >= pairs.len() {
        return pairs.to_vec();
    }
    (0..max).map(|i| pairs[i * pairs.len() / max]).collect()
}

fn train_vae(a: TrainVaeArgs, mut config: RunConfig) -> anyhow::Result<()> {
    if let Some(p) = a.profile {
        config.vae.profile = p;
    }
    if a.hidden.is_some() {
        config.vae.hidden = a.hidden;
    }
    if let Some(b) = a.batch_size {
        config.vae.batch_size = b;
    }
    config.vae.epochs = a.epochs.or(config.vae.epochs);
    config.vae.max_pairs = a.max_pairs.or(config.vae.max_pairs);
    let corpus = load_corpus(&a.corpus)?;
    let pairs = evenly_spaced(&corpus.training_pairs(), config.vae.max_pairs.unwrap_or(0));
    let vae_config = config.vae_config();
    eprintln!(
        "training on {} pairs, hidden {:?}, {} epochs, seed {}",
        pairs.len(),
        vae_config.hidden,
        vae_config.epochs(),
        vae_config.seed
    );
    let log_every = a.log_every;
    let (mut model, report) = vae::train_vae_with(&pairs, &corpus.vocab, &vae_config, |r| {
        if log_every > 0 && (r.epoch + 1) % log_every == 0 {
            eprintln!("epoch {:>5}  recon {:.4}  kl {:.4}  lr {:.2e}  w {:.3}", r.epoch + 1, r.recon, r.kl, r.lr, r.kl_weight);
        }
    })?;
    model.manifest.corpus_digest = Some(corpus.digest());
    let bytes = archive::vae_to_bytes(&model);
    write(&a.out, &bytes)?;
    let report_path = with_suffix(&a.out, ".report.json");
    write(&report_path, serde_json::to_string_pretty(&report)?)?;
    let last = report.epochs.last().expect("at least one epoch");
    println!(
        "vae {} (recon {:.4}, kl {:.4} after {} epochs) -> {}",
        archive::archive_hash(&bytes),
        last.recon,
        last.kl,
        report.epochs.len(),
        a.out.display()
    );
    Ok(())
}

fn train_forest(a: TrainForestArgs, mut config: RunConfig) -> anyhow::Result<()> {
    if let Some(t) = a.trees {
        config.forest.trees = t;
    }
    config.forest.max_depth = a.max_depth.or(config.forest.max_depth);
    if a.no_oversample {
        config.forest.oversample = false;
    }
    if let Some(f) = a.test_fraction {
        config.forest.test_fraction = f;
    }
    let corpus = load_corpus(&a.corpus)?;
    let samples = corpus.labeled_segments();
    let forest_config = config.forest_config();
    let (train, test) = forest::stratified_split(&samples, config.forest.test_fraction, config.seed)?;
    let model = forest::train_forest(&train, &corpus.vocab, &forest_config)?;
    let bytes = archive::forest_to_bytes(&model);
    write(&a.out, &bytes)?;
    if model.degenerate {
        println!("note: training data held a single class; the forest always predicts it");
    }
    if !test.is_empty() {
        let report = forest::evaluate(&model, &test)?;
        print!("held-out evaluation ({} of {} segments)\n{}", test.len(), samples.len(), report.to_table());
        write(&with_suffix(&a.out, ".report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    println!("forest {} ({} trees) -> {}", archive::archive_hash(&bytes), model.trees.len(), a.out.display());
    Ok(())
}

/// Loaded models plus the hashes of the files they came from.
pub struct LoadedModels {
    pub vae: VaeModel,
    pub forest: ForestModel,
    pub vae_hash: String,
    pub forest_hash: String,
}

impl LoadedModels {
    pub fn load(args: &ModelArgs) -> anyhow::Result<LoadedModels> {
        let vae_bytes = read(&args.vae)?;
        let forest_bytes = read(&args.forest)?;
        let vae = archive::vae_from_bytes(&vae_bytes).with_context(|| format!("loading {}", args.vae.display()))?;
        let forest =
            archive::forest_from_bytes(&forest_bytes).with_context(|| format!("loading {}", args.forest.display()))?;
        vae.vocab.ensure_same(&forest.vocab)?;
        if let Some(d) = args.domain {
            if d != vae.vocab.game() {
                bail!(levelchain::Error::Vocabulary { expected: d.id().into(), found: vae.vocab.id().into() });
            }
        }
        Ok(LoadedModels {
            vae,
            forest,
            vae_hash: archive::archive_hash(&vae_bytes),
            forest_hash: archive::archive_hash(&forest_bytes),
        })
    }

    pub fn models(&self) -> Models<'_> {
        Models { vae: &self.vae, classifier: &self.forest, vocab: &self.vae.vocab }
    }

    fn provenance(&self, corpus_digest: Option<String>) -> Provenance {
        Provenance {
            vae_hash: Some(self.vae_hash.clone()),
            forest_hash: Some(self.forest_hash.clone()),
            corpus_digest: corpus_digest.or_else(|| self.vae.manifest.corpus_digest.clone()),
            notes: vec!["level seeds are successive ChaCha8 next_u64 draws from the master seed".into()],
        }
    }
}

/// Generates one level: segment 0 decodes a prior sample seeded by the first
/// sub-seed of `seed`; sequential mode then unrolls the model, independent
/// mode decodes a fresh prior sample per sub-seed.
pub fn generate_layout(models: Models, mode: Mode, segments: usize, seed: u64) -> levelchain::Result<LevelLayout> {
    if segments == 0 {
        return Err(levelchain::Error::Range("a level needs at least one segment".into()));
    }
    let seeds = generator::sub_seeds(seed, segments);
    match mode {
        Mode::Sequential => {
            let init = generator::prior_segment(models.vae, seeds[0])?;
            if segments == 1 {
                generator::place_segments(&[init], models.classifier)
            } else {
                generator::generate_level_with_dirs(models.vae, models.classifier, init, segments - 1)
            }
        }
        Mode::Independent => generator::place_segments(
            &generator::independent_segments_from(models.vae, &seeds)?,
            models.classifier,
        ),
    }
}

fn generate(a: GenerateArgs, config: &RunConfig) -> anyhow::Result<()> {
    let loaded = LoadedModels::load(&a.models)?;
    let game = loaded.vae.vocab.game();
    let segments = a.segments.or(config.experiment.segments).unwrap_or_else(|| game.segments_per_level());
    let layout = generate_layout(loaded.models(), a.mode, segments, config.seed)?;
    let mode = match a.mode {
        Mode::Sequential => "sequential",
        Mode::Independent => "independent",
    };
    let meta = BTreeMap::from([
        ("domain".to_string(), game.id().to_string()),
        ("forest".to_string(), loaded.forest_hash.clone()),
        ("mode".to_string(), mode.to_string()),
        ("seed".to_string(), config.seed.to_string()),
        ("seed-chain".to_string(), "chacha8-next-u64".to_string()),
        ("segments".to_string(), segments.to_string()),
        ("vae".to_string(), loaded.vae_hash.clone()),
    ]);
    write(&a.out, layout_io::write_layout(&layout, &loaded.vae.vocab, &meta))?;
    println!(
        "{} segments placed{} -> {}",
        layout.len(),
        if layout.truncated { " (truncated: no free neighbour)" } else { "" },
        a.out.display()
    );
    Ok(())
}

fn experiment_config(game: Game, a: &EvalArgs, config: &RunConfig) -> ExperimentConfig {
    ExperimentConfig {
        levels: a.levels.unwrap_or(config.experiment.levels),
        segments: a.segments.or(config.experiment.segments),
        seed: config.seed,
        progression_multiplier: a.multiplier.unwrap_or(config.experiment.progression_multiplier),
        ..ExperimentConfig::new(game)
    }
}

fn emit_report(out: Option<&Path>, table: &str, json: impl serde::Serialize) -> anyhow::Result<()> {
    print!("{table}");
    if let Some(path) = out {
        write(path, serde_json::to_string_pretty(&json)?)?;
    }
    Ok(())
}

fn eval_discontinuity(a: EvalArgs, config: &RunConfig) -> anyhow::Result<()> {
    let loaded = LoadedModels::load(&a.models)?;
    let exp = experiment_config(loaded.vae.vocab.game(), &a, config);
    let mut report = experiments::run_discontinuity_experiment(loaded.models(), &exp)?;
    report.provenance = loaded.provenance(None);
    emit_report(a.out.as_deref(), &report.to_table(), &report)
}

fn eval_blend(a: EvalBlendArgs, config: &RunConfig) -> anyhow::Result<()> {
    let loaded = LoadedModels::load(&a.eval.models)?;
    let corpus = load_corpus(&a.corpus)?;
    corpus.vocab.ensure_same(&loaded.vae.vocab)?;
    let exp = experiment_config(loaded.vae.vocab.game(), &a.eval, config);
    let endpoints = experiments::default_blend_endpoints(&corpus)?;
    let (smb, ki) = experiments::blend_populations(&corpus);
    let baselines: [(&str, &[levelchain::Segment]); 2] = [("SMB", &smb), ("KI", &ki)];
    let mut report = experiments::run_blend_experiment(loaded.models(), endpoints, &baselines, &exp)?;
    report.provenance = loaded.provenance(Some(corpus.digest()));
    report.provenance.notes.push("interpolation endpoints: first SMB and first KI corpus segment".into());
    emit_report(a.eval.out.as_deref(), &report.to_table(), &report)
}

fn eval_progression(a: EvalArgs, config: &RunConfig) -> anyhow::Result<()> {
    let loaded = LoadedModels::load(&a.models)?;
    let exp = experiment_config(loaded.vae.vocab.game(), &a, config);
    let mut report = experiments::run_progression_experiment(loaded.models(), &exp)?;
    report.provenance = loaded.provenance(None);
    emit_report(a.out.as_deref(), &report.to_table(), &report)
}

fn load_layout(path: &Path) -> anyhow::Result<layout_io::LayoutFile> {
    let text = String::from_utf8(read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))?;
    layout_io::parse_layout(&text).with_context(|| format!("parsing layout {}", path.display()))
}

fn render(a: RenderArgs) -> anyhow::Result<()> {
    let file = load_layout(&a.layout)?;
    let text = layout_io::render_text(&file.layout, &file.vocab);
    match &a.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = &a.ppm {
        write(path, layout_io::render_ppm(&file.layout, &file.vocab, a.scale))?;
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> anyhow::Result<()> {
    let bytes = read(&a.file)?;
    if bytes.starts_with(archive::MAGIC) {
        let raw = archive::read_raw(&bytes).with_context(|| format!("reading {}", a.file.display()))?;
        println!("model archive version {}, kind {:?}", raw.version, raw.kind);
        println!("payload {} bytes, sha256 {}", raw.payload.len(), raw.checksum);
        match archive::model_from_bytes(&bytes)? {
            Model::Vae(m) => {
                let widths = |net: &levelchain::nn::DenseNet<f32>| {
                    let mut w = vec![net.input_size()];
                    w.extend(net.layers().iter().map(|l| l.outputs()));
                    w
                };
                println!(
                    "encoder {:?}, decoder {:?}, {} parameters",
                    widths(&m.encoder),
                    widths(&m.decoder),
                    m.encoder.param_count() + m.decoder.param_count()
                );
            }
            Model::Forest(f) => println!(
                "{} trees, max depth {}, class counts {:?}{}",
                f.trees.len(),
                f.trees.iter().map(|t| t.depth()).max().unwrap_or(0),
                f.class_counts,
                if f.degenerate { " (degenerate)" } else { "" }
            ),
        }
        println!("manifest:\n{}", serde_json::to_string_pretty(&raw.manifest)?);
        return Ok(());
    }
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not a known file type", a.file.display()))?;
    if text.starts_with(layout_io::LAYOUT_HEADER) {
        let file = load_layout(&a.file)?;
        println!("layout ({}), {} placements, truncated {}", file.vocab.id(), file.layout.len(), file.layout.truncated);
        if let Some((x0, y0, x1, y1)) = file.layout.bounds() {
            println!("cells x {x0}..={x1}, y {y0}..={y1}");
        }
        for (k, v) in &file.meta {
            println!("{k}: {v}");
        }
        return Ok(());
    }
    let corpus = Corpus::from_json(&text).with_context(|| format!("{} is not a known file type", a.file.display()))?;
    println!(
        "corpus ({}), stride {}, offset {}: {} levels, {} segments, {} pairs",
        corpus.vocab.id(),
        corpus.stride,
        corpus.offset,
        corpus.levels.len(),
        corpus.segments.len(),
        corpus.pairs.len()
    );
    let mut counts = [0usize; 4];
    for p in &corpus.pairs {
        counts[p.direction.index()] += 1;
    }
    let labels: Vec<String> = Direction::ALL.iter().map(|d| format!("{} {}", d.name(), counts[d.index()])).collect();
    println!("directions: {}", labels.join(", "));
    println!("digest {}", corpus.digest());
    for l in &corpus.levels {
        println!("  {:<24} {:>4}x{:<5} segments {:>5} pairs {:>5}", l.name, l.height, l.width, l.segments, l.pairs);
    }
    Ok(())
}
