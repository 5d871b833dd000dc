//! End-to-end evaluations: sequential vs. independent discontinuity, the
//! blending study, and the long-level progression study.
//!
//! Every level gets its own seed from the experiment seed, levels generate
//! in parallel, and results are gathered in level order, so a report is a
//! pure function of its configuration and models.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Game, Segment, TileVocabulary};
use crate::direction::Direction;
use crate::error::{Error, Result};
use crate::forest::{choose_direction, DirectionClassifier};
use crate::generator::{
    generate_level_with_dirs, independent_segments_from, place_segments, prior_segment, sub_seeds, LevelLayout,
    SegmentModel,
};
use crate::metrics::{
    group_metrics, level_discontinuity, tile_metrics, wilcoxon_rank_sum, MetricVector, RankSumTest, Summary,
    METRIC_NAMES,
};
use crate::vae::interpolate;

/// Initial-segment choice for one blend set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlendSet {
    /// Decoded prior sample.
    Random,
    /// Decoded interpolation `z_KI + (pct / 100) (z_SMB - z_KI)`.
    Smb(u8),
}

impl BlendSet {
    pub const ALL: [BlendSet; 6] =
        [BlendSet::Random, BlendSet::Smb(0), BlendSet::Smb(25), BlendSet::Smb(50), BlendSet::Smb(75), BlendSet::Smb(100)];

    pub fn label(self) -> String {
        match self {
            BlendSet::Random => "Random".into(),
            BlendSet::Smb(p) => format!("SMB-{p}"),
        }
    }
}

impl fmt::Display for BlendSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for BlendSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<BlendSet> {
        if s.eq_ignore_ascii_case("random") {
            return Ok(BlendSet::Random);
        }
        let pct = s
            .strip_prefix("SMB-")
            .or_else(|| s.strip_prefix("smb-"))
            .and_then(|p| p.parse::<u8>().ok())
            .filter(|&p| p <= 100)
            .ok_or_else(|| Error::Config(format!("unknown blend set {s:?}")))?;
        Ok(BlendSet::Smb(pct))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: Game,
    pub levels: usize,
    /// Segments per level; defaults to the domain's typical level length.
    pub segments: Option<usize>,
    pub seed: u64,
    pub blend_sets: Vec<BlendSet>,
    /// Progression levels are this many times the usual length.
    pub progression_multiplier: usize,
}

impl ExperimentConfig {
    pub fn new(domain: Game) -> ExperimentConfig {
        ExperimentConfig {
            domain,
            levels: 100,
            segments: None,
            seed: 0,
            blend_sets: BlendSet::ALL.to_vec(),
            progression_multiplier: 10,
        }
    }

    pub fn segments_per_level(&self) -> usize {
        self.segments.unwrap_or_else(|| self.domain.segments_per_level())
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.segments_per_level() == 0 || self.progression_multiplier == 0 {
            return Err(Error::Config("level count, segments per level, and multiplier must be positive".into()));
        }
        Ok(())
    }

    fn level_seeds(&self) -> Vec<u64> {
        sub_seeds(self.seed, self.levels)
    }
}

/// Hashes and settings that identify where a report came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub vae_hash: Option<String>,
    pub forest_hash: Option<String>,
    pub corpus_digest: Option<String>,
    pub notes: Vec<String>,
}

/// Borrowed models for one domain.
#[derive(Clone, Copy)]
pub struct Models<'a> {
    pub vae: &'a dyn SegmentModel,
    pub classifier: &'a dyn DirectionClassifier,
    pub vocab: &'a TileVocabulary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPair {
    pub level: usize,
    pub seed: u64,
    pub sequential: Option<f64>,
    pub independent: Option<f64>,
    pub sequential_truncated: bool,
    pub independent_truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityReport {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub levels: Vec<LevelPair>,
    /// Levels where either condition truncated; excluded from the statistics.
    pub excluded: usize,
    pub sequential: Summary,
    pub independent: Summary,
    pub test: Option<RankSumTest>,
}

impl DiscontinuityReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "discontinuity ({}, {} levels x {} segments, seed {})\n",
            self.config.domain.id(),
            self.config.levels,
            self.config.segments_per_level(),
            self.config.seed
        );
        let _ = writeln!(out, "condition    mean ± sd      n");
        let _ = writeln!(out, "sequential   {:<13}  {}", self.sequential.to_string(), self.sequential.n);
        let _ = writeln!(out, "independent  {:<13}  {}", self.independent.to_string(), self.independent.n);
        match &self.test {
            Some(t) => {
                let _ = writeln!(
                    out,
                    "wilcoxon rank-sum W = {:.1}, two-sided p = {:.3e}{}",
                    t.statistic,
                    t.p_value,
                    if t.exact { " (exact)" } else { "" }
                );
            }
            None => out.push_str("wilcoxon rank-sum: not enough levels\n"),
        }
        let _ = writeln!(out, "excluded (truncated) levels: {}", self.excluded);
        out
    }
}

/// Paired comparison: level `i` starts both conditions from the same decoded
/// prior sample, then either unrolls the model or decodes fresh samples.
pub fn run_discontinuity_experiment(models: Models, config: &ExperimentConfig) -> Result<DiscontinuityReport> {
    config.validate()?;
    let n = config.segments_per_level();
    let levels = config
        .level_seeds()
        .into_par_iter()
        .enumerate()
        .map(|(level, seed)| {
            let seeds = sub_seeds(seed, n);
            let init = prior_segment(models.vae, seeds[0])?;
            let seq = if n > 1 {
                generate_level_with_dirs(models.vae, models.classifier, init, n - 1)?
            } else {
                place_segments(&[init], models.classifier)?
            };
            let ind = place_segments(&independent_segments_from(models.vae, &seeds)?, models.classifier)?;
            Ok(LevelPair {
                level,
                seed,
                sequential: level_discontinuity(&seq, models.vocab),
                independent: level_discontinuity(&ind, models.vocab),
                sequential_truncated: seq.truncated,
                independent_truncated: ind.truncated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<&LevelPair> = levels
        .iter()
        .filter(|l| !l.sequential_truncated && !l.independent_truncated && l.sequential.is_some() && l.independent.is_some())
        .collect();
    let seq: Vec<f64> = kept.iter().filter_map(|l| l.sequential).collect();
    let ind: Vec<f64> = kept.iter().filter_map(|l| l.independent).collect();
    let test = if seq.is_empty() { None } else { Some(wilcoxon_rank_sum(&seq, &ind)?) };
    Ok(DiscontinuityReport {
        config: config.clone(),
        provenance: Provenance::default(),
        excluded: levels.len() - kept.len(),
        sequential: Summary::of(&seq),
        independent: Summary::of(&ind),
        test,
        levels,
    })
}

/// Share of segments the classifier labels with each direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionShares {
    pub segments: usize,
    /// Percentages indexed by [`Direction::index`].
    pub percent: [f64; 4],
}

impl DirectionShares {
    pub fn right(&self) -> f64 {
        self.percent[Direction::Right.index()]
    }

    pub fn up(&self) -> f64 {
        self.percent[Direction::Up.index()]
    }

    /// Left and Down together.
    pub fn other(&self) -> f64 {
        self.percent[Direction::Left.index()] + self.percent[Direction::Down.index()]
    }
}

/// Unconstrained arg-max labels of `segments`, as percentages.
pub fn direction_shares(classifier: &dyn DirectionClassifier, segments: &[Segment]) -> Result<DirectionShares> {
    let mut counts = [0usize; 4];
    for s in segments {
        let d = choose_direction(&classifier.predict_proba(s)?, None, &[]).expect("no direction excluded");
        counts[d.index()] += 1;
    }
    let n = segments.len().max(1) as f64;
    Ok(DirectionShares { segments: segments.len(), percent: counts.map(|c| 100.0 * c as f64 / n) })
}

/// Summaries of the five tile metrics over a population of segments.
pub fn population_metrics(segments: &[Segment], vocab: &TileVocabulary) -> [Summary; 5] {
    let rows: Vec<[f64; 5]> = segments.iter().map(|s| tile_metrics(s, vocab)).collect();
    std::array::from_fn(|k| Summary::of(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendSetReport {
    pub set: BlendSet,
    pub levels: usize,
    pub truncated: usize,
    pub metrics: [Summary; 5],
    pub directions: DirectionShares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlendReport {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub sets: Vec<BlendSetReport>,
    /// Tile metrics of the original games' corpus segments, when supplied.
    pub baselines: Vec<(String, [Summary; 5])>,
}

impl BlendReport {
    pub fn set(&self, set: BlendSet) -> Option<&BlendSetReport> {
        self.sets.iter().find(|s| s.set == set)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("direction proportions (% of segments)\nset      right(SMB)  up(KI)  other\n");
        for s in &self.sets {
            let d = &s.directions;
            let _ = writeln!(out, "{:<8} {:>10.1}  {:>6.1}  {:>5.1}", s.set.label(), d.right(), d.up(), d.other());
        }
        out.push_str("\ntile metrics (mean ± sd)\nset     ");
        for name in &METRIC_NAMES[..5] {
            let _ = write!(out, " {name:>15}");
        }
        out.push('\n');
        let rows = self.sets.iter().map(|s| (s.set.label(), &s.metrics)).chain(self.baselines.iter().map(|(n, m)| (n.clone(), m)));
        for (label, m) in rows {
            let _ = write!(out, "{label:<8}");
            for s in m {
                let _ = write!(out, " {:>15}", s.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Splits a blended corpus into its SMB and KI segments. Levels whose name
/// starts with `ki` are KI levels; the duplicated KI copy is skipped.
pub fn blend_populations(corpus: &Corpus) -> (Vec<Segment>, Vec<Segment>) {
    let (mut smb, mut ki) = (Vec::new(), Vec::new());
    let mut seen_ki = std::collections::HashSet::new();
    let mut at = 0;
    for level in &corpus.levels {
        let segs = &corpus.segments[at..at + level.segments];
        at += level.segments;
        if level.name.starts_with("ki") {
            if seen_ki.insert(level.name.clone()) {
                ki.extend_from_slice(segs);
            }
        } else {
            smb.extend_from_slice(segs);
        }
    }
    (smb, ki)
}

/// Default interpolation endpoints: the first segment of the first SMB
/// level and of the first KI level.
pub fn default_blend_endpoints(corpus: &Corpus) -> Result<(Segment, Segment)> {
    let (smb, ki) = blend_populations(corpus);
    match (smb.first(), ki.first()) {
        (Some(a), Some(b)) => Ok((*a, *b)),
        _ => Err(Error::EmptyCorpus("blend corpus needs both SMB and KI levels".into())),
    }
}

/// Blending study on a blended-domain model. `endpoints` are an SMB and a KI
/// segment in the blended vocabulary; `baselines` optionally name corpus
/// segment populations to report alongside.
pub fn run_blend_experiment(
    models: Models,
    endpoints: (Segment, Segment),
    baselines: &[(&str, &[Segment])],
    config: &ExperimentConfig,
) -> Result<BlendReport> {
    config.validate()?;
    if config.domain != Game::SmbKi {
        return Err(Error::Config(format!("blend sets need the smb-ki domain, not {}", config.domain.id())));
    }
    let n = config.segments_per_level();
    let z_smb = models.vae.encode(&endpoints.0)?;
    let z_ki = models.vae.encode(&endpoints.1)?;
    let seeds = config.level_seeds();
    let mut sets = Vec::with_capacity(config.blend_sets.len());
    for &set in &config.blend_sets {
        let layouts = seeds
            .par_iter()
            .map(|&seed| {
                let init = match set {
                    BlendSet::Random => prior_segment(models.vae, sub_seeds(seed, 1)[0])?,
                    BlendSet::Smb(p) => models.vae.decode(&interpolate(&z_ki, &z_smb, p as f64 / 100.0)?)?,
                };
                if n > 1 {
                    generate_level_with_dirs(models.vae, models.classifier, init, n - 1)
                } else {
                    place_segments(&[init], models.classifier)
                }
            })
            .collect::<Result<Vec<LevelLayout>>>()?;
        let segments: Vec<Segment> = layouts.iter().flat_map(|l| l.segments()).collect();
        sets.push(BlendSetReport {
            set,
            levels: layouts.len(),
            truncated: layouts.iter().filter(|l| l.truncated).count(),
            metrics: population_metrics(&segments, models.vocab),
            directions: direction_shares(models.classifier, &segments)?,
        });
    }
    Ok(BlendReport {
        config: config.clone(),
        provenance: Provenance::default(),
        sets,
        baselines: baselines.iter().map(|(name, segs)| (name.to_string(), population_metrics(segs, models.vocab))).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressionReport {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub group_size: usize,
    pub groups: usize,
    /// Levels that could not be placed in full and were left out.
    pub excluded: usize,
    /// `per_level[level][group]`, for the levels kept.
    pub per_level: Vec<Vec<MetricVector>>,
    /// Mean over kept levels for each group.
    pub group_means: Vec<MetricVector>,
}

impl ProgressionReport {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "progression ({}, {} groups of {} segments, {} levels kept, {} excluded)\ngroup",
            self.config.domain.id(),
            self.groups,
            self.group_size,
            self.per_level.len(),
            self.excluded
        );
        for name in METRIC_NAMES {
            let _ = write!(out, " {name:>15}");
        }
        out.push('\n');
        for (g, m) in self.group_means.iter().enumerate() {
            let _ = write!(out, "{:<5}", g + 1);
            for v in m.to_array() {
                let _ = write!(out, " {v:>15.4}");
            }
            out.push('\n');
        }
        out
    }

    /// `(group, mean)` series per metric for external plotting.
    pub fn plot_series(&self) -> Vec<(&'static str, Vec<(usize, f64)>)> {
        METRIC_NAMES
            .iter()
            .enumerate()
            .map(|(k, &name)| (name, self.group_means.iter().enumerate().map(|(g, m)| (g + 1, m.to_array()[k])).collect()))
            .collect()
    }
}

/// Generates levels `multiplier` times the usual length and averages the
/// six metrics over each consecutive block of the usual length.
pub fn run_progression_experiment(models: Models, config: &ExperimentConfig) -> Result<ProgressionReport> {
    config.validate()?;
    let group_size = config.segments_per_level();
    let groups = config.progression_multiplier;
    let total = group_size * groups;
    let layouts = config
        .level_seeds()
        .into_par_iter()
        .map(|seed| {
            let init = prior_segment(models.vae, sub_seeds(seed, 1)[0])?;
            if total > 1 {
                generate_level_with_dirs(models.vae, models.classifier, init, total - 1)
            } else {
                place_segments(&[init], models.classifier)
            }
        })
        .collect::<Result<Vec<LevelLayout>>>()?;
    let per_level: Vec<Vec<MetricVector>> = layouts
        .iter()
        .filter(|l| !l.truncated && l.len() == total)
        .map(|l| (0..groups).map(|g| group_metrics(l, g * group_size..(g + 1) * group_size, models.vocab)).collect())
        .collect();
    let group_means = (0..groups)
        .map(|g| {
            let mut acc = [0.0f64; 6];
            for level in &per_level {
                for (a, v) in acc.iter_mut().zip(level[g].to_array()) {
                    *a += v;
                }
            }
            let n = per_level.len().max(1) as f64;
            MetricVector::from_array(acc.map(|a| if per_level.is_empty() { f64::NAN } else { a / n }))
        })
        .collect();
    Ok(ProgressionReport {
        config: config.clone(),
        provenance: Provenance::default(),
        group_size,
        groups,
        excluded: layouts.len() - per_level.len(),
        per_level,
        group_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Decodes every latent to the same segment.
    struct Constant(Segment);

    impl SegmentModel for Constant {
        fn encode(&self, _: &Segment) -> Result<Vec<f32>> {
            Ok(vec![0.0; 2])
        }
        fn decode(&self, _: &[f32]) -> Result<Segment> {
            Ok(self.0)
        }
        fn latent_dim(&self) -> usize {
            2
        }
    }

    /// Sequential unrolls give path-aligned segments (path at the
    /// encoded row); prior samples put the path at a pseudo-random row.
    struct Aligned {
        path: u8,
        bg: u8,
    }

    impl Aligned {
        fn with_path_row(&self, row: usize) -> Segment {
            let mut s = Segment::filled(self.bg);
            for c in 0..16 {
                s.set(row, c, self.path);
            }
            s
        }
    }

    impl SegmentModel for Aligned {
        fn encode(&self, s: &Segment) -> Result<Vec<f32>> {
            let row = (0..16).find(|&r| s.get(r, 0) == self.path).unwrap_or(0);
            Ok(vec![100.0 + row as f32])
        }
        fn decode(&self, z: &[f32]) -> Result<Segment> {
            let row = if z[0] >= 100.0 { (z[0] - 100.0) as usize } else { ((z[0].abs() * 1000.0) as usize) % 16 };
            Ok(self.with_path_row(row))
        }
        fn latent_dim(&self) -> usize {
            1
        }
    }

    struct Right;

    impl DirectionClassifier for Right {
        fn predict_proba(&self, _: &Segment) -> Result<[f64; 4]> {
            Ok([0.0, 0.0, 0.0, 1.0])
        }
    }

    fn smb() -> TileVocabulary {
        TileVocabulary::builtin(Game::Smb)
    }

    fn config(levels: usize) -> ExperimentConfig {
        ExperimentConfig { levels, seed: 11, ..ExperimentConfig::new(Game::Smb) }
    }

    #[test]
    fn identical_streams_are_a_null_result() {
        let vocab = smb();
        let mut seg = Segment::filled(vocab.background());
        seg.set(4, 15, vocab.path());
        seg.set(9, 0, vocab.path());
        let models = Models { vae: &Constant(seg), classifier: &Right, vocab: &vocab };
        let report = run_discontinuity_experiment(models, &config(20)).unwrap();
        assert_eq!(report.sequential, report.independent);
        assert_eq!(report.test.unwrap().p_value, 1.0);
        assert_eq!(report.sequential.mean, 5.0);
    }

    #[test]
    fn aligned_stub_has_zero_sequential_discontinuity() {
        let vocab = smb();
        let vae = Aligned { path: vocab.path(), bg: vocab.background() };
        let models = Models { vae: &vae, classifier: &Right, vocab: &vocab };
        let report = run_discontinuity_experiment(models, &config(30)).unwrap();
        assert_eq!(report.sequential.mean, 0.0);
        assert!(report.independent.mean > 1.0);
        assert!(report.test.unwrap().p_value < 1e-6);
        assert_eq!(report, run_discontinuity_experiment(models, &config(30)).unwrap());
    }

    #[test]
    fn progression_groups_and_constant_null() {
        let vocab = smb();
        let mut seg = Segment::filled(vocab.background());
        seg.set(15, 3, vocab.index_of('X').unwrap());
        let models = Models { vae: &Constant(seg), classifier: &Right, vocab: &vocab };
        let report = run_progression_experiment(models, &config(5)).unwrap();
        assert_eq!(report.groups, 10);
        assert_eq!(report.group_size, 12);
        assert_eq!(report.per_level.len(), 5);
        assert!(report.per_level.iter().all(|l| l.len() == 10));
        assert!(report.group_means.iter().all(|m| *m == report.group_means[0]));
        assert!(report.group_means[0].to_array().iter().all(|v| v.is_finite()));

        let mm = ExperimentConfig { levels: 2, ..ExperimentConfig::new(Game::Mm) };
        let mm_vocab = TileVocabulary::builtin(Game::Mm);
        let models = Models { vae: &Constant(Segment::filled(0)), classifier: &Right, vocab: &mm_vocab };
        assert_eq!(run_progression_experiment(models, &mm).unwrap().group_size, 16);
    }

    #[test]
    fn blend_sets_and_table_shape() {
        let vocab = TileVocabulary::builtin(Game::SmbKi);
        let models = Models { vae: &Constant(Segment::filled(0)), classifier: &Right, vocab: &vocab };
        let cfg = ExperimentConfig { levels: 3, ..ExperimentConfig::new(Game::SmbKi) };
        let seg = Segment::filled(0);
        let report = run_blend_experiment(models, (seg, seg), &[("SMB", &[seg])], &cfg).unwrap();
        assert_eq!(report.sets.len(), 6);
        assert_eq!(report.sets[1].set.label(), "SMB-0");
        assert_eq!(report.sets[5].set.label(), "SMB-100");
        for s in &report.sets {
            assert_eq!(s.directions.segments, 36);
            assert!(s.directions.right() + s.directions.up() <= 100.0);
            assert_eq!(s.directions.right(), 100.0);
        }
        assert_eq!(report.baselines.len(), 1);
        assert!(run_blend_experiment(models, (seg, seg), &[], &config(3)).is_err());
    }

    #[test]
    fn blend_set_labels_parse() {
        for s in BlendSet::ALL {
            assert_eq!(s.label().parse::<BlendSet>().unwrap(), s);
        }
        assert!("SMB-101".parse::<BlendSet>().is_err());
    }
}
