//! Property suites: placement invariants, encodings, the rank-sum test, and
//! archive round trips, each against an independent oracle.

use std::collections::HashSet;
use std::sync::Mutex;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use levelchain::archive;
use levelchain::corpus::{self, argmax_decode, one_hot, synthetic, Game, Segment, TileVocabulary, SEGMENT_SIZE};
use levelchain::forest::{train_forest, DirectionClassifier, ForestConfig};
use levelchain::generator::place_segments;
use levelchain::metrics::{discontinuity, rank_sum_exact, wilcoxon_rank_sum, EXACT_LIMIT};
use levelchain::vae::{VaeConfig, VaeModel};
use levelchain::{Direction, Result};

/// Classifier that answers with fresh random probabilities on every call,
/// sometimes with hard one-hot votes and exact ties.
struct Adversary(Mutex<ChaCha8Rng>);

impl DirectionClassifier for Adversary {
    fn predict_proba(&self, _segment: &Segment) -> Result<[f64; 4]> {
        let mut rng = self.0.lock().unwrap();
        let mut p = match rng.random_range(0..3) {
            0 => [0.0; 4].map(|_: f64| rng.random::<f64>()),
            1 => {
                let mut p = [0.0; 4];
                p[rng.random_range(0..4)] = 1.0;
                p
            }
            _ => [0.25; 4],
        };
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        Ok(p)
    }
}

fn neighbours((x, y): (i32, i32)) -> [(i32, i32); 4] {
    [(x, y + 1), (x, y - 1), (x - 1, y), (x + 1, y)]
}

#[test]
fn placement_never_overwrites_under_adversarial_classifiers() {
    let vocab = TileVocabulary::builtin(Game::Smb);
    let (mut truncated, mut full) = (0, 0);
    for trial in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let n = rng.random_range(1..=60);
        let segments: Vec<Segment> =
            (0..n).map(|_| Segment::filled(rng.random_range(0..vocab.len() as u8))).collect();
        let adversary = Adversary(Mutex::new(ChaCha8Rng::seed_from_u64(trial ^ 0xadd)));
        let layout = place_segments(&segments, &adversary).unwrap();
        layout.validate().unwrap();

        let cells: HashSet<_> = layout.placements.iter().map(|p| p.cell).collect();
        assert_eq!(cells.len(), layout.len(), "trial {trial}: overwritten cell");
        for (k, p) in layout.placements.iter().enumerate().skip(1) {
            let prev = layout.placements[k - 1].cell;
            assert!(neighbours(prev).contains(&p.cell), "trial {trial}: placement {k} not adjacent");
            assert_eq!(p.segment, segments[k]);
        }
        if layout.truncated {
            truncated += 1;
            assert!(layout.len() < n);
            let last = layout.placements.last().unwrap().cell;
            assert!(neighbours(last).iter().all(|c| cells.contains(c)), "trial {trial}: stopped with a free neighbour");
        } else {
            full += 1;
            assert_eq!(layout.len(), n);
        }
    }
    // Both outcomes must actually be exercised.
    assert!(truncated > 0 && full > 0, "truncated {truncated}, full {full}");
}

#[test]
fn one_hot_round_trips_every_corpus_segment() {
    for game in [Game::Smb, Game::Ki, Game::Mm, Game::SmbKi] {
        let vocab = TileVocabulary::builtin(game);
        let corpus = corpus::ingest(&synthetic::sources(game, 3), &vocab, 1, 16).unwrap();
        assert!(!corpus.segments.is_empty());
        for s in &corpus.segments {
            let v = one_hot(s, &vocab);
            assert_eq!(v.len(), vocab.len() * SEGMENT_SIZE * SEGMENT_SIZE);
            assert_eq!(v.iter().sum::<f32>(), (SEGMENT_SIZE * SEGMENT_SIZE) as f32);
            assert_eq!(argmax_decode(&v, vocab.len()).unwrap(), *s);
        }
    }
}

/// Two-sided Mann-Whitney p-value by enumerating every split of the pooled
/// values and counting pairwise wins (ties count one half).
fn mann_whitney_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let n = pooled.len();
    let u = |mask: u32| -> f64 {
        let mut sum = 0.0;
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|j| mask >> j & 1 == 0) {
                sum += match pooled[i].partial_cmp(&pooled[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
        sum
    };
    let centre = (xs.len() * ys.len()) as f64 / 2.0;
    let observed = (u((1u32 << xs.len()) - 1) - centre).abs();
    let (mut hits, mut total) = (0u32, 0u32);
    for mask in (0u32..1 << n).filter(|m| m.count_ones() as usize == xs.len()) {
        total += 1;
        if (u(mask) - centre).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_rank_sum_agrees_with_mann_whitney_enumeration(
        xs in prop::collection::vec(0u8..6, 1..=6),
        ys in prop::collection::vec(0u8..6, 1..=6),
    ) {
        let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
        let ys: Vec<f64> = ys.into_iter().map(f64::from).collect();
        prop_assume!(xs.len() + ys.len() <= EXACT_LIMIT);
        let oracle = mann_whitney_oracle(&xs, &ys);
        let exact = rank_sum_exact(&xs, &ys).unwrap();
        prop_assert!((exact.p_value - oracle).abs() <= 1e-12, "exact {} oracle {}", exact.p_value, oracle);
        let dispatched = wilcoxon_rank_sum(&xs, &ys).unwrap();
        prop_assert!(dispatched.exact);
        prop_assert_eq!(dispatched, exact);
    }

    #[test]
    fn rank_sum_p_values_are_probabilities(
        xs in prop::collection::vec(-50.0f64..50.0, 1..40),
        ys in prop::collection::vec(-50.0f64..50.0, 1..40),
    ) {
        let r = wilcoxon_rank_sum(&xs, &ys).unwrap();
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        let swapped = wilcoxon_rank_sum(&ys, &xs).unwrap();
        prop_assert!((r.p_value - swapped.p_value).abs() < 1e-12);
    }
}

/// Naive discontinuity: scan both facing edges directly.
fn discontinuity_oracle(a: &Segment, b: &Segment, d: Direction, vocab: &TileVocabulary) -> f64 {
    let last = SEGMENT_SIZE - 1;
    let edge = |s: &Segment, side: Direction| -> Vec<usize> {
        (0..SEGMENT_SIZE)
            .filter(|&i| {
                let (r, c) = match side {
                    Direction::Up => (0, i),
                    Direction::Down => (last, i),
                    Direction::Left => (i, 0),
                    Direction::Right => (i, last),
                };
                s.get(r, c) == vocab.path()
            })
            .collect()
    };
    let (ea, eb) = (edge(a, d), edge(b, d.opposite()));
    let mut best = 16usize;
    for &i in &ea {
        for &j in &eb {
            best = best.min(i.abs_diff(j));
        }
    }
    best as f64
}

fn path_sprinkled(rng: &mut ChaCha8Rng, vocab: &TileVocabulary) -> Segment {
    let mut s = Segment::filled(vocab.background());
    for _ in 0..rng.random_range(0..12) {
        s.set(rng.random_range(0..SEGMENT_SIZE), rng.random_range(0..SEGMENT_SIZE), vocab.path());
    }
    s
}

#[test]
fn discontinuity_matches_edge_scan_and_symmetries() {
    let vocab = TileVocabulary::builtin(Game::Smb);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let flip = |d: Direction| match d {
        Direction::Left => Direction::Right,
        Direction::Right => Direction::Left,
        other => other,
    };
    for _ in 0..2000 {
        let (a, b) = (path_sprinkled(&mut rng, &vocab), path_sprinkled(&mut rng, &vocab));
        let d = Direction::ALL[rng.random_range(0..4)];
        let v = discontinuity(&a, &b, d, &vocab);
        assert_eq!(v, discontinuity_oracle(&a, &b, d, &vocab));
        assert_eq!(v, discontinuity(&b, &a, d.opposite(), &vocab));
        assert_eq!(v, discontinuity(&a.mirrored(), &b.mirrored(), flip(d), &vocab));
    }
}

fn random_segment(rng: &mut ChaCha8Rng, vocab: &TileVocabulary) -> Segment {
    let mut s = Segment::filled(vocab.background());
    for r in 0..SEGMENT_SIZE {
        for c in 0..SEGMENT_SIZE {
            s.set(r, c, rng.random_range(0..vocab.len() as u8));
        }
    }
    s
}

#[test]
fn vae_archive_round_trip_is_bit_exact() {
    let vocab = TileVocabulary::builtin(Game::Ki);
    let config = VaeConfig { hidden: vec![32, 16], seed: 9, ..VaeConfig::desk() };
    let model = VaeModel::init(&vocab, &config).unwrap();
    let bytes = archive::vae_to_bytes(&model);
    let back = archive::vae_from_bytes(&bytes).unwrap();
    assert_eq!(archive::vae_to_bytes(&back), bytes);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let s = random_segment(&mut rng, &vocab);
        let (z, z2) = (model.encode(&s).unwrap(), back.encode(&s).unwrap());
        assert_eq!(z.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), z2.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let (p, p2) = (model.decode_probs(&z).unwrap(), back.decode_probs(&z).unwrap());
        assert_eq!(p.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), p2.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn forest_archive_round_trip_is_bit_exact() {
    let vocab = TileVocabulary::builtin(Game::SmbKi);
    let corpus = corpus::ingest(&synthetic::sources(Game::SmbKi, 2), &vocab, 4, 16).unwrap();
    let forest = train_forest(&corpus.labeled_segments(), &vocab, &ForestConfig { n_trees: 15, ..Default::default() }).unwrap();
    let bytes = archive::forest_to_bytes(&forest);
    let back = archive::forest_from_bytes(&bytes).unwrap();
    assert_eq!(back, forest);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for s in corpus.segments.iter().take(50).copied().chain((0..50).map(|_| random_segment(&mut rng, &vocab))) {
        let (p, q) = (forest.predict_proba(&s).unwrap(), back.predict_proba(&s).unwrap());
        assert_eq!(p.map(f64::to_bits), q.map(f64::to_bits));
    }
}
