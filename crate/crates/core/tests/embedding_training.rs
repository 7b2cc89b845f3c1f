mod oracles;

use std::collections::{BTreeSet, HashMap};

use pqe_core::embed::{self, build_training_stream, EmbedError, EmbeddingModel, TrainingMode, TrainingSource};
use pqe_core::synth::{SynthConfig, SyntheticDataset};
use pqe_core::TrainingConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> TrainingConfig {
    TrainingConfig {
        dim: 24,
        window: 4,
        negative: 8,
        epochs: 5,
        min_count: 1,
        subsample_t: 0.0,
        ..TrainingConfig::default()
    }
}

/// 10k sentences from ten topics, each with its own pool of context words
/// and its own pair of centre words. "alpha" and "beta" are the pair of
/// topic 0: they fill the same slot between the same context words.
#[test]
fn tokens_sharing_windows_are_neighbors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut stream = Vec::new();
    for _ in 0..10_000 {
        let topic = rng.gen_range(0..10);
        let first = rng.gen_bool(0.5);
        let centre = match (topic, first) {
            (0, true) => "alpha".to_string(),
            (0, false) => "beta".to_string(),
            (t, f) => format!("p{t}{}", if f { "a" } else { "b" }),
        };
        let mut sentence: Vec<String> = (0..6).map(|_| format!("c{topic}_{}", rng.gen_range(0..30))).collect();
        sentence.insert(3, centre);
        stream.extend(sentence);
    }
    let cfg = TrainingConfig {
        window: 3,
        epochs: 3,
        ..small_config()
    };
    let model = embed::train(&stream, &cfg, TrainingMode::Strict).unwrap();
    let top: Vec<String> = model
        .nearest_neighbors("alpha", 3, &BTreeSet::new())
        .into_iter()
        .map(|n| n.term)
        .collect();
    assert!(top.contains(&"beta".to_string()), "{top:?}");
}

#[test]
fn early_epoch_losses_do_not_increase() {
    let ds = SyntheticDataset::generate(&SynthConfig::default());
    let store = ds.store();
    let stream = build_training_stream(TrainingSource::Global(&store));
    let model = embed::train(&stream, &small_config(), TrainingMode::Strict).unwrap();
    let losses = &model.report.epoch_losses;
    assert_eq!(losses.len(), 5);
    for w in losses[..3].windows(2) {
        assert!(w[1] <= w[0] * 1.01, "{losses:?}");
    }
    assert!(model.all_finite());
}

#[test]
fn training_is_reproducible_and_seed_sensitive() {
    let ds = SyntheticDataset::generate(&SynthConfig::default());
    let store = ds.store();
    let stream = build_training_stream(TrainingSource::Global(&store));
    let cfg = TrainingConfig {
        epochs: 2,
        ..small_config()
    };
    let a = embed::train(&stream, &cfg, TrainingMode::Strict).unwrap();
    let b = embed::train(&stream, &cfg, TrainingMode::Strict).unwrap();
    assert_eq!(embed::encode_model(&a), embed::encode_model(&b));
    let c = embed::train(&stream, &TrainingConfig { seed: 2, ..cfg }, TrainingMode::Strict).unwrap();
    assert_ne!(embed::encode_model(&a).0, embed::encode_model(&c).0);
}

#[test]
fn small_streams_follow_the_mode() {
    let stream: Vec<String> = "a b c a b c".split(' ').map(String::from).collect();
    let cfg = small_config();
    assert!(matches!(
        embed::train(&stream, &cfg, TrainingMode::Strict),
        Err(EmbedError::CorpusTooSmall { tokens: 6, min: 1000 })
    ));
    let m = embed::train(&stream, &cfg, TrainingMode::Permissive).unwrap();
    assert!(m.is_undertrained());
    assert!(embed::train(&[], &cfg, TrainingMode::Permissive).is_err());
}

#[test]
fn saved_models_answer_the_same_queries() {
    let ds = SyntheticDataset::generate(&SynthConfig::default());
    let store = ds.store();
    let stream = build_training_stream(TrainingSource::Global(&store));
    let model = embed::train(
        &stream,
        &TrainingConfig {
            epochs: 2,
            ..small_config()
        },
        TrainingMode::Strict,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.vec");
    embed::save_model(&model, &path).unwrap();
    let loaded = embed::load_model(&path).unwrap();
    assert_eq!(loaded.config, model.config);
    assert_eq!(loaded.report, model.report);
    let none = BTreeSet::new();
    let a = model.nearest_neighbors("wizard", 5, &none);
    let b = loaded.nearest_neighbors("wizard", 5, &none);
    assert_eq!(
        a.iter().map(|n| &n.term).collect::<Vec<_>>(),
        b.iter().map(|n| &n.term).collect::<Vec<_>>()
    );
    for (x, y) in a.iter().zip(&b) {
        assert!((x.similarity - y.similarity).abs() < 1e-7);
    }
}

proptest! {
    #[test]
    fn neighbors_match_exhaustive_scan(
        rows in proptest::collection::vec(proptest::collection::vec(-3i8..=3, 3), 2..30),
        k in 1usize..12,
    ) {
        let table: HashMap<String, Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("t{i:02}"), r.iter().map(|&x| f64::from(x)).collect()))
            .collect();
        let mut ordered: Vec<(String, Vec<f64>)> = table.clone().into_iter().collect();
        ordered.sort_by(|a, b| a.0.cmp(&b.0));
        let model = EmbeddingModel::from_vectors(ordered);
        let expected = oracles::exhaustive_neighbors(&table, "t00", k);
        let got = model.nearest_neighbors("t00", k, &BTreeSet::new());
        if table["t00"].iter().all(|&x| x == 0.0) {
            prop_assert!(got.is_empty());
        } else {
            prop_assert_eq!(got.len(), expected.len());
            // positions agree on similarity; terms may only differ among ties
            let all = oracles::exhaustive_neighbors(&table, "t00", table.len());
            for (g, (_, s)) in got.iter().zip(&expected) {
                prop_assert!((g.similarity - s).abs() < 1e-12);
                let own = all.iter().find(|(t, _)| *t == g.term).unwrap().1;
                prop_assert!((g.similarity - own).abs() < 1e-12);
            }
        }
    }
}
