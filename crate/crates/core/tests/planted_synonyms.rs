use std::sync::Arc;

use pqe_core::corpus::build_profile_document;
use pqe_core::embed::{self, build_training_stream, TrainingMode, TrainingSource};
use pqe_core::eval::{
    evaluate_run, run_configuration, sweep_k, ConfId, ExperimentConfig, RunContext, RunFile, SweepTable,
};
use pqe_core::expand::{ExpansionMode, ModelRegistry};
use pqe_core::synth::{toy_training_config, SynthConfig, SyntheticDataset};
use pqe_core::{InvertedIndex, NormalizationConfig, StopLists, TrainingConfig};

struct Fixture {
    ds: SyntheticDataset,
    index: InvertedIndex,
    models: ModelRegistry,
    stoplists: StopLists,
    norm: NormalizationConfig,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        let ds = SyntheticDataset::generate(&SynthConfig::default());
        let store = ds.store();
        let index = InvertedIndex::build(&store).unwrap();
        let global_cfg = TrainingConfig {
            seed,
            ..toy_training_config(false)
        };
        let user_cfg = TrainingConfig {
            seed,
            ..toy_training_config(true)
        };
        let stream = build_training_stream(TrainingSource::Global(&store));
        let mut models = ModelRegistry {
            global: Some(Arc::new(
                embed::train(&stream, &global_cfg, TrainingMode::Strict).unwrap(),
            )),
            ..Default::default()
        };
        for u in &ds.users {
            let profile = build_profile_document(u, &store);
            let stream = build_training_stream(TrainingSource::Profile(&profile));
            let m = embed::train(&stream, &user_cfg, TrainingMode::Permissive).unwrap();
            assert!(!m.is_undertrained());
            models.users.insert(u.user_id.clone(), Arc::new(m));
        }
        Self {
            ds,
            index,
            models,
            stoplists: StopLists::default(),
            norm: NormalizationConfig::default(),
        }
    }

    fn ctx(&self) -> RunContext<'_> {
        RunContext {
            index: &self.index,
            models: &self.models,
            stoplists: &self.stoplists,
            normalization: &self.norm,
            run_tag: "test",
            skip_undertrained: true,
        }
    }

    fn run(&self, conf: ConfId, k: usize) -> RunFile {
        let out = run_configuration(&ExperimentConfig::new(conf, k), &self.ds.topics, &self.ctx()).unwrap();
        assert!(out.skips.is_empty(), "{:?}", out.skips);
        out.run
    }

    fn map(&self, conf: ConfId, k: usize) -> f64 {
        evaluate_run(&self.run(conf, k), &self.ds.qrels).map_
    }
}

#[test]
fn expansion_recovers_planted_synonyms() {
    for seed in 1..=3 {
        let f = Fixture::new(seed);
        let base = f.map(ConfId::Conf1, 0);
        let conf3: Vec<f64> = (1..=3).map(|k| f.map(ConfId::Conf3, k)).collect();
        let conf4: Vec<f64> = (1..=3).map(|k| f.map(ConfId::Conf4, k)).collect();
        assert!(
            conf3.iter().any(|&m| m > base),
            "seed {seed}: Conf1 {base} Conf3 {conf3:?}"
        );
        assert!(
            conf4.iter().any(|&m| m > base),
            "seed {seed}: Conf1 {base} Conf4 {conf4:?}"
        );
        if seed == 1 {
            assert!(
                conf3.windows(2).all(|w| w[1] >= w[0]),
                "Conf3 MAP over k=1..3: {conf3:?}"
            );
        }
    }
}

#[test]
fn zero_k_and_mode_gating_reproduce_baselines() {
    let f = Fixture::new(1);
    let conf1 = f.run(ConfId::Conf1, 0).to_trec_string();
    let conf2 = f.run(ConfId::Conf2, 0).to_trec_string();
    assert_eq!(f.run(ConfId::Conf1, 5).to_trec_string(), conf1);
    assert_eq!(f.run(ConfId::Conf2, 7).to_trec_string(), conf2);
    for conf in [ConfId::Conf3, ConfId::Conf4] {
        assert_eq!(f.run(conf, 0).to_trec_string(), conf2, "{conf}");
    }
    for conf in [ConfId::Conf5, ConfId::Conf6] {
        assert_eq!(f.run(conf, 0).to_trec_string(), conf1, "{conf}");
    }
}

#[test]
fn runs_are_deterministic() {
    let a = Fixture::new(1);
    let b = Fixture::new(1);
    for conf in ConfId::ALL {
        assert_eq!(
            a.run(conf, 3).to_trec_string(),
            b.run(conf, 3).to_trec_string(),
            "{conf}"
        );
    }
}

#[test]
fn sweep_table_shape_and_round_trip() {
    let f = Fixture::new(1);
    let template = ExperimentConfig::new(ConfId::Conf1, 0);
    let (table, cells) = sweep_k(
        &[ConfId::Conf3, ConfId::Conf4],
        1..=10,
        &template,
        &f.ds.topics,
        &f.ds.qrels,
        &f.ctx(),
    )
    .unwrap();
    assert_eq!(table.rows.len(), 22);
    assert_eq!(table.rows.iter().filter(|r| r.k == 0).count(), 2);
    let reread = SweepTable::from_csv(&table.to_csv()).unwrap();
    assert_eq!(reread.to_csv(), table.to_csv());
    // re-evaluating the written run files reproduces the table
    for (cell, row) in cells.iter().zip(&reread.rows) {
        let run = RunFile::parse(&cell.outcome.run.to_trec_string()).unwrap();
        let r = evaluate_run(&run, &f.ds.qrels);
        assert_eq!(format!("{:.4}", r.map_), format!("{:.4}", row.map));
        assert_eq!(format!("{:.4}", r.mrr), format!("{:.4}", row.mrr));
        assert_eq!(format!("{:.4}", r.p_at_10), format!("{:.4}", row.p10));
    }
}

#[test]
fn missing_or_undertrained_personal_models_skip_topics() {
    let mut f = Fixture::new(1);
    let removed = f.ds.topics[0].user_id.clone();
    f.models.users.remove(&removed);
    let stream: Vec<String> = "tiny profile text".split(' ').map(String::from).collect();
    let small = embed::train(&stream, &toy_training_config(true), TrainingMode::Permissive).unwrap();
    assert!(small.is_undertrained());
    let flagged = f.ds.topics[1].user_id.clone();
    f.models.users.insert(flagged.clone(), Arc::new(small));

    let out = run_configuration(&ExperimentConfig::new(ConfId::Conf4, 2), &f.ds.topics, &f.ctx()).unwrap();
    let skipped: Vec<&str> = out.skips.iter().map(|s| s.topic_id.as_str()).collect();
    let expected: Vec<&str> =
        f.ds.topics
            .iter()
            .filter(|t| t.user_id == removed || t.user_id == flagged)
            .map(|t| t.topic_id.as_str())
            .collect();
    assert_eq!(skipped, expected);
    assert!(out.skips.iter().any(|s| s.reason.contains("undertrained")));
    // non-personalized runs never consult user models
    let conf3 = run_configuration(&ExperimentConfig::new(ConfId::Conf3, 2), &f.ds.topics, &f.ctx()).unwrap();
    assert!(conf3.skips.is_empty());
    assert_eq!(
        ExperimentConfig::new(ConfId::Conf4, 2).expansion,
        ExpansionMode::Personalized
    );
}
