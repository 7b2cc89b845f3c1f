mod oracles;

use pqe_core::index::{InvertedIndex, QueryTerm, ScoringConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_docs = rng.gen_range(1..=50);
    let vocab = rng.gen_range(1..=200);
    let docs = oracles::random_corpus(&mut rng, n_docs, vocab);
    let index = InvertedIndex::from_documents(docs.clone()).unwrap();
    let mu = rng.gen_range(0.5..3000.0);
    let cfg = ScoringConfig { mu };
    let q_len = rng.gen_range(1..=6);
    let query: Vec<String> = (0..q_len)
        .map(|_| format!("w{}", rng.gen_range(0..vocab + 5)))
        .collect();
    let top_n = rng.gen_range(1..=60);

    let expected = oracles::brute_force_rank(&docs, &query, mu, top_n);
    let got = index.search(&QueryTerm::unweighted(&query), &cfg, top_n).unwrap();
    prop_assert_eq!(
        got.iter().map(|h| h.doc_id.clone()).collect::<Vec<_>>(),
        expected.iter().map(|(d, _)| d.clone()).collect::<Vec<_>>()
    );
    for (h, (_, s)) in got.iter().zip(&expected) {
        prop_assert!(oracles::relative_error(h.score, *s) <= 1e-9, "{} vs {}", h.score, s);
        let pointwise = index
            .score_lm_dirichlet(&QueryTerm::unweighted(&query), &h.doc_id, &cfg)
            .unwrap();
        prop_assert_eq!(pointwise, h.score);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn search_matches_brute_force(seed in any::<u64>()) {
        check(seed)?;
    }
}

#[test]
fn persisted_index_ranks_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let docs = oracles::random_corpus(&mut rng, 30, 40);
    let index = InvertedIndex::from_documents(docs).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.json");
    index.save(&path).unwrap();
    let loaded = InvertedIndex::load(&path).unwrap();
    let q = QueryTerm::unweighted(&["w1".into(), "w3".into(), "w17".into()]);
    let cfg = ScoringConfig::default();
    assert_eq!(
        index.search(&q, &cfg, 100).unwrap(),
        loaded.search(&q, &cfg, 100).unwrap()
    );
}
