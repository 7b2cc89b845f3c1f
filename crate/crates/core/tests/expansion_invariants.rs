use std::collections::BTreeSet;

use pqe_core::embed::EmbeddingModel;
use pqe_core::expand::{expand_query, select_embeddings};
use pqe_core::textprep::porter_stem;
use proptest::prelude::*;

const WORDS: [&str; 24] = [
    "book",
    "books",
    "booking",
    "novel",
    "novels",
    "read",
    "reading",
    "reader",
    "story",
    "stories",
    "connect",
    "connected",
    "connection",
    "wizard",
    "wizards",
    "sorcerer",
    "magic",
    "magical",
    "run",
    "running",
    "runner",
    "tale",
    "tales",
    "saga",
];

fn model_strategy() -> impl Strategy<Value = EmbeddingModel> {
    proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), WORDS.len()).prop_map(|rows| {
        EmbeddingModel::from_vectors(WORDS.iter().zip(rows).map(|(w, r)| (w.to_string(), r)).collect())
    })
}

fn query_strategy() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec(
        prop_oneof![
            proptest::sample::select(WORDS.to_vec()).prop_map(String::from),
            Just("dragon".to_string())
        ],
        0..5,
    )
}

proptest! {
    #[test]
    fn rows_never_share_the_source_stem(model in model_strategy(), q in query_strategy(), k in 0usize..30) {
        let es = select_embeddings(&q, &model, k);
        for row in &es.rows {
            prop_assert!(row.terms.len() <= k);
            for n in &row.terms {
                prop_assert_ne!(porter_stem(&n.term), porter_stem(&row.source));
            }
            // the row is as full as the vocabulary allows
            let eligible = WORDS.iter().filter(|w| porter_stem(w) != porter_stem(&row.source)).count();
            if model.contains(&row.source) {
                prop_assert_eq!(row.terms.len(), k.min(eligible));
            }
        }
    }

    #[test]
    fn expansion_grows_by_prefix(model in model_strategy(), q in query_strategy(), k1 in 0usize..8, extra in 0usize..8) {
        let k2 = k1 + extra;
        let small = select_embeddings(&q, &model, k1);
        let large = select_embeddings(&q, &model, k2);
        for (a, b) in small.rows.iter().zip(&large.rows) {
            prop_assert_eq!(&a.terms[..], &b.terms[..a.terms.len()]);
        }
        let e1: BTreeSet<String> = expand_query("t", &q, &small).expansion_terms.into_iter().collect();
        let e2: BTreeSet<String> = expand_query("t", &q, &large).expansion_terms.into_iter().collect();
        prop_assert!(e1.is_subset(&e2));
    }

    #[test]
    fn expanded_query_is_a_bounded_union(model in model_strategy(), q in query_strategy(), k in 0usize..6) {
        let es = select_embeddings(&q, &model, k);
        let expanded = expand_query("t", &q, &es);
        let distinct: BTreeSet<&String> = q.iter().collect();
        prop_assert!(expanded.all_terms.len() <= q.len() + distinct.len() * k);
        let unique: BTreeSet<&String> = expanded.all_terms.iter().collect();
        prop_assert_eq!(unique.len(), expanded.all_terms.len());
        // original terms first, in query order
        let mut seen = BTreeSet::new();
        let originals: Vec<&String> = q.iter().filter(|t| seen.insert(*t)).collect();
        prop_assert_eq!(expanded.all_terms.iter().take(originals.len()).collect::<Vec<_>>(), originals);
        if k == 0 {
            prop_assert_eq!(expanded.all_terms.len(), distinct.len());
        }
    }
}
