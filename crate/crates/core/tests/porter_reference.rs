mod oracles;

use pqe_core::textprep::porter_stem;

#[test]
fn reference_vocabulary_sample_matches() {
    let pairs = oracles::porter_pairs();
    assert!(pairs.len() >= 100, "only {} pairs", pairs.len());
    let wrong: Vec<_> = pairs
        .iter()
        .filter(|(w, s)| porter_stem(w) != *s)
        .map(|(w, s)| format!("{w}: expected {s}, got {}", porter_stem(w)))
        .collect();
    assert!(wrong.is_empty(), "{}", wrong.join("\n"));
}

#[test]
fn stemming_is_stable_on_common_suffix_families() {
    for family in [
        ["connect", "connected", "connecting", "connection", "connections"],
        [
            "generalize",
            "generalized",
            "generalizing",
            "generalization",
            "generalizations",
        ],
    ] {
        let stems: Vec<String> = family.iter().map(|w| porter_stem(w)).collect();
        assert!(stems.windows(2).all(|w| w[0] == w[1]), "{family:?} -> {stems:?}");
    }
}
