use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective::{sgd_step, CbowExample, Workspace};
use super::{EmbedError, EmbeddingModel, TrainingConfig, TrainingReport, VocabEntry};
use crate::corpus::{DocumentStore, ProfileDocument};
use crate::textprep::tokenize;

/// Where a training stream comes from.
#[derive(Debug, Clone, Copy)]
pub enum TrainingSource<'a> {
    /// The content of every document, in store order.
    Global(&'a DocumentStore),
    /// One user's profile document.
    Profile(&'a ProfileDocument),
}

/// The token stream fed to training: already-normalized text, concatenated,
/// with no stemming and no stop-word removal.
pub fn build_training_stream(source: TrainingSource<'_>) -> Vec<String> {
    match source {
        TrainingSource::Global(store) => store.iter().flat_map(|d| tokenize(&d.content)).collect(),
        TrainingSource::Profile(profile) => tokenize(&profile.text),
    }
}

/// How to treat streams shorter than `min_corpus_tokens`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    /// Refuse to train.
    Strict,
    /// Train anyway and flag the model as undertrained.
    Permissive,
}

/// Terms with at least `min_count` occurrences, most frequent first, ties
/// in lexical order.
fn build_vocab(stream: &[String], min_count: u64) -> Vec<VocabEntry> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in stream {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut vocab: Vec<VocabEntry> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(term, count)| VocabEntry {
            term: term.to_owned(),
            count,
        })
        .collect();
    vocab.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.term.cmp(&b.term)));
    vocab
}

/// Draws word ids with probability proportional to count^0.75.
struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(vocab: &[VocabEntry]) -> Self {
        let mut acc = 0.0;
        let cumulative = vocab
            .iter()
            .map(|v| {
                acc += (v.count as f64).powf(0.75);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.gen::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Probability of keeping one occurrence of a word with `count`
/// occurrences among `total`, as in the reference word2vec tool.
fn keep_probability(count: u64, total: u64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let threshold = t * total as f64;
    let f = count as f64;
    ((f / threshold).sqrt() + 1.0) * threshold / f
}

/// Train CBOW embeddings with negative sampling.
///
/// Input vectors start uniform in `(-0.5/dim, 0.5/dim)`, output vectors at
/// zero. Each epoch subsamples frequent words, then visits the remaining
/// positions in order with a window drawn uniformly from `1..=window`. The
/// learning rate falls linearly over all epoch-token steps from
/// `initial_lr` to `initial_lr * 1e-4`. Single-threaded and bit-for-bit
/// reproducible for a given seed.
pub fn train(stream: &[String], cfg: &TrainingConfig, mode: TrainingMode) -> Result<EmbeddingModel, EmbedError> {
    cfg.validate()?;
    let undertrained = stream.len() < cfg.min_corpus_tokens;
    if undertrained && mode == TrainingMode::Strict {
        return Err(EmbedError::CorpusTooSmall {
            tokens: stream.len(),
            min: cfg.min_corpus_tokens,
        });
    }
    let vocab = build_vocab(stream, cfg.min_count);
    if vocab.is_empty() {
        return Err(EmbedError::EmptyVocabulary(cfg.min_count));
    }
    let ids: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, v)| (v.term.as_str(), i)).collect();
    let encoded: Vec<usize> = stream.iter().filter_map(|t| ids.get(t.as_str()).copied()).collect();
    let in_vocab_total = encoded.len() as u64;

    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input: Vec<f64> = (0..vocab.len() * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; vocab.len() * dim];
    let sampler = NegativeSampler::new(&vocab);
    let keep: Vec<f64> = vocab
        .iter()
        .map(|v| keep_probability(v.count, in_vocab_total, cfg.subsample_t))
        .collect();

    let total_steps = (cfg.epochs * encoded.len()) as f64;
    let mut ws = Workspace::default();
    let mut context = Vec::with_capacity(2 * cfg.window);
    let mut negatives = Vec::with_capacity(cfg.negative);
    let mut kept: Vec<(usize, usize)> = Vec::with_capacity(encoded.len());
    let mut report = TrainingReport {
        stream_tokens: stream.len(),
        undertrained,
        ..Default::default()
    };

    for epoch in 0..cfg.epochs {
        // (word, position in the encoded stream) of the occurrences kept this epoch
        kept.clear();
        for (pos, &w) in encoded.iter().enumerate() {
            if keep[w] >= 1.0 || keep[w] >= rng.gen::<f64>() {
                kept.push((w, pos));
            }
        }
        let mut epoch_loss = 0.0;
        let mut epoch_examples = 0u64;
        for i in 0..kept.len() {
            let (target, pos) = kept[i];
            let processed = (epoch * encoded.len() + pos) as f64;
            let lr = cfg.initial_lr * (1.0 - processed / total_steps).max(1e-4);
            let span = cfg.window - rng.gen_range(0..cfg.window);
            context.clear();
            let lo = i.saturating_sub(span);
            let hi = (i + span).min(kept.len() - 1);
            context.extend((lo..=hi).filter(|&j| j != i).map(|j| kept[j].0));
            if context.is_empty() {
                continue;
            }
            negatives.clear();
            for _ in 0..cfg.negative {
                let n = sampler.sample(&mut rng);
                if n != target {
                    negatives.push(n);
                }
            }
            let ex = CbowExample {
                context: &context,
                target,
                negatives: &negatives,
            };
            epoch_loss += sgd_step(&mut input, &mut output, dim, &ex, lr, &mut ws);
            epoch_examples += 1;
        }
        report.examples += epoch_examples;
        report.epoch_losses.push(if epoch_examples > 0 {
            epoch_loss / epoch_examples as f64
        } else {
            0.0
        });
        log::debug!(
            "epoch {}: {} examples, mean loss {:.5}",
            epoch + 1,
            epoch_examples,
            report.epoch_losses[epoch]
        );
    }

    if !input.iter().chain(&output).all(|x| x.is_finite()) {
        return Err(EmbedError::Diverged);
    }
    Ok(EmbeddingModel::from_parts(
        vocab,
        dim,
        input,
        Some(output),
        cfg.clone(),
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn small_cfg() -> TrainingConfig {
        TrainingConfig {
            dim: 16,
            window: 3,
            negative: 5,
            epochs: 3,
            min_count: 1,
            subsample_t: 0.0,
            min_corpus_tokens: 10,
            ..Default::default()
        }
    }

    #[test]
    fn vocab_order_and_min_count() {
        let v = build_vocab(&toks("b a c a b a d"), 2);
        let terms: Vec<_> = v.iter().map(|e| (e.term.as_str(), e.count)).collect();
        assert_eq!(terms, vec![("a", 3), ("b", 2)]);
    }

    #[test]
    fn sampler_follows_three_quarter_power() {
        let vocab = vec![
            VocabEntry {
                term: "a".into(),
                count: 16,
            },
            VocabEntry {
                term: "b".into(),
                count: 1,
            },
        ];
        let s = NegativeSampler::new(&vocab);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let a = (0..n).filter(|_| s.sample(&mut rng) == 0).count() as f64 / n as f64;
        // 16^0.75 = 8, so P(a) = 8/9
        assert!((a - 8.0 / 9.0).abs() < 0.005, "{a}");
    }

    #[test]
    fn keep_probability_matches_reference_formula() {
        assert_eq!(keep_probability(10, 100, 0.0), 1.0);
        // t*total = 1, f = 100: (sqrt(100) + 1) / 100
        assert!((keep_probability(100, 10_000, 1e-4) - 0.11).abs() < 1e-12);
    }

    #[test]
    fn streams() {
        let docs: Vec<crate::corpus::Document> =
            serde_json::from_str(r#"[{"doc_id":"1","title":"ignored","content":"a b"},{"doc_id":"2","content":"c"}]"#)
                .unwrap();
        let store = DocumentStore::from(docs);
        assert_eq!(build_training_stream(TrainingSource::Global(&store)), toks("a b c"));
        let empty = ProfileDocument {
            user_id: "u".into(),
            text: String::new(),
            word_count: 0,
            dropped: vec![],
        };
        assert!(build_training_stream(TrainingSource::Profile(&empty)).is_empty());
    }

    #[test]
    fn strict_and_permissive_small_corpus() {
        let stream = toks("one two three");
        let cfg = small_cfg();
        assert!(matches!(
            train(&stream, &cfg, TrainingMode::Strict),
            Err(EmbedError::CorpusTooSmall { tokens: 3, min: 10 })
        ));
        let m = train(&stream, &cfg, TrainingMode::Permissive).unwrap();
        assert!(m.is_undertrained());
        assert_eq!(m.len(), 3);
        assert!(matches!(
            train(&[], &cfg, TrainingMode::Permissive),
            Err(EmbedError::EmptyVocabulary(1))
        ));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let stream: Vec<String> = (0..400).map(|i| format!("w{}", (i * 7 + i / 3) % 23)).collect();
        let cfg = TrainingConfig {
            subsample_t: 1e-2,
            ..small_cfg()
        };
        let a = train(&stream, &cfg, TrainingMode::Strict).unwrap();
        let b = train(&stream, &cfg, TrainingMode::Strict).unwrap();
        assert_eq!(a, b);
        let c = train(&stream, &TrainingConfig { seed: 2, ..cfg }, TrainingMode::Strict).unwrap();
        assert_ne!(a.vector("w1"), c.vector("w1"));
        assert!(a.all_finite());
        assert!(!a.is_undertrained());
    }
}
