//! Reference implementations written straight from the definitions, shared
//! by the integration tests and the acceptance suite. Nothing here calls
//! into the code under test except to read plain data.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Query-likelihood with Dirichlet smoothing evaluated term by term over
/// raw token lists. Documents whose score is -inf (no query term in the
/// collection) are left out. Ties go to the smaller doc id.
pub fn brute_force_rank(docs: &[(String, Vec<String>)], query: &[String], mu: f64, top_n: usize) -> Vec<(String, f64)> {
    let docs: Vec<&(String, Vec<String>)> = docs.iter().filter(|(_, t)| !t.is_empty()).collect();
    let total: usize = docs.iter().map(|(_, t)| t.len()).sum();
    let cf = |term: &str| -> usize { docs.iter().map(|(_, t)| t.iter().filter(|x| *x == term).count()).sum() };
    let mut scored = Vec::new();
    for (id, tokens) in &docs {
        let mut score = 0.0;
        let mut any = false;
        for q in query {
            let c = cf(q);
            if c == 0 {
                continue;
            }
            any = true;
            let tf = tokens.iter().filter(|x| *x == q).count() as f64;
            let p_c = c as f64 / total as f64;
            score += ((tf + mu * p_c) / (tokens.len() as f64 + mu)).ln();
        }
        if any {
            scored.push((id.clone(), score));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(top_n);
    scored
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Random corpus: `n_docs` documents over a vocabulary of `vocab` words
/// with a skewed word distribution.
pub fn random_corpus(rng: &mut ChaCha8Rng, n_docs: usize, vocab: usize) -> Vec<(String, Vec<String>)> {
    (0..n_docs)
        .map(|i| {
            let len = rng.gen_range(1..=40);
            let tokens = (0..len)
                .map(|_| {
                    let r: f64 = rng.gen();
                    format!("w{}", ((r * r) * vocab as f64) as usize)
                })
                .collect();
            (format!("d{i:03}"), tokens)
        })
        .collect()
}

/// Per-topic (AP, RR, P@10) straight from the definitions, given relevant
/// sets; topics without relevant documents are absent.
pub fn brute_force_metrics(
    rankings: &BTreeMap<String, Vec<String>>,
    relevant: &BTreeMap<String, Vec<String>>,
) -> BTreeMap<String, (f64, f64, f64)> {
    let mut out = BTreeMap::new();
    for (topic, ranking) in rankings {
        let Some(rel) = relevant.get(topic).filter(|r| !r.is_empty()) else {
            continue;
        };
        let is_rel = |d: &String| rel.contains(d);
        let mut ap = 0.0;
        for r in 1..=ranking.len() {
            if is_rel(&ranking[r - 1]) {
                let prec_at_r = ranking[..r].iter().filter(|d| is_rel(d)).count() as f64 / r as f64;
                ap += prec_at_r;
            }
        }
        ap /= rel.len() as f64;
        let mut rr = 0.0;
        for (i, d) in ranking.iter().enumerate() {
            if is_rel(d) {
                rr = 1.0 / (i as f64 + 1.0);
                break;
            }
        }
        let p10 = ranking.iter().take(10).filter(|d| is_rel(d)).count() as f64 / 10.0;
        out.insert(topic.clone(), (ap, rr, p10));
    }
    out
}

pub fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// CBOW negative-sampling loss written with plain logs of sigmoids.
pub fn naive_cbow_loss(
    input: &[f64],
    output: &[f64],
    dim: usize,
    context: &[usize],
    target: usize,
    negatives: &[usize],
) -> f64 {
    let mut h = vec![0.0; dim];
    for &c in context {
        for d in 0..dim {
            h[d] += input[c * dim + d] / context.len() as f64;
        }
    }
    let score = |w: usize| (0..dim).map(|d| output[w * dim + d] * h[d]).sum::<f64>();
    let sigma = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut loss = -sigma(score(target)).ln();
    for &n in negatives {
        loss -= sigma(-score(n)).ln();
    }
    loss
}

/// Central finite differences of `f` with respect to every entry of `x`.
pub fn central_differences(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest entrywise |a - n| / max(|a|, |n|, floor).
pub fn max_gradient_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Exhaustive cosine ranking over a term -> vector table.
pub fn exhaustive_neighbors(table: &HashMap<String, Vec<f64>>, term: &str, k: usize) -> Vec<(String, f64)> {
    let Some(q) = table.get(term) else {
        return Vec::new();
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm(q) == 0.0 {
        return Vec::new();
    }
    let mut all: Vec<(String, f64)> = table
        .iter()
        .filter(|(t, v)| t.as_str() != term && norm(v) > 0.0)
        .map(|(t, v)| {
            let dot: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
            (t.clone(), (dot / (norm(q) * norm(v))).clamp(-1.0, 1.0))
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// `word stem` pairs from the bundled Porter reference sample.
pub fn porter_pairs() -> Vec<(String, String)> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/porter_reference.txt");
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{path}: {e}"))
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut it = l.split_whitespace();
            (it.next().unwrap().to_owned(), it.next().unwrap().to_owned())
        })
        .collect()
}
