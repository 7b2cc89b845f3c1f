//! Inverted index and query-likelihood ranking with Dirichlet smoothing.
//!
//! A document's score for query terms `t` is
//!
//! ```text
//! sum_t  w_t * ln( (tf(t, d) + mu * cf(t) / |C|) / (|d| + mu) )
//! ```
//!
//! where `cf` is the collection frequency and `|C|` the number of indexed
//! tokens. Terms absent from the collection are skipped; a query with no
//! indexed term scores every document as `-inf` and retrieves nothing.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::DocumentStore;
use crate::textprep::tokenize;

pub const INDEX_FORMAT: &str = "pqe-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("cannot index an empty document collection")]
    EmptyCollection,
    #[error("duplicate document id {0}")]
    DuplicateDocument(String),
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("dirichlet prior mu must be positive and finite, got {0}")]
    InvalidMu(f64),
    #[error("top_n must be at least 1")]
    InvalidTopN,
    #[error("index file: {0}")]
    Io(#[from] std::io::Error),
    #[error("index file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("index file has format {format:?} version {version}, expected {INDEX_FORMAT:?} version {INDEX_VERSION}")]
    Version { format: String, version: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    pub mu: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { mu: 50.0 }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), IndexError> {
        if self.mu.is_finite() && self.mu > 0.0 {
            Ok(())
        } else {
            Err(IndexError::InvalidMu(self.mu))
        }
    }
}

/// A query term with its weight. Weights are 1.0 everywhere in the
/// pipeline today.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTerm {
    pub term: String,
    pub weight: f64,
}

impl QueryTerm {
    pub fn new(term: impl Into<String>) -> Self {
        Self {
            term: term.into(),
            weight: 1.0,
        }
    }

    pub fn unweighted(terms: &[String]) -> Vec<QueryTerm> {
        terms.iter().map(|t| QueryTerm::new(t.clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Search results for one topic, best first; equal scores by ascending doc id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub topic_id: String,
    pub hits: Vec<ScoredDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    format: String,
    version: u32,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u64>,
    postings: BTreeMap<String, Vec<Posting>>,
    collection_tf: BTreeMap<String, u64>,
    total_tokens: u64,
    #[serde(skip)]
    doc_lookup: HashMap<String, u32>,
}

impl InvertedIndex {
    /// Index every document of the store over its normalized text fields.
    pub fn build(store: &DocumentStore) -> Result<Self, IndexError> {
        Self::from_documents(store.iter().map(|d| (d.doc_id.clone(), tokenize(&d.indexable_text()))))
    }

    /// Index pre-tokenized documents. Zero-length documents are left out;
    /// if nothing remains the collection is rejected.
    pub fn from_documents<I>(docs: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut idx = InvertedIndex {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            doc_ids: Vec::new(),
            doc_lengths: Vec::new(),
            postings: BTreeMap::new(),
            collection_tf: BTreeMap::new(),
            total_tokens: 0,
            doc_lookup: HashMap::new(),
        };
        let mut seen = std::collections::HashSet::new();
        for (doc_id, tokens) in docs {
            if !seen.insert(doc_id.clone()) {
                return Err(IndexError::DuplicateDocument(doc_id));
            }
            if tokens.is_empty() {
                continue;
            }
            let doc = idx.doc_ids.len() as u32;
            let mut tfs: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &tokens {
                *tfs.entry(t.as_str()).or_default() += 1;
            }
            for (term, tf) in tfs {
                idx.postings
                    .entry(term.to_owned())
                    .or_default()
                    .push(Posting { doc, tf });
                *idx.collection_tf.entry(term.to_owned()).or_default() += u64::from(tf);
            }
            idx.total_tokens += tokens.len() as u64;
            idx.doc_lengths.push(tokens.len() as u64);
            idx.doc_ids.push(doc_id);
        }
        if idx.doc_ids.is_empty() {
            return Err(IndexError::EmptyCollection);
        }
        idx.rebuild_lookup();
        Ok(idx)
    }

    fn rebuild_lookup(&mut self) {
        self.doc_lookup = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn collection_tf(&self, term: &str) -> u64 {
        self.collection_tf.get(term).copied().unwrap_or(0)
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u64> {
        self.doc_lookup.get(doc_id).map(|&d| self.doc_lengths[d as usize])
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.doc_ids.iter().map(String::as_str)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.collection_tf.keys().map(String::as_str)
    }

    /// (doc_id, tf) pairs for a term.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = (&str, u32)> {
        self.postings
            .get(term)
            .into_iter()
            .flatten()
            .map(|p| (self.doc_ids[p.doc as usize].as_str(), p.tf))
    }

    pub fn term_frequency(&self, term: &str, doc_id: &str) -> u32 {
        let Some(&doc) = self.doc_lookup.get(doc_id) else {
            return 0;
        };
        self.postings
            .get(term)
            .and_then(|ps| ps.binary_search_by_key(&doc, |p| p.doc).ok().map(|i| ps[i].tf))
            .unwrap_or(0)
    }

    fn term_contribution(&self, tf: u32, cf: u64, doc_len: u64, mu: f64) -> f64 {
        let background = cf as f64 / self.total_tokens as f64;
        ((f64::from(tf) + mu * background) / (doc_len as f64 + mu)).ln()
    }

    /// Query log-likelihood of one document. `-inf` when no query term is
    /// in the collection.
    pub fn score_lm_dirichlet(
        &self,
        terms: &[QueryTerm],
        doc_id: &str,
        cfg: &ScoringConfig,
    ) -> Result<f64, IndexError> {
        cfg.validate()?;
        let &doc = self
            .doc_lookup
            .get(doc_id)
            .ok_or_else(|| IndexError::UnknownDocument(doc_id.to_owned()))?;
        let doc_len = self.doc_lengths[doc as usize];
        let mut score = 0.0;
        let mut effective = false;
        for qt in terms {
            let cf = self.collection_tf(&qt.term);
            if cf == 0 {
                continue;
            }
            effective = true;
            let tf = self.term_frequency(&qt.term, doc_id);
            score += qt.weight * self.term_contribution(tf, cf, doc_len, cfg.mu);
        }
        Ok(if effective { score } else { f64::NEG_INFINITY })
    }

    /// The `top_n` best documents for the query.
    pub fn search(&self, terms: &[QueryTerm], cfg: &ScoringConfig, top_n: usize) -> Result<Vec<ScoredDoc>, IndexError> {
        cfg.validate()?;
        if top_n == 0 {
            return Err(IndexError::InvalidTopN);
        }
        // (weight, cf, per-doc tf) for every indexed query term, in query order
        let mut active: Vec<(f64, u64, HashMap<u32, u32>)> = Vec::new();
        for qt in terms {
            let cf = self.collection_tf(&qt.term);
            if cf == 0 {
                continue;
            }
            let tfs = self.postings[&qt.term].iter().map(|p| (p.doc, p.tf)).collect();
            active.push((qt.weight, cf, tfs));
        }
        if active.is_empty() {
            return Ok(Vec::new());
        }
        let mut hits: Vec<ScoredDoc> = (0..self.doc_ids.len() as u32)
            .map(|doc| {
                let doc_len = self.doc_lengths[doc as usize];
                let score = active.iter().fold(0.0, |acc, (w, cf, tfs)| {
                    let tf = tfs.get(&doc).copied().unwrap_or(0);
                    acc + w * self.term_contribution(tf, *cf, doc_len, cfg.mu)
                });
                ScoredDoc {
                    doc_id: self.doc_ids[doc as usize].clone(),
                    score,
                }
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
        hits.truncate(top_n);
        Ok(hits)
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("index serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        fs::write(path, self.to_json_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let bytes = fs::read(path)?;
        let header: serde_json::Value = serde_json::from_slice(&bytes)?;
        let format = header["format"].as_str().unwrap_or("").to_owned();
        let version = header["version"].as_u64().unwrap_or(0) as u32;
        if format != INDEX_FORMAT || version != INDEX_VERSION {
            return Err(IndexError::Version { format, version });
        }
        let mut idx: InvertedIndex = serde_json::from_value(header)?;
        idx.rebuild_lookup();
        Ok(idx)
    }
}
