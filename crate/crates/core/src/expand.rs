//! Query expansion with embedded neighbours.
//!
//! For each query term `t` the expander ranks the vocabulary by cosine to
//! `t`, drops candidates sharing `t`'s Porter stem, and keeps the first
//! `k`. The expanded query is the set union of the original terms and all
//! kept candidates.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingModel, Neighbor};
use crate::textprep::porter_stem;

/// Neighbours fetched before stem filtering: `OVERFETCH_FACTOR * k + OVERFETCH_EXTRA`,
/// doubled until the row fills or the vocabulary runs out.
pub const OVERFETCH_FACTOR: usize = 3;
pub const OVERFETCH_EXTRA: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub source: String,
    /// Best first; ties in lexical order.
    pub terms: Vec<Neighbor>,
}

/// One row per distinct source term, in query order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSet {
    pub rows: Vec<ExpansionRow>,
}

impl ExpansionSet {
    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(|r| r.terms.is_empty())
    }

    pub fn row(&self, source: &str) -> Option<&ExpansionRow> {
        self.rows.iter().find(|r| r.source == source)
    }
}

fn select_row(term: &str, model: &EmbeddingModel, k: usize) -> Vec<Neighbor> {
    select_row_from(term, model, k, OVERFETCH_FACTOR * k + OVERFETCH_EXTRA)
}

fn select_row_from(term: &str, model: &EmbeddingModel, k: usize, mut fetch: usize) -> Vec<Neighbor> {
    let stem = porter_stem(term);
    let none = BTreeSet::new();
    loop {
        let candidates = model.nearest_neighbors(term, fetch, &none);
        let exhausted = candidates.len() < fetch;
        let mut kept: Vec<Neighbor> = candidates
            .into_iter()
            .filter(|n| porter_stem(&n.term) != stem)
            .collect();
        if kept.len() >= k || exhausted {
            kept.truncate(k);
            return kept;
        }
        fetch *= 2;
    }
}

/// Pick up to `k` expansion terms for every distinct query term. Terms the
/// model does not know get an empty row.
pub fn select_embeddings(terms: &[String], model: &EmbeddingModel, k: usize) -> ExpansionSet {
    let mut seen = HashSet::new();
    let rows = terms
        .iter()
        .filter(|t| seen.insert(t.as_str()))
        .map(|t| ExpansionRow {
            source: t.clone(),
            terms: if k == 0 { Vec::new() } else { select_row(t, model, k) },
        })
        .collect();
    ExpansionSet { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provenance", rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Expansion { source: String, similarity: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTerm {
    pub term: String,
    #[serde(flatten)]
    pub provenance: Provenance,
}

/// The query as submitted to ranking: original terms first, then
/// expansion terms in (source order, similarity order), no repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandedQuery {
    pub topic_id: String,
    pub original_terms: Vec<String>,
    /// Flattened expansion set, first occurrence of each term kept.
    pub expansion_terms: Vec<String>,
    pub all_terms: Vec<String>,
    provenance: Vec<AuditTerm>,
    rows: Vec<ExpansionRow>,
}

pub fn expand_query(topic_id: &str, query: &[String], es: &ExpansionSet) -> ExpandedQuery {
    let mut present = HashSet::new();
    let mut all_terms = Vec::new();
    let mut provenance = Vec::new();
    for t in query {
        if present.insert(t.clone()) {
            all_terms.push(t.clone());
            provenance.push(AuditTerm {
                term: t.clone(),
                provenance: Provenance::Original,
            });
        }
    }
    let mut expansion_seen = HashSet::new();
    let mut expansion_terms = Vec::new();
    for row in &es.rows {
        for n in &row.terms {
            if expansion_seen.insert(n.term.clone()) {
                expansion_terms.push(n.term.clone());
            }
            if present.insert(n.term.clone()) {
                all_terms.push(n.term.clone());
                provenance.push(AuditTerm {
                    term: n.term.clone(),
                    provenance: Provenance::Expansion {
                        source: row.source.clone(),
                        similarity: n.similarity,
                    },
                });
            }
        }
    }
    ExpandedQuery {
        topic_id: topic_id.to_owned(),
        original_terms: query.to_vec(),
        expansion_terms,
        all_terms,
        provenance,
        rows: es.rows.clone(),
    }
}

/// One line of the expansion audit file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub topic_id: String,
    pub terms: Vec<AuditTerm>,
    /// The full expansion set, including candidates already in the query.
    pub rows: Vec<ExpansionRow>,
}

impl ExpandedQuery {
    pub fn audit(&self) -> AuditRecord {
        AuditRecord {
            topic_id: self.topic_id.clone(),
            terms: self.provenance.clone(),
            rows: self.rows.clone(),
        }
    }
}

/// Serialize audit records as JSON lines.
pub fn audit_jsonl<'a>(queries: impl IntoIterator<Item = &'a ExpandedQuery>) -> String {
    let mut out = String::new();
    for q in queries {
        out.push_str(&serde_json::to_string(&q.audit()).expect("audit record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionMode {
    None,
    NonPersonalized,
    Personalized,
}

/// Why a topic could not be run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SkipReason {
    MissingGlobalModel,
    MissingUserModel { user_id: String, detail: String },
    UndertrainedUserModel { user_id: String },
    UndertrainedGlobalModel,
    EmptyQuery,
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SkipReason::MissingGlobalModel => write!(f, "no global embedding model"),
            SkipReason::MissingUserModel { user_id, detail } => {
                write!(f, "no embedding model for user {user_id}: {detail}")
            }
            SkipReason::UndertrainedUserModel { user_id } => {
                write!(f, "embedding model for user {user_id} is flagged undertrained")
            }
            SkipReason::UndertrainedGlobalModel => {
                write!(f, "global embedding model is flagged undertrained")
            }
            SkipReason::EmptyQuery => write!(f, "query has no indexed term"),
        }
    }
}

/// Trained models by scope. Users whose training failed are recorded with
/// the failure so that lookups can explain the miss.
#[derive(Debug, Clone, Default)]
pub struct ModelRegistry {
    pub global: Option<Arc<EmbeddingModel>>,
    pub users: BTreeMap<String, Arc<EmbeddingModel>>,
    pub failures: BTreeMap<String, String>,
}

impl ModelRegistry {
    /// The model an expansion mode calls for. Personalized lookups never
    /// fall back to the global model.
    pub fn resolve(&self, mode: ExpansionMode, user_id: &str) -> Result<Option<&EmbeddingModel>, SkipReason> {
        match mode {
            ExpansionMode::None => Ok(None),
            ExpansionMode::NonPersonalized => self.global.as_deref().map(Some).ok_or(SkipReason::MissingGlobalModel),
            ExpansionMode::Personalized => match self.users.get(user_id) {
                Some(m) => Ok(Some(m)),
                None => Err(SkipReason::MissingUserModel {
                    user_id: user_id.to_owned(),
                    detail: self
                        .failures
                        .get(user_id)
                        .cloned()
                        .unwrap_or_else(|| "not trained".into()),
                }),
            },
        }
    }
}
