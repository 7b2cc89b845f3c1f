//! Documents, user catalogs, topics and relevance judgments.
//!
//! Input formats:
//! - documents: JSON lines with `doc_id` plus any of `title`, `author`,
//!   `publisher`, `year`, `codes`, `content`;
//! - users: JSON lines with `user_id`, `catalog`, `tags`, `ratings`;
//! - topics: `topic_id<TAB>user_id<TAB>query text`;
//! - qrels: `topic_id iter doc_id grade`, whitespace separated.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::textprep::{normalize_text, tokenize, NormalizationConfig};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })
}

/// One book description. Text fields are stored normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub publisher: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default)]
    pub classification_codes: Vec<String>,
    #[serde(default)]
    pub content: String,
}

impl Document {
    /// All searchable text: title, author, publisher, codes and content.
    pub fn indexable_text(&self) -> String {
        let mut parts: Vec<&str> = vec![&self.title, &self.author, &self.publisher];
        parts.extend(self.classification_codes.iter().map(String::as_str));
        parts.push(&self.content);
        parts.retain(|p| !p.is_empty());
        parts.join(" ")
    }
}

#[derive(Debug, Deserialize)]
struct RawDocument {
    doc_id: Option<String>,
    title: Option<String>,
    author: Option<String>,
    publisher: Option<String>,
    year: Option<i32>,
    #[serde(default)]
    codes: Vec<String>,
    content: Option<String>,
}

/// A line that was not ingested, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub malformed: Vec<Rejection>,
    pub duplicates: Vec<Rejection>,
}

/// Documents in input order, addressable by id. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Document>", into = "Vec<Document>")]
pub struct DocumentStore {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl From<Vec<Document>> for DocumentStore {
    fn from(docs: Vec<Document>) -> Self {
        let mut store = DocumentStore::default();
        for d in docs {
            store.insert(d);
        }
        store
    }
}

impl From<DocumentStore> for Vec<Document> {
    fn from(store: DocumentStore) -> Self {
        store.docs
    }
}

impl DocumentStore {
    /// Insert unless the id is taken; returns whether it was stored.
    pub fn insert(&mut self, doc: Document) -> bool {
        if self.by_id.contains_key(&doc.doc_id) {
            return false;
        }
        self.by_id.insert(doc.doc_id.clone(), self.docs.len());
        self.docs.push(doc);
        true
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.docs.iter()
    }
}

/// Read a JSON-lines document file, normalizing every text field.
///
/// A missing file is fatal. Unparseable lines, lines without `doc_id` or
/// without any text field are skipped; a repeated `doc_id` keeps the first
/// record. Both are counted in the report.
pub fn ingest_documents(path: &Path, norm: &NormalizationConfig) -> Result<(DocumentStore, IngestReport), CorpusError> {
    let text = read(path)?;
    let mut store = DocumentStore::default();
    let mut report = IngestReport::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                report.malformed.push(Rejection {
                    line: line_no,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let Some(doc_id) = raw.doc_id.filter(|id| !id.trim().is_empty()) else {
            report.malformed.push(Rejection {
                line: line_no,
                reason: "missing doc_id".into(),
            });
            continue;
        };
        let has_text = [&raw.title, &raw.author, &raw.publisher, &raw.content]
            .iter()
            .any(|f| f.is_some())
            || !raw.codes.is_empty();
        if !has_text {
            report.malformed.push(Rejection {
                line: line_no,
                reason: format!("document {doc_id} has no text field"),
            });
            continue;
        }
        let n = |s: Option<String>| s.map(|s| normalize_text(&s, norm)).unwrap_or_default();
        let doc = Document {
            doc_id: doc_id.clone(),
            title: n(raw.title),
            author: n(raw.author),
            publisher: n(raw.publisher),
            year: raw.year,
            classification_codes: raw
                .codes
                .iter()
                .map(|c| normalize_text(c, norm))
                .filter(|c| !c.is_empty())
                .collect(),
            content: n(raw.content),
        };
        if store.insert(doc) {
            report.accepted += 1;
        } else {
            report.duplicates.push(Rejection {
                line: line_no,
                reason: format!("duplicate doc_id {doc_id}"),
            });
        }
    }
    Ok((store, report))
}

/// A user's catalog plus the tags and ratings attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    #[serde(default)]
    pub catalog: Vec<String>,
    #[serde(default)]
    pub tags: Vec<(String, String)>,
    #[serde(default)]
    pub ratings: Vec<(String, f64)>,
}

/// Read the users JSON-lines file. Malformed lines, ratings outside
/// [0, 10] and repeated user ids are rejected and reported.
pub fn ingest_users(path: &Path) -> Result<(Vec<UserProfile>, IngestReport), CorpusError> {
    let text = read(path)?;
    let mut users: Vec<UserProfile> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut report = IngestReport::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let user: UserProfile = match serde_json::from_str(line) {
            Ok(u) => u,
            Err(e) => {
                report.malformed.push(Rejection {
                    line: line_no,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if let Some((doc, r)) = user.ratings.iter().find(|(_, r)| !(0.0..=10.0).contains(r)) {
            report.malformed.push(Rejection {
                line: line_no,
                reason: format!("rating {r} for {doc} outside [0, 10]"),
            });
            continue;
        }
        if !seen.insert(user.user_id.clone()) {
            report.duplicates.push(Rejection {
                line: line_no,
                reason: format!("duplicate user_id {}", user.user_id),
            });
            continue;
        }
        report.accepted += 1;
        users.push(user);
    }
    Ok((users, report))
}

/// The profile document d_u: a user's catalog concatenated into one text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub user_id: String,
    pub text: String,
    pub word_count: usize,
    /// Catalog entries with no matching document; they contribute nothing.
    pub dropped: Vec<String>,
}

/// Concatenate, in catalog order, the content of every catalog document
/// present in the store. Tags and ratings are not part of the text.
pub fn build_profile_document(user: &UserProfile, store: &DocumentStore) -> ProfileDocument {
    let mut parts = Vec::new();
    let mut dropped = Vec::new();
    for doc_id in &user.catalog {
        match store.get(doc_id) {
            Some(doc) => {
                if !doc.content.is_empty() {
                    parts.push(doc.content.as_str());
                }
            }
            None => dropped.push(doc_id.clone()),
        }
    }
    let text = parts.join(" ");
    ProfileDocument {
        user_id: user.user_id.clone(),
        word_count: tokenize(&text).len(),
        text,
        dropped,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub user_id: String,
    pub query_text: String,
}

pub fn load_topics(path: &Path) -> Result<Vec<Topic>, CorpusError> {
    parse_topics(&read(path)?, path)
}

pub fn parse_topics(text: &str, origin: &Path) -> Result<Vec<Topic>, CorpusError> {
    let mut topics = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CorpusError::Parse {
            path: origin.to_owned(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.splitn(3, '\t').collect();
        let [topic_id, user_id, query] = fields[..] else {
            return Err(err("expected topic_id<TAB>user_id<TAB>query".into()));
        };
        let (topic_id, user_id) = (topic_id.trim(), user_id.trim());
        if topic_id.is_empty() || user_id.is_empty() {
            return Err(err("empty topic_id or user_id".into()));
        }
        if !seen.insert(topic_id.to_owned()) {
            return Err(err(format!("duplicate topic_id {topic_id}")));
        }
        topics.push(Topic {
            topic_id: topic_id.to_owned(),
            user_id: user_id.to_owned(),
            query_text: query.trim().to_owned(),
        });
    }
    Ok(topics)
}

/// Topic ids whose user is not among `users`. Such topics are kept; callers
/// needing the profile must skip them explicitly.
pub fn unresolved_topics<'a>(topics: &'a [Topic], users: &[UserProfile]) -> Vec<&'a Topic> {
    let known: BTreeSet<&str> = users.iter().map(|u| u.user_id.as_str()).collect();
    topics.iter().filter(|t| !known.contains(t.user_id.as_str())).collect()
}

/// Relevance judgments, topic -> doc -> grade. Absent pairs are non-relevant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn insert(&mut self, topic_id: &str, doc_id: &str, grade: u32) {
        self.judgments
            .entry(topic_id.to_owned())
            .or_default()
            .insert(doc_id.to_owned(), grade);
    }

    pub fn grade(&self, topic_id: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(topic_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_relevant(&self, topic_id: &str, doc_id: &str) -> bool {
        self.grade(topic_id, doc_id) >= 1
    }

    pub fn has_topic(&self, topic_id: &str) -> bool {
        self.judgments.contains_key(topic_id)
    }

    /// Number of documents judged relevant (grade >= 1) for the topic.
    pub fn relevant_count(&self, topic_id: &str) -> usize {
        self.judgments
            .get(topic_id)
            .map_or(0, |m| m.values().filter(|&&g| g >= 1).count())
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Write in the standard four-column judgment format.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (topic, docs) in &self.judgments {
            for (doc, grade) in docs {
                out.push_str(&format!("{topic} 0 {doc} {grade}\n"));
            }
        }
        out
    }
}

pub fn load_qrels(path: &Path) -> Result<Qrels, CorpusError> {
    parse_qrels(&read(path)?, path)
}

pub fn parse_qrels(text: &str, origin: &Path) -> Result<Qrels, CorpusError> {
    let mut qrels = Qrels::default();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CorpusError::Parse {
            path: origin.to_owned(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [topic, _iter, doc, grade] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        let grade: u32 = grade
            .parse()
            .map_err(|_| err(format!("grade {grade:?} is not a non-negative integer")))?;
        if !seen.insert((topic.to_owned(), doc.to_owned())) {
            return Err(err(format!("duplicate judgment for ({topic}, {doc})")));
        }
        qrels.insert(topic, doc, grade);
    }
    Ok(qrels)
}
