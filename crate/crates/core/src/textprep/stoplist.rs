use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

const DEFAULT_STOPWORDS: &str = include_str!("../../resources/stopwords.txt");
const DEFAULT_STOP_ADJECTIVES: &str = include_str!("../../resources/stop_adjectives.txt");

#[derive(Debug, thiserror::Error)]
pub enum StopListError {
    #[error("cannot read stoplist {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: entry {entry:?} is not a single token")]
    NotAToken { origin: String, line: usize, entry: String },
}

/// The standard stop-list plus the stop-adjective list. Entries are
/// lowercase single tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopLists {
    pub stopwords: BTreeSet<String>,
    pub stop_adjectives: BTreeSet<String>,
}

impl Default for StopLists {
    fn default() -> Self {
        Self {
            stopwords: parse_list(DEFAULT_STOPWORDS, "stopwords.txt").expect("bundled list is valid"),
            stop_adjectives: parse_list(DEFAULT_STOP_ADJECTIVES, "stop_adjectives.txt").expect("bundled list is valid"),
        }
    }
}

/// Parse the one-token-per-line format. `#` starts a comment; blank lines
/// are skipped; entries are lowercased.
pub(crate) fn parse_list(text: &str, origin: &str) -> Result<BTreeSet<String>, StopListError> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        if entry.chars().any(char::is_whitespace) {
            return Err(StopListError::NotAToken {
                origin: origin.to_owned(),
                line: i + 1,
                entry: entry.to_owned(),
            });
        }
        out.insert(entry.to_lowercase());
    }
    Ok(out)
}

fn read_list(path: &Path) -> Result<BTreeSet<String>, StopListError> {
    let text = std::fs::read_to_string(path).map_err(|source| StopListError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_list(&text, &path.display().to_string())
}

impl StopLists {
    pub fn from_files(stopwords: &Path, stop_adjectives: &Path) -> Result<Self, StopListError> {
        Ok(Self {
            stopwords: read_list(stopwords)?,
            stop_adjectives: read_list(stop_adjectives)?,
        })
    }

    /// Bundled lists, each replaced by the file given for it.
    pub fn with_overrides(stopwords: Option<&Path>, stop_adjectives: Option<&Path>) -> Result<Self, StopListError> {
        let mut lists = Self::default();
        if let Some(p) = stopwords {
            lists.stopwords = read_list(p)?;
        }
        if let Some(p) = stop_adjectives {
            lists.stop_adjectives = read_list(p)?;
        }
        Ok(lists)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.stopwords.contains(token) || self.stop_adjectives.contains(token)
    }
}

/// Drop every token found in either list, keeping the rest in order.
pub fn filter_query(terms: &[String], lists: &StopLists) -> Vec<String> {
    terms.iter().filter(|t| !lists.contains(t)).cloned().collect()
}

/// A topic's query after stop-word and stop-adjective removal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredQuery {
    pub topic_id: String,
    pub user_id: String,
    pub terms: Vec<String>,
}

impl FilteredQuery {
    pub fn new(topic_id: &str, user_id: &str, query_terms: &[String], lists: &StopLists) -> Self {
        Self {
            topic_id: topic_id.to_owned(),
            user_id: user_id.to_owned(),
            terms: filter_query(query_terms, lists),
        }
    }
}
