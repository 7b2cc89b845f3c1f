//! Text normalization, tokenization, Porter stemming and stoplist filtering.

mod normalize;
mod porter;
mod stoplist;

pub use normalize::{normalize_text, tokenize, NormalizationConfig, PunctuationPolicy};
pub use porter::porter_stem;
pub use stoplist::{filter_query, FilteredQuery, StopListError, StopLists};

/// Normalize then tokenize.
pub fn analyze(raw: &str, cfg: &NormalizationConfig) -> Vec<String> {
    tokenize(&normalize_text(raw, cfg))
}
