//! Personalized query expansion with word embeddings.
//!
//! The pipeline: normalize and ingest book descriptions and user catalogs,
//! build an inverted index ranked by query likelihood with Dirichlet
//! smoothing, train CBOW embeddings (negative sampling) on the whole
//! collection or on a single user's profile document, expand queries with
//! the nearest embedded neighbours of each query term, and score runs with
//! MAP, MRR and P@10.

pub mod corpus;
pub mod embed;
pub mod eval;
pub mod expand;
pub mod index;
pub mod synth;
pub mod textprep;

pub use corpus::{Document, DocumentStore, ProfileDocument, Qrels, Topic, UserProfile};
pub use embed::{EmbeddingModel, Neighbor, TrainingConfig};
pub use expand::{ExpandedQuery, ExpansionMode, ExpansionSet};
pub use index::{InvertedIndex, RankedList, ScoringConfig};
pub use textprep::{FilteredQuery, NormalizationConfig, StopLists};
