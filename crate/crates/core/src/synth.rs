//! Deterministic planted-synonym book collection.
//!
//! Each theme has a query word `a`, a synonym `b` and a handful of context
//! words. Bridge books use `a` and `b` interchangeably in the same
//! contexts, so embeddings trained on them place `b` near `a`. Relevant
//! books for the theme's topic use only `b`; one off-topic distractor
//! book mentions `a` in passing. Queries ask for `a` wrapped in
//! request boilerplate and evaluative adjectives.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus::{CorpusError, Document, DocumentStore, Qrels, Topic, UserProfile};
use crate::embed::TrainingConfig;

#[derive(Debug, Clone, Copy)]
pub struct Theme {
    pub name: &'static str,
    pub a: &'static str,
    pub a_plural: &'static str,
    pub b: &'static str,
    pub context: [&'static str; 6],
    pub code: &'static str,
}

pub const THEMES: [Theme; 10] = [
    Theme {
        name: "magic",
        a: "wizard",
        a_plural: "wizards",
        b: "sorcerer",
        context: ["spell", "wand", "tower", "apprentice", "potion", "enchantment"],
        code: "fantasy",
    },
    Theme {
        name: "crime",
        a: "detective",
        a_plural: "detectives",
        b: "sleuth",
        context: ["murder", "clue", "suspect", "alibi", "witness", "evidence"],
        code: "mystery",
    },
    Theme {
        name: "space",
        a: "spaceship",
        a_plural: "spaceships",
        b: "starship",
        context: ["orbit", "galaxy", "captain", "planet", "asteroid", "crew"],
        code: "science-fiction",
    },
    Theme {
        name: "sea",
        a: "pirate",
        a_plural: "pirates",
        b: "buccaneer",
        context: ["treasure", "ship", "island", "parrot", "cannon", "plunder"],
        code: "adventure",
    },
    Theme {
        name: "gothic",
        a: "vampire",
        a_plural: "vampires",
        b: "nosferatu",
        context: ["blood", "coffin", "castle", "bat", "fangs", "crypt"],
        code: "horror",
    },
    Theme {
        name: "western",
        a: "cowboy",
        a_plural: "cowboys",
        b: "gunslinger",
        context: ["ranch", "saloon", "horse", "sheriff", "desert", "cattle"],
        code: "western",
    },
    Theme {
        name: "chivalry",
        a: "knight",
        a_plural: "knights",
        b: "paladin",
        context: ["sword", "armor", "quest", "dragon", "kingdom", "shield"],
        code: "legend",
    },
    Theme {
        name: "kitchen",
        a: "chef",
        a_plural: "chefs",
        b: "cook",
        context: ["kitchen", "recipe", "soup", "bread", "oven", "spice"],
        code: "cookery",
    },
    Theme {
        name: "war",
        a: "soldier",
        a_plural: "soldiers",
        b: "infantryman",
        context: ["battle", "trench", "rifle", "regiment", "sergeant", "front"],
        code: "military",
    },
    Theme {
        name: "machines",
        a: "robot",
        a_plural: "robots",
        b: "android",
        context: ["circuit", "machine", "factory", "engineer", "metal", "laser"],
        code: "technology",
    },
];

const FILLER: [&str; 24] = [
    "the", "a", "of", "and", "in", "with", "to", "his", "her", "story", "night", "day", "city", "village", "friend",
    "family", "journey", "secret", "world", "house", "road", "life", "heart", "time",
];

const QUERY_TEMPLATES: [&str; 5] = [
    "Can you recommend a good {a} book for my son? He loves great adventures.",
    "I am looking for an amazing new {a} novel, any suggestions please?",
    "Please suggest some classic {a} stories, the best you know.",
    "Looking for a fun {a} book to read, something popular and interesting.",
    "I need recommendations for a famous {a} saga, nothing too long.",
];

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub seed: u64,
    pub bridges_per_theme: usize,
    pub relevant_per_theme: usize,
    pub sentences_per_doc: usize,
    pub users: usize,
    /// Minimum documents in each user catalog.
    pub catalog_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            bridges_per_theme: 3,
            relevant_per_theme: 2,
            sentences_per_doc: 14,
            users: 6,
            catalog_size: 10,
        }
    }
}

/// Training settings sized for the generated collection (a few thousand
/// tokens): small vectors, many passes, light subsampling.
pub fn toy_training_config(personalized: bool) -> TrainingConfig {
    TrainingConfig {
        dim: 32,
        window: 5,
        negative: 10,
        epochs: 30,
        initial_lr: 0.05,
        min_count: if personalized { 1 } else { 2 },
        subsample_t: 1e-3,
        ..TrainingConfig::default()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub documents: Vec<Document>,
    pub users: Vec<UserProfile>,
    pub topics: Vec<Topic>,
    pub qrels: Qrels,
}

fn sentence(rng: &mut ChaCha8Rng, subject: &str, context: &[&str]) -> Vec<String> {
    let len = rng.gen_range(6..=9);
    let at = rng.gen_range(0..len);
    (0..len)
        .map(|i| {
            if i == at {
                subject.to_owned()
            } else if rng.gen_bool(0.5) {
                context.choose(rng).expect("non-empty context").to_string()
            } else {
                FILLER.choose(rng).expect("non-empty filler").to_string()
            }
        })
        .collect()
}

fn paragraph(sentences: Vec<Vec<String>>) -> String {
    sentences.into_iter().map(|s| s.join(" ")).collect::<Vec<_>>().join(" ")
}

impl SyntheticDataset {
    pub fn generate(cfg: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut documents = Vec::new();
        let mut bridges: Vec<Vec<String>> = vec![Vec::new(); THEMES.len()];
        let mut qrels = Qrels::default();
        let doc = |id: String, title: String, theme: &Theme, content: String| Document {
            doc_id: id,
            title,
            author: String::new(),
            publisher: String::new(),
            year: None,
            classification_codes: vec![theme.code.to_owned()],
            content,
        };
        for (t, theme) in THEMES.iter().enumerate() {
            let topic = format!("T{:02}", t + 1);
            for i in 0..cfg.bridges_per_theme {
                let s = (0..cfg.sentences_per_doc)
                    .map(|j| {
                        let subject = match j % 5 {
                            4 => theme.a_plural,
                            j if j % 2 == 0 => theme.a,
                            _ => theme.b,
                        };
                        sentence(&mut rng, subject, &theme.context)
                    })
                    .collect();
                let id = format!("{}-bridge-{}", theme.name, i + 1);
                bridges[t].push(id.clone());
                documents.push(doc(
                    id,
                    format!("the {} and the {} {}", theme.a, theme.b, i + 1),
                    theme,
                    paragraph(s),
                ));
            }
            for i in 0..cfg.relevant_per_theme {
                let s = (0..cfg.sentences_per_doc)
                    .map(|_| sentence(&mut rng, theme.b, &theme.context))
                    .collect();
                let id = format!("{}-rel-{}", theme.name, i + 1);
                qrels.insert(&topic, &id, if i == 0 { 2 } else { 1 });
                documents.push(doc(id, format!("tales of the {}", theme.b), theme, paragraph(s)));
            }
            // an off-topic book that mentions `a` in passing
            let s = (0..cfg.sentences_per_doc)
                .map(|j| {
                    let subject = FILLER.choose(&mut rng).expect("non-empty filler");
                    let mut s = sentence(&mut rng, subject, &FILLER);
                    if j < 3 {
                        s.push(theme.a.to_owned());
                    }
                    s
                })
                .collect();
            let id = format!("{}-distractor", theme.name);
            qrels.insert(&topic, &id, 0);
            documents.push(doc(id, format!("the {} costume", theme.a), theme, paragraph(s)));
        }

        let mut users: Vec<UserProfile> = (0..cfg.users)
            .map(|u| UserProfile {
                user_id: format!("U{}", u + 1),
                catalog: Vec::new(),
                tags: Vec::new(),
                ratings: Vec::new(),
            })
            .collect();
        let mut topics = Vec::new();
        for (t, theme) in THEMES.iter().enumerate() {
            let u = t % cfg.users;
            users[u].catalog.extend(bridges[t].iter().cloned());
            users[u].tags.push((bridges[t][0].clone(), theme.code.to_owned()));
            users[u].ratings.push((bridges[t][0].clone(), 8.0));
            let template = QUERY_TEMPLATES[t % QUERY_TEMPLATES.len()];
            topics.push(Topic {
                topic_id: format!("T{:02}", t + 1),
                user_id: users[u].user_id.clone(),
                query_text: template.replace("{a}", theme.a),
            });
        }
        // pad catalogs with bridges of other themes
        for (u, user) in users.iter_mut().enumerate() {
            let mut t = u;
            while user.catalog.len() < cfg.catalog_size {
                t = (t + 1) % THEMES.len();
                for id in &bridges[t] {
                    if user.catalog.len() < cfg.catalog_size && !user.catalog.contains(id) {
                        user.catalog.push(id.clone());
                    }
                }
            }
        }
        SyntheticDataset {
            documents,
            users,
            topics,
            qrels,
        }
    }

    pub fn store(&self) -> DocumentStore {
        let mut store = DocumentStore::default();
        for d in &self.documents {
            store.insert(d.clone());
        }
        store
    }

    /// Write `documents.jsonl`, `users.jsonl`, `topics.tsv` and `qrels.txt`.
    pub fn write_to(&self, dir: &Path) -> Result<(), CorpusError> {
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| CorpusError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            std::fs::File::create(&path)
                .and_then(|mut f| f.write_all(body.as_bytes()))
                .map_err(io(&path))
        };
        let docs: String = self
            .documents
            .iter()
            .map(|d| {
                json!({
                    "doc_id": d.doc_id,
                    "title": d.title,
                    "codes": d.classification_codes,
                    "content": d.content,
                })
                .to_string()
                    + "\n"
            })
            .collect();
        write("documents.jsonl", docs)?;
        let users: String = self
            .users
            .iter()
            .map(|u| serde_json::to_string(u).expect("profile serializes") + "\n")
            .collect();
        write("users.jsonl", users)?;
        let topics: String = self
            .topics
            .iter()
            .map(|t| format!("{}\t{}\t{}\n", t.topic_id, t.user_id, t.query_text))
            .collect();
        write("topics.tsv", topics)?;
        write("qrels.txt", self.qrels.to_trec_string())
    }

    /// Word counts of every user's profile document.
    pub fn profile_sizes(&self) -> BTreeMap<String, usize> {
        let store = self.store();
        self.users
            .iter()
            .map(|u| {
                (
                    u.user_id.clone(),
                    crate::corpus::build_profile_document(u, &store).word_count,
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::porter_stem;

    #[test]
    fn deterministic_and_shaped() {
        let cfg = SynthConfig::default();
        let a = SyntheticDataset::generate(&cfg);
        let b = SyntheticDataset::generate(&cfg);
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.documents.len(), 60);
        assert_eq!(a.users.len(), 6);
        assert_eq!(a.topics.len(), 10);
        for sizes in a.profile_sizes().values() {
            assert!(*sizes >= 1000, "{sizes}");
        }
    }

    #[test]
    fn planted_pairs_have_distinct_stems() {
        for t in THEMES {
            assert_ne!(porter_stem(t.a), porter_stem(t.b), "{}", t.name);
            assert_eq!(porter_stem(t.a), porter_stem(t.a_plural), "{}", t.name);
        }
    }

    #[test]
    fn relevant_documents_never_contain_the_query_word() {
        let ds = SyntheticDataset::generate(&SynthConfig::default());
        for (t, theme) in THEMES.iter().enumerate() {
            let topic = format!("T{:02}", t + 1);
            for d in &ds.documents {
                if ds.qrels.is_relevant(&topic, &d.doc_id) {
                    assert!(!d.indexable_text().split(' ').any(|w| w == theme.a));
                }
            }
        }
    }
}
