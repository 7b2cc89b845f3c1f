//! Run files, MAP/MRR/P@10 and the six-configuration experiment matrix.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Qrels, Topic};
use crate::expand::{expand_query, select_embeddings, ExpandedQuery, ExpansionMode, ModelRegistry, SkipReason};
use crate::index::{IndexError, InvertedIndex, QueryTerm, ScoringConfig};
use crate::textprep::{analyze, filter_query, NormalizationConfig, StopLists};

pub const PRECISION_CUTOFF: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run file line {line}: {message}")]
    RunFormat { line: usize, message: String },
    #[error("sweep table line {line}: {message}")]
    SweepFormat { line: usize, message: String },
    #[error("{0:?} requires {1:?} filtering and {2:?} expansion")]
    ConfigMismatch(ConfId, QueryForm, ExpansionMode),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub topic_id: String,
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

/// A ranked result list per topic in standard run format.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunFile {
    pub run_tag: String,
    pub entries: Vec<RunEntry>,
}

impl RunFile {
    /// Lines `topic_id Q0 doc_id rank score run_tag`. Scores use the
    /// shortest round-trip decimal form.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{} Q0 {} {} {} {}\n",
                e.topic_id, e.doc_id, e.rank, e.score, self.run_tag
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut run = RunFile::default();
        let mut seen: HashSet<(String, String)> = HashSet::new();
        let mut last: Option<(String, usize, f64)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| EvalError::RunFormat { line, message };
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(err(format!("expected 6 fields, found {}", fields.len())));
            }
            let rank: usize = fields[3]
                .parse()
                .map_err(|_| err(format!("bad rank {:?}", fields[3])))?;
            let score: f64 = fields[4]
                .parse()
                .map_err(|_| err(format!("bad score {:?}", fields[4])))?;
            let topic_id = fields[0].to_owned();
            let doc_id = fields[2].to_owned();
            let expected_rank = match &last {
                Some((t, r, s)) if *t == topic_id => {
                    if score > *s {
                        return Err(err("scores must not increase within a topic".into()));
                    }
                    r + 1
                }
                _ => 1,
            };
            if rank != expected_rank {
                return Err(err(format!("rank {rank} where {expected_rank} was expected")));
            }
            if !seen.insert((topic_id.clone(), doc_id.clone())) {
                return Err(err(format!("document {doc_id} listed twice for topic {topic_id}")));
            }
            if run.run_tag.is_empty() {
                run.run_tag = fields[5].to_owned();
            }
            last = Some((topic_id.clone(), rank, score));
            run.entries.push(RunEntry {
                topic_id,
                doc_id,
                rank,
                score,
            });
        }
        Ok(run)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Document ids per topic in rank order.
    pub fn rankings(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<(usize, &str)>> = BTreeMap::new();
        for e in &self.entries {
            out.entry(&e.topic_id).or_default().push((e.rank, &e.doc_id));
        }
        out.into_iter()
            .map(|(t, mut v)| {
                v.sort_by_key(|&(r, _)| r);
                (t, v.into_iter().map(|(_, d)| d).collect())
            })
            .collect()
    }
}

pub fn average_precision<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, topic: &str) -> f64 {
    let total = qrels.relevant_count(topic);
    if total == 0 {
        return 0.0;
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.iter().enumerate() {
        if qrels.is_relevant(topic, d.as_ref()) {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

pub fn reciprocal_rank<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, topic: &str) -> f64 {
    ranking
        .iter()
        .position(|d| qrels.is_relevant(topic, d.as_ref()))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Relevant documents among the first `cutoff`, over `cutoff` even when
/// fewer were retrieved.
pub fn precision_at<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, topic: &str, cutoff: usize) -> f64 {
    if cutoff == 0 {
        return 0.0;
    }
    let hits = ranking
        .iter()
        .take(cutoff)
        .filter(|d| qrels.is_relevant(topic, d.as_ref()))
        .count();
    hits as f64 / cutoff as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub ap: f64,
    pub rr: f64,
    pub p_at_10: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub map_: f64,
    pub mrr: f64,
    pub p_at_10: f64,
    pub per_topic: BTreeMap<String, TopicMetrics>,
    /// Run topics the qrels judge but without any relevant document.
    pub no_relevant: Vec<String>,
    /// Run topics the qrels do not mention at all.
    pub unjudged: Vec<String>,
}

impl EvalResult {
    pub fn evaluated_topics(&self) -> usize {
        self.per_topic.len()
    }
}

/// Score every run topic that has at least one relevant judgment and
/// average over those topics.
pub fn evaluate_run(run: &RunFile, qrels: &Qrels) -> EvalResult {
    let mut result = EvalResult::default();
    for (topic, ranking) in run.rankings() {
        if !qrels.has_topic(topic) {
            log::warn!("topic {topic} has no judgments; excluded from evaluation");
            result.unjudged.push(topic.to_owned());
            continue;
        }
        if qrels.relevant_count(topic) == 0 {
            result.no_relevant.push(topic.to_owned());
            continue;
        }
        let m = TopicMetrics {
            ap: average_precision(&ranking, qrels, topic),
            rr: reciprocal_rank(&ranking, qrels, topic),
            p_at_10: precision_at(&ranking, qrels, topic, PRECISION_CUTOFF),
        };
        result.per_topic.insert(topic.to_owned(), m);
    }
    let n = result.per_topic.len();
    if n > 0 {
        let mean = |f: fn(&TopicMetrics) -> f64| result.per_topic.values().map(f).sum::<f64>() / n as f64;
        result.map_ = mean(|m| m.ap);
        result.mrr = mean(|m| m.rr);
        result.p_at_10 = mean(|m| m.p_at_10);
    }
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfId {
    Conf1,
    Conf2,
    Conf3,
    Conf4,
    Conf5,
    Conf6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryForm {
    Original,
    Filtered,
}

impl ConfId {
    pub const ALL: [ConfId; 6] = [
        ConfId::Conf1,
        ConfId::Conf2,
        ConfId::Conf3,
        ConfId::Conf4,
        ConfId::Conf5,
        ConfId::Conf6,
    ];
    /// The configurations whose output depends on `k`.
    pub const EXPANDING: [ConfId; 4] = [ConfId::Conf3, ConfId::Conf4, ConfId::Conf5, ConfId::Conf6];

    pub fn query_form(self) -> QueryForm {
        match self {
            ConfId::Conf1 | ConfId::Conf5 | ConfId::Conf6 => QueryForm::Original,
            ConfId::Conf2 | ConfId::Conf3 | ConfId::Conf4 => QueryForm::Filtered,
        }
    }

    pub fn expansion(self) -> ExpansionMode {
        match self {
            ConfId::Conf1 | ConfId::Conf2 => ExpansionMode::None,
            ConfId::Conf3 | ConfId::Conf5 => ExpansionMode::NonPersonalized,
            ConfId::Conf4 | ConfId::Conf6 => ExpansionMode::Personalized,
        }
    }

    /// The non-expanding configuration sharing this one's query form.
    pub fn baseline(self) -> ConfId {
        match self.query_form() {
            QueryForm::Original => ConfId::Conf1,
            QueryForm::Filtered => ConfId::Conf2,
        }
    }
}

impl fmt::Display for ConfId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for ConfId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConfId::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown configuration {s:?} (expected Conf1..Conf6)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub conf_id: ConfId,
    pub filtering: QueryForm,
    pub expansion: ExpansionMode,
    pub k: usize,
    pub mu: f64,
    pub top_n: usize,
}

impl ExperimentConfig {
    pub fn new(conf_id: ConfId, k: usize) -> Self {
        Self {
            conf_id,
            filtering: conf_id.query_form(),
            expansion: conf_id.expansion(),
            k,
            mu: ScoringConfig::default().mu,
            top_n: 1000,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.filtering != self.conf_id.query_form() || self.expansion != self.conf_id.expansion() {
            return Err(EvalError::ConfigMismatch(
                self.conf_id,
                self.conf_id.query_form(),
                self.conf_id.expansion(),
            ));
        }
        ScoringConfig { mu: self.mu }.validate()?;
        if self.top_n == 0 {
            return Err(IndexError::InvalidTopN.into());
        }
        Ok(())
    }
}

/// Everything a configuration run reads.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<'a> {
    pub index: &'a InvertedIndex,
    pub models: &'a ModelRegistry,
    pub stoplists: &'a StopLists,
    pub normalization: &'a NormalizationConfig,
    pub run_tag: &'a str,
    /// Skip topics whose embedding model was trained on too little text.
    pub skip_undertrained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub topic_id: String,
    pub conf: ConfId,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ConfigurationRun {
    pub run: RunFile,
    /// Expanded queries of the topics that ran, for expanding configurations.
    pub expansions: Vec<ExpandedQuery>,
    pub skips: Vec<SkipRecord>,
}

pub fn skips_jsonl<'a>(skips: impl IntoIterator<Item = &'a SkipRecord>) -> String {
    skips
        .into_iter()
        .map(|s| serde_json::to_string(s).expect("skip record serializes") + "\n")
        .collect()
}

fn dedup(terms: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    terms.into_iter().filter(|t| seen.insert(t.clone())).collect()
}

enum TopicOutcome {
    Ranked(Vec<RunEntry>, Option<ExpandedQuery>),
    Skipped(SkipReason),
}

fn run_topic(cfg: &ExperimentConfig, topic: &Topic, ctx: &RunContext<'_>) -> Result<TopicOutcome, EvalError> {
    let original = analyze(&topic.query_text, ctx.normalization);
    let form = match cfg.filtering {
        QueryForm::Original => original,
        QueryForm::Filtered => filter_query(&original, ctx.stoplists),
    };
    let model = match ctx.models.resolve(cfg.expansion, &topic.user_id) {
        Ok(m) => m,
        Err(reason) => return Ok(TopicOutcome::Skipped(reason)),
    };
    if let Some(m) = model {
        if ctx.skip_undertrained && m.is_undertrained() {
            let reason = match cfg.expansion {
                ExpansionMode::Personalized => SkipReason::UndertrainedUserModel {
                    user_id: topic.user_id.clone(),
                },
                _ => SkipReason::UndertrainedGlobalModel,
            };
            return Ok(TopicOutcome::Skipped(reason));
        }
    }
    let (terms, expanded) = match model {
        Some(m) => {
            let es = select_embeddings(&form, m, cfg.k);
            let q = expand_query(&topic.topic_id, &form, &es);
            (q.all_terms.clone(), Some(q))
        }
        None => (dedup(form), None),
    };
    let hits = ctx
        .index
        .search(&QueryTerm::unweighted(&terms), &ScoringConfig { mu: cfg.mu }, cfg.top_n)?;
    if hits.is_empty() {
        return Ok(TopicOutcome::Skipped(SkipReason::EmptyQuery));
    }
    let entries = hits
        .into_iter()
        .enumerate()
        .map(|(i, h)| RunEntry {
            topic_id: topic.topic_id.clone(),
            doc_id: h.doc_id,
            rank: i + 1,
            score: h.score,
        })
        .collect();
    Ok(TopicOutcome::Ranked(entries, expanded))
}

/// Run one configuration over `topics` (in the given order). Topics are
/// processed in parallel; output order and bytes do not depend on
/// scheduling.
pub fn run_configuration(
    cfg: &ExperimentConfig,
    topics: &[Topic],
    ctx: &RunContext<'_>,
) -> Result<ConfigurationRun, EvalError> {
    cfg.validate()?;
    let outcomes: Vec<TopicOutcome> = topics
        .par_iter()
        .map(|t| run_topic(cfg, t, ctx))
        .collect::<Result<_, _>>()?;
    let mut out = ConfigurationRun {
        run: RunFile {
            run_tag: ctx.run_tag.to_owned(),
            entries: Vec::new(),
        },
        ..Default::default()
    };
    for (topic, outcome) in topics.iter().zip(outcomes) {
        match outcome {
            TopicOutcome::Ranked(entries, expanded) => {
                out.run.entries.extend(entries);
                out.expansions.extend(expanded);
            }
            TopicOutcome::Skipped(reason) => out.skips.push(SkipRecord {
                topic_id: topic.topic_id.clone(),
                conf: cfg.conf_id,
                reason: reason.to_string(),
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub conf: ConfId,
    pub k: usize,
    pub map: f64,
    pub mrr: f64,
    pub p10: f64,
}

/// MAP/MRR/P@10 per (configuration, k), as plotted against k.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["conf", "k", "map", "mrr", "p10"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.conf.to_string(),
                r.k.to_string(),
                format!("{:.4}", r.map),
                format!("{:.4}", r.mrr),
                format!("{:.4}", r.p10),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, EvalError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let err = |message: String| EvalError::SweepFormat { line, message };
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if rec.len() != 5 {
                return Err(err(format!("expected 5 columns, found {}", rec.len())));
            }
            let real = |j: usize| rec[j].parse::<f64>().map_err(|e| err(format!("column {j}: {e}")));
            rows.push(SweepRow {
                conf: rec[0].parse().map_err(err)?,
                k: rec[1].parse().map_err(|e| err(format!("k: {e}")))?,
                map: real(2)?,
                mrr: real(3)?,
                p10: real(4)?,
            });
        }
        Ok(Self { rows })
    }
}

/// One evaluated point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub config: ExperimentConfig,
    pub outcome: ConfigurationRun,
    pub result: EvalResult,
}

impl SweepCell {
    pub fn row(&self) -> SweepRow {
        SweepRow {
            conf: self.config.conf_id,
            k: self.config.k,
            map: self.result.map_,
            mrr: self.result.mrr,
            p10: self.result.p_at_10,
        }
    }
}

/// Evaluate the reference configurations Conf1 and Conf2 once (k=0), then
/// every expanding configuration in `confs` for each k in `k_range`.
pub fn sweep_k(
    confs: &[ConfId],
    k_range: std::ops::RangeInclusive<usize>,
    template: &ExperimentConfig,
    topics: &[Topic],
    qrels: &Qrels,
    ctx: &RunContext<'_>,
) -> Result<(SweepTable, Vec<SweepCell>), EvalError> {
    let mut cells = Vec::new();
    let points = [ConfId::Conf1, ConfId::Conf2].into_iter().map(|c| (c, 0)).chain(
        confs
            .iter()
            .filter(|c| c.expansion() != ExpansionMode::None)
            .flat_map(|&c| k_range.clone().map(move |k| (c, k))),
    );
    for (conf, k) in points {
        let config = ExperimentConfig {
            k,
            ..ExperimentConfig {
                mu: template.mu,
                top_n: template.top_n,
                ..ExperimentConfig::new(conf, k)
            }
        };
        let outcome = run_configuration(&config, topics, ctx)?;
        let result = evaluate_run(&outcome.run, qrels);
        cells.push(SweepCell {
            config,
            outcome,
            result,
        });
    }
    let table = SweepTable {
        rows: cells.iter().map(SweepCell::row).collect(),
    };
    Ok((table, cells))
}
