//! The pipeline commands. Each reads upstream artifacts from the output
//! directory, names the first one missing, and records a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use pqe_core::corpus::{self, build_profile_document, DocumentStore, Qrels, Topic, UserProfile};
use pqe_core::embed::{self, build_training_stream, EmbeddingModel, TrainingMode, TrainingSource};
use pqe_core::eval::{
    self, evaluate_run, run_configuration, skips_jsonl, ConfId, ConfigurationRun, EvalResult, ExperimentConfig,
    RunContext, RunFile, SkipRecord,
};
use pqe_core::expand::{audit_jsonl, ExpansionMode, ModelRegistry};
use pqe_core::index::{InvertedIndex, QueryTerm};
use pqe_core::textprep::{analyze, filter_query};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifacts::{sha256_hex, OutputSet};
use crate::config::PipelineConfig;
use crate::error::CliError;

pub const DOCUMENTS_ARTIFACT: &str = "corpus/documents.json";
pub const USERS_ARTIFACT: &str = "corpus/users.json";
pub const INDEX_ARTIFACT: &str = "index/index.json";
pub const GLOBAL_MODEL: &str = "global.vec";
pub const USER_MODEL_DIR: &str = "users";
pub const USER_SKIPS: &str = "skipped.jsonl";

fn require(path: &Path, produced_by: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact(format!(
            "{} (run `pqe {produced_by}` first)",
            path.display()
        )))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, produced_by: &str) -> Result<T, CliError> {
    require(path, produced_by)?;
    let bytes = std::fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// File name of a user's model. Ids that are not plain file names are
/// replaced by a digest.
pub fn user_model_file(user_id: &str) -> String {
    let plain = !user_id.is_empty()
        && !user_id.starts_with('.')
        && user_id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
    if plain {
        format!("{user_id}.vec")
    } else {
        format!("u-{}.vec", &sha256_hex(user_id.as_bytes())[..16])
    }
}

pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<String, CliError> {
    let docs_path = cfg.input("documents")?;
    let users_path = cfg.input("users")?;
    let out = cfg.output_dir()?;
    let mut set = OutputSet::begin(
        out,
        "ingest",
        "ingest",
        json!({ "textprep": cfg.textprep }),
        cfg.seed,
        &[docs_path, users_path],
    )?;
    let (store, doc_report) = corpus::ingest_documents(docs_path, &cfg.textprep)?;
    let (users, user_report) = corpus::ingest_users(users_path)?;
    set.write(DOCUMENTS_ARTIFACT, serde_json::to_vec(&store)?)?;
    set.write(USERS_ARTIFACT, serde_json::to_vec(&users)?)?;
    set.finish(json!({ "documents": doc_report, "users": user_report }))?;
    Ok(format!(
        "ingested {} documents ({} malformed, {} duplicate) and {} users ({} rejected)",
        doc_report.accepted,
        doc_report.malformed.len(),
        doc_report.duplicates.len(),
        user_report.accepted,
        user_report.malformed.len() + user_report.duplicates.len()
    ))
}

pub fn cmd_index(cfg: &PipelineConfig) -> Result<String, CliError> {
    let out = cfg.output_dir()?;
    let docs = out.join(DOCUMENTS_ARTIFACT);
    let store: DocumentStore = read_json(&docs, "ingest")?;
    let mut set = OutputSet::begin(out, "index", "index", json!({}), cfg.seed, &[&docs])?;
    let index = InvertedIndex::build(&store)?;
    set.write(INDEX_ARTIFACT, index.to_json_bytes())?;
    let summary = json!({
        "documents": index.num_docs(),
        "tokens": index.total_tokens(),
        "vocabulary": index.vocabulary().count(),
    });
    set.finish(summary.clone())?;
    Ok(format!("indexed {}", summary))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainScope {
    Global,
    User(String),
    AllUsers,
}

impl TrainScope {
    pub fn parse(values: &[String]) -> Result<Self, CliError> {
        match values {
            [s] if s == "global" => Ok(Self::Global),
            [s] if s == "all-users" => Ok(Self::AllUsers),
            [s, id] if s == "user" => Ok(Self::User(id.clone())),
            _ => Err(CliError::Config(format!(
                "--scope expects `global`, `user <id>` or `all-users`, got {:?}",
                values.join(" ")
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSkip {
    pub user_id: String,
    pub reason: String,
}

fn write_model(set: &mut OutputSet, rel: &Path, model: &EmbeddingModel) -> Result<(), CliError> {
    let (vectors, meta) = embed::encode_model(model);
    set.write(rel, vectors)?;
    set.write(embed::sidecar_path(rel), meta)?;
    Ok(())
}

fn train_user(
    user: &UserProfile,
    store: &DocumentStore,
    cfg: &PipelineConfig,
) -> Result<EmbeddingModel, embed::EmbedError> {
    let profile = build_profile_document(user, store);
    let stream = build_training_stream(TrainingSource::Profile(&profile));
    embed::train(&stream, &cfg.embed.personalized, TrainingMode::Permissive)
}

pub fn cmd_train(cfg: &PipelineConfig, scope: &TrainScope) -> Result<String, CliError> {
    let out = cfg.output_dir()?;
    let model_dir = cfg.model_dir()?;
    let docs = out.join(DOCUMENTS_ARTIFACT);
    let store: DocumentStore = read_json(&docs, "ingest")?;
    match scope {
        TrainScope::Global => {
            let mut set = OutputSet::begin(
                out,
                "train",
                "train-global",
                json!({ "scope": "global", "embed": cfg.embed.global }),
                cfg.seed,
                &[&docs],
            )?;
            let stream = build_training_stream(TrainingSource::Global(&store));
            let model = embed::train(&stream, &cfg.embed.global, TrainingMode::Strict)?;
            write_model(&mut set, &model_dir.join(GLOBAL_MODEL), &model)?;
            let report = model.report.clone();
            set.finish(json!({ "vocabulary": model.len(), "report": report }))?;
            Ok(format!(
                "trained global model: {} terms from {} tokens",
                model.len(),
                report.stream_tokens
            ))
        }
        TrainScope::User(user_id) => {
            let users_path = out.join(USERS_ARTIFACT);
            let users: Vec<UserProfile> = read_json(&users_path, "ingest")?;
            let user = users
                .iter()
                .find(|u| &u.user_id == user_id)
                .ok_or_else(|| CliError::MissingArtifact(format!("user {user_id} in {}", users_path.display())))?;
            let mut set = OutputSet::begin(
                out,
                "train",
                &format!("train-user-{}", user_model_file(user_id).trim_end_matches(".vec")),
                json!({ "scope": "user", "user_id": user_id, "embed": cfg.embed.personalized }),
                cfg.seed,
                &[&docs, &users_path],
            )?;
            let model =
                train_user(user, &store, cfg).map_err(|e| CliError::Other(anyhow::anyhow!("user {user_id}: {e}")))?;
            let rel = model_dir.join(USER_MODEL_DIR).join(user_model_file(user_id));
            write_model(&mut set, &rel, &model)?;
            set.finish(json!({ "user_id": user_id, "vocabulary": model.len(), "report": model.report }))?;
            Ok(format!(
                "trained model for user {user_id}: {} terms{}",
                model.len(),
                if model.is_undertrained() { " (undertrained)" } else { "" }
            ))
        }
        TrainScope::AllUsers => {
            let users_path = out.join(USERS_ARTIFACT);
            let users: Vec<UserProfile> = read_json(&users_path, "ingest")?;
            let mut set = OutputSet::begin(
                out,
                "train",
                "train-all-users",
                json!({ "scope": "all-users", "embed": cfg.embed.personalized }),
                cfg.seed,
                &[&docs, &users_path],
            )?;
            let results: Vec<_> = users.par_iter().map(|u| train_user(u, &store, cfg)).collect();
            let mut skips = Vec::new();
            let mut trained = Vec::new();
            let mut undertrained = Vec::new();
            for (user, result) in users.iter().zip(results) {
                match result {
                    Ok(model) => {
                        let rel = model_dir.join(USER_MODEL_DIR).join(user_model_file(&user.user_id));
                        write_model(&mut set, &rel, &model)?;
                        if model.is_undertrained() {
                            undertrained.push(user.user_id.clone());
                        }
                        trained.push(user.user_id.clone());
                    }
                    Err(e) => {
                        log::warn!("no model for user {}: {e}", user.user_id);
                        skips.push(UserSkip {
                            user_id: user.user_id.clone(),
                            reason: e.to_string(),
                        });
                    }
                }
            }
            let skip_lines: String = skips
                .iter()
                .map(|s| serde_json::to_string(s).expect("skip serializes") + "\n")
                .collect();
            set.write(model_dir.join(USER_MODEL_DIR).join(USER_SKIPS), skip_lines)?;
            set.finish(json!({ "trained": trained, "undertrained": undertrained, "failures": skips }))?;
            Ok(format!(
                "trained {} user models ({} undertrained), {} failed",
                trained.len(),
                undertrained.len(),
                skips.len()
            ))
        }
    }
}

/// Everything the retrieval commands read, loaded once.
pub struct RetrievalInputs {
    pub index: InvertedIndex,
    pub users: Vec<UserProfile>,
    pub topics: Vec<Topic>,
    pub models: ModelRegistry,
    pub stoplists: pqe_core::StopLists,
    /// Files whose content determines the outputs.
    pub files: Vec<PathBuf>,
}

impl RetrievalInputs {
    pub fn load(cfg: &PipelineConfig, modes: &[ExpansionMode]) -> Result<Self, CliError> {
        let out = cfg.output_dir()?;
        let index_path = out.join(INDEX_ARTIFACT);
        require(&index_path, "index")?;
        let index = InvertedIndex::load(&index_path)?;
        let users_path = out.join(USERS_ARTIFACT);
        let users: Vec<UserProfile> = read_json(&users_path, "ingest")?;
        let topics_path = cfg.input("topics")?.to_owned();
        let mut topics = corpus::load_topics(&topics_path)?;
        if !cfg.eval.topics.is_empty() {
            topics.retain(|t| cfg.eval.topics.contains(&t.topic_id));
        }
        let mut files = vec![index_path, users_path, topics_path];
        files.extend(cfg.paths.stopwords.iter().cloned());
        files.extend(cfg.paths.stop_adjectives.iter().cloned());

        let model_dir = cfg.model_dir()?;
        let mut models = ModelRegistry::default();
        if modes.contains(&ExpansionMode::NonPersonalized) {
            let path = model_dir.join(GLOBAL_MODEL);
            require(&path, "train --scope global")?;
            models.global = Some(Arc::new(embed::load_model(&path)?));
            files.push(embed::sidecar_path(&path));
            files.push(path);
        }
        if modes.contains(&ExpansionMode::Personalized) {
            let dir = model_dir.join(USER_MODEL_DIR);
            require(&dir, "train --scope all-users")?;
            let skips = dir.join(USER_SKIPS);
            if skips.exists() {
                for line in std::fs::read_to_string(&skips)?
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                {
                    let s: UserSkip = serde_json::from_str(line)?;
                    models.failures.insert(s.user_id, s.reason);
                }
                files.push(skips);
            }
            let mut wanted: Vec<&str> = topics.iter().map(|t| t.user_id.as_str()).collect();
            wanted.sort_unstable();
            wanted.dedup();
            for user_id in wanted {
                let path = dir.join(user_model_file(user_id));
                if path.exists() {
                    models
                        .users
                        .insert(user_id.to_owned(), Arc::new(embed::load_model(&path)?));
                    files.push(embed::sidecar_path(&path));
                    files.push(path);
                }
            }
        }
        Ok(Self {
            index,
            users,
            topics,
            models,
            stoplists: cfg.stoplists()?,
            files,
        })
    }

    pub fn context<'a>(&'a self, cfg: &'a PipelineConfig) -> RunContext<'a> {
        RunContext {
            index: &self.index,
            models: &self.models,
            stoplists: &self.stoplists,
            normalization: &cfg.textprep,
            run_tag: &cfg.eval.run_tag,
            skip_undertrained: cfg.expand.skip_undertrained,
        }
    }

    /// Topics whose user has a profile, plus skip records for the others.
    pub fn resolved_topics(&self, conf: ConfId) -> (Vec<Topic>, Vec<SkipRecord>) {
        let unresolved: Vec<&Topic> = corpus::unresolved_topics(&self.topics, &self.users);
        let skips = unresolved
            .iter()
            .map(|t| SkipRecord {
                topic_id: t.topic_id.clone(),
                conf,
                reason: format!("user {} has no profile", t.user_id),
            })
            .collect();
        let topics = self
            .topics
            .iter()
            .filter(|t| !unresolved.iter().any(|u| u.topic_id == t.topic_id))
            .cloned()
            .collect();
        (topics, skips)
    }

    pub fn run(&self, cfg: &PipelineConfig, conf: ConfId, k: usize) -> Result<ConfigurationRun, CliError> {
        let ec = experiment_config(cfg, conf, k);
        let (topics, mut skips) = self.resolved_topics(conf);
        let mut outcome = run_configuration(&ec, &topics, &self.context(cfg))?;
        skips.append(&mut outcome.skips);
        skips.sort_by(|a, b| a.topic_id.cmp(&b.topic_id));
        outcome.skips = skips;
        Ok(outcome)
    }
}

fn experiment_config(cfg: &PipelineConfig, conf: ConfId, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        mu: cfg.index.mu,
        top_n: cfg.eval.top_n,
        ..ExperimentConfig::new(conf, k)
    }
}

fn retrieval_view(cfg: &PipelineConfig) -> serde_json::Value {
    json!({
        "textprep": cfg.textprep,
        "index": cfg.index,
        "expand": cfg.expand,
        "eval": cfg.eval,
    })
}

fn as_paths(files: &[PathBuf]) -> Vec<&Path> {
    files.iter().map(PathBuf::as_path).collect()
}

pub fn cmd_expand(cfg: &PipelineConfig, conf: ConfId, k: usize) -> Result<String, CliError> {
    if conf.expansion() == ExpansionMode::None {
        return Err(CliError::Config(format!("{conf} does not expand queries")));
    }
    let inputs = RetrievalInputs::load(cfg, &[conf.expansion()])?;
    let mut set = OutputSet::begin(
        cfg.output_dir()?,
        "expand",
        &format!("expand-{conf}-k{k}"),
        json!({ "conf": conf, "k": k, "settings": retrieval_view(cfg) }),
        cfg.seed,
        &as_paths(&inputs.files),
    )?;
    let outcome = inputs.run(cfg, conf, k)?;
    set.write(
        format!("expansions/{conf}-k{k}.jsonl"),
        audit_jsonl(&outcome.expansions),
    )?;
    set.write(
        format!("expansions/{conf}-k{k}.skips.jsonl"),
        skips_jsonl(&outcome.skips),
    )?;
    set.finish(json!({ "expanded": outcome.expansions.len(), "skipped": outcome.skips.len() }))?;
    Ok(format!(
        "expanded {} topics with {conf} at k={k}, skipped {}",
        outcome.expansions.len(),
        outcome.skips.len()
    ))
}

/// Ad-hoc query: rank the collection and print the top hits.
pub fn search_query(
    cfg: &PipelineConfig,
    conf: ConfId,
    k: usize,
    query: &str,
    user_id: Option<&str>,
    limit: usize,
) -> Result<String, CliError> {
    let inputs = RetrievalInputs::load(cfg, &[conf.expansion()])?;
    let topic = Topic {
        topic_id: "query".into(),
        user_id: user_id.unwrap_or_default().to_owned(),
        query_text: query.to_owned(),
    };
    if conf.expansion() == ExpansionMode::Personalized && user_id.is_none() {
        return Err(CliError::Config(format!("{conf} needs --user")));
    }
    let ec = ExperimentConfig {
        top_n: limit.max(1),
        ..experiment_config(cfg, conf, k)
    };
    let outcome = run_configuration(&ec, std::slice::from_ref(&topic), &inputs.context(cfg))?;
    if let Some(skip) = outcome.skips.first() {
        return Err(CliError::Other(anyhow::anyhow!("query skipped: {}", skip.reason)));
    }
    let mut lines = Vec::new();
    if let Some(q) = outcome.expansions.first() {
        lines.push(format!("# terms: {}", q.all_terms.join(" ")));
    } else {
        let terms = analyze(query, &cfg.textprep);
        let terms = match conf.query_form() {
            eval::QueryForm::Original => terms,
            eval::QueryForm::Filtered => filter_query(&terms, &inputs.stoplists),
        };
        let indexed: Vec<String> = QueryTerm::unweighted(&terms)
            .into_iter()
            .filter(|t| inputs.index.collection_tf(&t.term) > 0)
            .map(|t| t.term)
            .collect();
        lines.push(format!("# terms: {}", indexed.join(" ")));
    }
    for e in &outcome.run.entries {
        lines.push(format!("{}\t{}\t{:.6}", e.rank, e.doc_id, e.score));
    }
    Ok(lines.join("\n"))
}

pub fn cmd_search(cfg: &PipelineConfig, conf: ConfId, k: usize) -> Result<String, CliError> {
    let inputs = RetrievalInputs::load(cfg, &[conf.expansion()])?;
    let mut set = OutputSet::begin(
        cfg.output_dir()?,
        "search",
        &format!("search-{conf}-k{k}"),
        json!({ "conf": conf, "k": k, "settings": retrieval_view(cfg) }),
        cfg.seed,
        &as_paths(&inputs.files),
    )?;
    let outcome = inputs.run(cfg, conf, k)?;
    set.write(format!("search/{conf}-k{k}.run"), outcome.run.to_trec_string())?;
    set.write(format!("search/{conf}-k{k}.skips.jsonl"), skips_jsonl(&outcome.skips))?;
    set.finish(json!({ "entries": outcome.run.entries.len(), "skipped": outcome.skips.len() }))?;
    Ok(format!(
        "{conf} k={k}: {} run entries, {} topics skipped",
        outcome.run.entries.len(),
        outcome.skips.len()
    ))
}

fn metrics_json(r: &EvalResult) -> serde_json::Value {
    json!({
        "map": r.map_,
        "mrr": r.mrr,
        "p10": r.p_at_10,
        "evaluated_topics": r.evaluated_topics(),
        "no_relevant": r.no_relevant,
        "unjudged": r.unjudged,
        "per_topic": r.per_topic,
    })
}

pub fn cmd_eval(cfg: &PipelineConfig, run_path: &Path) -> Result<String, CliError> {
    require(run_path, "search")?;
    let qrels_path = cfg.input("qrels")?;
    let qrels = corpus::load_qrels(qrels_path)?;
    let run = RunFile::load(run_path)?;
    let stem = run_path
        .file_stem()
        .map_or_else(|| "run".to_owned(), |s| s.to_string_lossy().into_owned());
    let mut set = OutputSet::begin(
        cfg.output_dir()?,
        "eval",
        &format!("eval-{stem}"),
        json!({}),
        cfg.seed,
        &[run_path, qrels_path],
    )?;
    let result = evaluate_run(&run, &qrels);
    let body = metrics_json(&result);
    set.write(format!("eval/{stem}.json"), serde_json::to_string_pretty(&body)? + "\n")?;
    set.finish(json!({ "map": result.map_, "mrr": result.mrr, "p10": result.p_at_10 }))?;
    Ok(format!(
        "{stem}: MAP {:.4} MRR {:.4} P@10 {:.4} over {} topics",
        result.map_,
        result.mrr,
        result.p_at_10,
        result.evaluated_topics()
    ))
}

/// Parse `A..B` (inclusive).
pub fn parse_k_range(spec: &str) -> Result<std::ops::RangeInclusive<usize>, CliError> {
    let bad = || CliError::Config(format!("--sweep-k expects A..B with 1 <= A <= B, got {spec:?}"));
    let (a, b) = spec.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

pub fn cmd_experiment(
    cfg: &PipelineConfig,
    k: usize,
    sweep: Option<std::ops::RangeInclusive<usize>>,
) -> Result<String, CliError> {
    let confs = &cfg.eval.confs;
    if confs.is_empty() {
        return Err(CliError::Config("eval.confs is empty".into()));
    }
    let mut modes: Vec<ExpansionMode> = confs.iter().map(|c| c.expansion()).collect();
    if sweep.is_some() {
        modes.extend(confs.iter().map(|c| c.expansion()));
    }
    let qrels_path = cfg.input("qrels")?.to_owned();
    let qrels: Qrels = corpus::load_qrels(&qrels_path)?;
    let inputs = RetrievalInputs::load(cfg, &modes)?;
    let mut files = inputs.files.clone();
    files.push(qrels_path);
    let mut set = OutputSet::begin(
        cfg.output_dir()?,
        "experiment",
        "experiment",
        json!({
            "k": k,
            "sweep_k": sweep.as_ref().map(|r| [*r.start(), *r.end()]),
            "settings": retrieval_view(cfg),
        }),
        cfg.seed,
        &as_paths(&files),
    )?;

    let mut results = BTreeMap::new();
    let mut all_skips = Vec::new();
    for &conf in confs {
        let outcome = inputs.run(cfg, conf, k)?;
        set.write(format!("runs/{conf}.run"), outcome.run.to_trec_string())?;
        if conf.expansion() != ExpansionMode::None {
            set.write(format!("expansions/{conf}.jsonl"), audit_jsonl(&outcome.expansions))?;
        }
        results.insert(conf.to_string(), metrics_json(&evaluate_run(&outcome.run, &qrels)));
        all_skips.extend(outcome.skips);
    }
    set.write("skips.jsonl", skips_jsonl(&all_skips))?;
    set.write("results.json", serde_json::to_string_pretty(&results)? + "\n")?;

    let mut sweep_rows = 0;
    if let Some(range) = sweep {
        let expanding: Vec<ConfId> = confs
            .iter()
            .copied()
            .filter(|c| c.expansion() != ExpansionMode::None)
            .collect();
        let (topics, unresolved) = inputs.resolved_topics(ConfId::Conf1);
        let template = experiment_config(cfg, ConfId::Conf1, 0);
        let (table, cells) = eval::sweep_k(&expanding, range, &template, &topics, &qrels, &inputs.context(cfg))?;
        let mut sweep_skips = Vec::new();
        for cell in &cells {
            let (conf, k) = (cell.config.conf_id, cell.config.k);
            set.write(format!("sweep/{conf}-k{k}.run"), cell.outcome.run.to_trec_string())?;
            if conf.expansion() != ExpansionMode::None {
                set.write(
                    format!("sweep/{conf}-k{k}.expansions.jsonl"),
                    audit_jsonl(&cell.outcome.expansions),
                )?;
            }
            sweep_skips.extend(unresolved.iter().map(|s| SkipRecord { conf, ..s.clone() }));
            sweep_skips.extend(cell.outcome.skips.iter().cloned());
        }
        sweep_rows = table.rows.len();
        set.write("sweep.csv", table.to_csv())?;
        set.write("sweep/skips.jsonl", skips_jsonl(&sweep_skips))?;
    }
    let summary: Vec<String> = results
        .iter()
        .map(|(c, m)| format!("{c} MAP {:.4}", m["map"].as_f64().unwrap_or(0.0)))
        .collect();
    set.finish(json!({
        "results": results.iter().map(|(c, m)| (c.clone(), json!({"map": m["map"], "mrr": m["mrr"], "p10": m["p10"]}))).collect::<BTreeMap<_, _>>(),
        "skipped": all_skips.len(),
        "sweep_rows": sweep_rows,
    }))?;
    Ok(format!(
        "{}; {} skip records{}",
        summary.join(", "),
        all_skips.len(),
        if sweep_rows > 0 {
            format!("; sweep.csv with {sweep_rows} rows")
        } else {
            String::new()
        }
    ))
}
