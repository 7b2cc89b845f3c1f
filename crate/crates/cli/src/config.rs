//! Pipeline configuration: a TOML file with one section per module,
//! `--set section.key=value` overrides and environment overrides for paths.

use std::path::{Path, PathBuf};

use pqe_core::eval::ConfId;
use pqe_core::textprep::{NormalizationConfig, StopLists};
use pqe_core::{ScoringConfig, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variables that override `[paths]` entries.
pub const PATH_ENV: [(&str, &str); 8] = [
    ("PQE_DOCUMENTS", "documents"),
    ("PQE_USERS", "users"),
    ("PQE_TOPICS", "topics"),
    ("PQE_QRELS", "qrels"),
    ("PQE_OUTPUT_DIR", "output_dir"),
    ("PQE_MODEL_DIR", "model_dir"),
    ("PQE_STOPWORDS", "stopwords"),
    ("PQE_STOP_ADJECTIVES", "stop_adjectives"),
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub documents: Option<PathBuf>,
    pub users: Option<PathBuf>,
    pub topics: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Defaults to `<output_dir>/models`.
    pub model_dir: Option<PathBuf>,
    /// Bundled lists are used when unset.
    pub stopwords: Option<PathBuf>,
    pub stop_adjectives: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub global: TrainingConfig,
    pub personalized: TrainingConfig,
}

impl Default for EmbedSection {
    fn default() -> Self {
        Self {
            global: TrainingConfig::default(),
            personalized: TrainingConfig::personalized(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpandSection {
    /// Expansion terms per query term for single runs.
    pub k: usize,
    /// Skip topics whose model is flagged undertrained instead of
    /// expanding with it.
    pub skip_undertrained: bool,
}

impl Default for ExpandSection {
    fn default() -> Self {
        Self {
            k: 3,
            skip_undertrained: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub top_n: usize,
    pub run_tag: String,
    pub confs: Vec<ConfId>,
    /// Restrict experiments to these topic ids; empty means all topics.
    pub topics: Vec<String>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            top_n: 1000,
            run_tag: "pqe".into(),
            confs: ConfId::ALL.to_vec(),
            topics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds every stochastic component; overrides the embed seeds.
    pub seed: u64,
    pub paths: PathsConfig,
    pub textprep: NormalizationConfig,
    pub index: ScoringConfig,
    pub embed: EmbedSection,
    pub expand: ExpandSection,
    pub eval: EvalSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            paths: PathsConfig::default(),
            textprep: NormalizationConfig::default(),
            index: ScoringConfig::default(),
            embed: EmbedSection::default(),
            expand: ExpandSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Parse `a.b.c=value` into a key path and a TOML value. Values that are
/// not valid TOML are taken as strings.
fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("override {spec:?} has an empty key segment")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    Ok((path, value))
}

fn set_path(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut table = root;
    for p in parents {
        table = table
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{} is not a section", path.join("."))))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl PipelineConfig {
    /// Load `file` (if any), apply environment path overrides, then
    /// `--set` overrides, in that order. Relative paths in the file are
    /// resolved against its directory.
    pub fn load(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        overrides: &[String],
    ) -> Result<Self, CliError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::MissingArtifact(format!("config file {}: {e}", path.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?
            }
            None => toml::Table::new(),
        };
        let base = file.and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
        if let Some(paths) = table.get_mut("paths").and_then(toml::Value::as_table_mut) {
            for (_, value) in paths.iter_mut() {
                if let Some(s) = value.as_str() {
                    let p = Path::new(s);
                    if p.is_relative() {
                        *value = toml::Value::String(base.join(p).to_string_lossy().into_owned());
                    }
                }
            }
        }
        for (var, key) in PATH_ENV {
            if let Some(v) = env(var).filter(|v| !v.is_empty()) {
                set_path(&mut table, &["paths".into(), key.into()], toml::Value::String(v))?;
            }
        }
        for spec in overrides {
            let (path, value) = parse_override(spec)?;
            set_path(&mut table, &path, value)?;
        }
        let mut cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_owned()))?;
        cfg.embed.global.seed = cfg.seed;
        cfg.embed.personalized.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.index.validate().map_err(|e| invalid(&e))?;
        self.embed.global.validate().map_err(|e| invalid(&e))?;
        self.embed.personalized.validate().map_err(|e| invalid(&e))?;
        if self.eval.top_n == 0 {
            return Err(CliError::Config("eval.top_n must be at least 1".into()));
        }
        if self.eval.run_tag.is_empty() || self.eval.run_tag.contains(char::is_whitespace) {
            return Err(CliError::Config("eval.run_tag must be one non-empty word".into()));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path, CliError> {
        self.paths
            .output_dir
            .as_deref()
            .ok_or_else(|| CliError::Config("paths.output_dir is not set".into()))
    }

    pub fn model_dir(&self) -> Result<PathBuf, CliError> {
        match &self.paths.model_dir {
            Some(p) => Ok(p.clone()),
            None => Ok(self.output_dir()?.join("models")),
        }
    }

    /// A configured input path that must exist.
    pub fn input(&self, key: &str) -> Result<&Path, CliError> {
        let value = match key {
            "documents" => &self.paths.documents,
            "users" => &self.paths.users,
            "topics" => &self.paths.topics,
            "qrels" => &self.paths.qrels,
            _ => unreachable!("unknown input key {key}"),
        };
        let path = value
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("paths.{key} is not set")))?;
        if !path.exists() {
            return Err(CliError::MissingArtifact(format!("{key} file {}", path.display())));
        }
        Ok(path)
    }

    pub fn stoplists(&self) -> Result<StopLists, CliError> {
        use pqe_core::textprep::StopListError;
        StopLists::with_overrides(self.paths.stopwords.as_deref(), self.paths.stop_adjectives.as_deref()).map_err(|e| {
            match e {
                StopListError::Io { .. } => CliError::MissingArtifact(e.to_string()),
                StopListError::NotAToken { .. } => CliError::Config(e.to_string()),
            }
        })
    }
}
