//! Models on disk use the word2vec text format: a `vocab_size dim` header,
//! then `term v_1 ... v_dim` per line. Values are written with nine
//! significant digits. Training metadata (config, report, term counts)
//! goes to a `<file>.meta.json` sidecar; output weights are not persisted.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingModel, TrainingConfig, TrainingReport, VocabEntry};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    config: TrainingConfig,
    report: TrainingReport,
    counts: Vec<u64>,
}

/// Where the metadata sidecar of the model file `path` lives.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbedError + '_ {
    move |source| EmbedError::Io {
        path: path.to_owned(),
        source,
    }
}

/// The vector file and sidecar contents, as `save_model` writes them.
pub fn encode_model(model: &EmbeddingModel) -> (String, Vec<u8>) {
    let mut out = String::with_capacity(model.len() * (model.dim() * 16 + 16));
    writeln!(out, "{} {}", model.len(), model.dim()).expect("write to string");
    for (i, v) in model.vocab().iter().enumerate() {
        out.push_str(&v.term);
        for x in model.row(i) {
            write!(out, " {x:.8e}").expect("write to string");
        }
        out.push('\n');
    }
    let sidecar = Sidecar {
        config: model.config.clone(),
        report: model.report.clone(),
        counts: model.vocab().iter().map(|v| v.count).collect(),
    };
    let json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    (out, json)
}

pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<(), EmbedError> {
    let (vectors, meta) = encode_model(model);
    fs::write(path, vectors).map_err(io_err(path))?;
    let meta_path = sidecar_path(path);
    fs::write(&meta_path, meta).map_err(io_err(&meta_path))?;
    Ok(())
}

/// Read a word2vec text file. The sidecar, when present, restores the
/// config, training report and term counts.
pub fn load_model(path: &Path) -> Result<EmbeddingModel, EmbedError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let fmt = |line: usize, message: String| EmbedError::Format {
        path: path.to_owned(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fmt(1, "missing header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| fmt(1, format!("bad header {header:?}")))?;
    let [rows, dim] = dims[..] else {
        return Err(fmt(1, format!("header needs `vocab_size dim`, got {header:?}")));
    };

    let mut vocab = Vec::with_capacity(rows);
    let mut input = Vec::with_capacity(rows * dim);
    let mut seen = std::collections::HashSet::new();
    for r in 0..rows {
        let line_no = r + 2;
        let line = lines
            .next()
            .ok_or_else(|| fmt(line_no, format!("header declares {rows} rows, file ends after {r}")))?;
        let mut fields = line.split_whitespace();
        let term = fields.next().ok_or_else(|| fmt(line_no, "empty row".into()))?;
        let values: Vec<f64> = fields
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| fmt(line_no, format!("bad value: {e}")))?;
        if values.len() != dim {
            return Err(fmt(line_no, format!("expected {dim} values, found {}", values.len())));
        }
        if !seen.insert(term.to_owned()) {
            return Err(fmt(line_no, format!("duplicate term {term:?}")));
        }
        vocab.push(VocabEntry {
            term: term.to_owned(),
            count: 0,
        });
        input.extend(values);
    }
    if let Some((extra, _)) = lines.enumerate().find(|(_, l)| !l.trim().is_empty()) {
        return Err(fmt(rows + 2 + extra, format!("more rows than the {rows} declared")));
    }

    let meta = sidecar_path(path);
    let (config, report) = match fs::read(&meta) {
        Ok(bytes) => {
            let side: Sidecar = serde_json::from_slice(&bytes).map_err(|e| EmbedError::Format {
                path: meta.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            if side.counts.len() == vocab.len() {
                for (v, c) in vocab.iter_mut().zip(&side.counts) {
                    v.count = *c;
                }
            }
            (side.config, side.report)
        }
        Err(_) => (
            TrainingConfig {
                dim,
                ..TrainingConfig::default()
            },
            TrainingReport::default(),
        ),
    };
    Ok(EmbeddingModel::from_parts(vocab, dim, input, None, config, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::cosine;

    fn model() -> EmbeddingModel {
        EmbeddingModel::from_vectors(vec![
            ("alpha", vec![0.123456789012, -3.5e-5, 2.0]),
            ("beta", vec![1.0 / 3.0, 7.25, -0.000123456789]),
            ("gamma", vec![-1.0, 1e-9, 0.5]),
        ])
    }

    #[test]
    fn round_trip_preserves_cosines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.vec");
        let mut m = model();
        m.report.undertrained = true;
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert!(back.is_undertrained());
        assert_eq!(back.len(), 3);
        for a in ["alpha", "beta", "gamma"] {
            for b in ["alpha", "beta", "gamma"] {
                let before = cosine(m.vector(a).unwrap(), m.vector(b).unwrap()).unwrap();
                let after = cosine(back.vector(a).unwrap(), back.vector(b).unwrap()).unwrap();
                assert!((before - after).abs() < 1e-6);
            }
        }
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("3 3\nalpha "));
    }

    #[test]
    fn arity_errors_report_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vec");
        let mut rows = String::from("10 2\n");
        for i in 0..9 {
            rows.push_str(&format!("w{i} 0.1 0.2\n"));
        }
        fs::write(&path, &rows).unwrap();
        match load_model(&path) {
            Err(EmbedError::Format { line, .. }) => assert_eq!(line, 11),
            other => panic!("{other:?}"),
        }

        fs::write(&path, "2 3\na 1 2 3\nb 1 2\n").unwrap();
        match load_model(&path) {
            Err(EmbedError::Format { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("expected 3"));
            }
            other => panic!("{other:?}"),
        }

        fs::write(&path, "1 1\na 1\nb 2\n").unwrap();
        assert!(matches!(load_model(&path), Err(EmbedError::Format { line: 3, .. })));
        fs::write(&path, "x y\n").unwrap();
        assert!(matches!(load_model(&path), Err(EmbedError::Format { line: 1, .. })));
    }
}
