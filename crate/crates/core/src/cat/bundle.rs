use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ctl::{self, Program, SyntaxError, Value};
use crate::envs::{EnvKind, Scale};

/// Minimum number of failure programs per bundle.
pub const MIN_FAILURES: usize = 3;

/// A task with its executable oracle. Programs are stored as CTL source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatBundle {
    pub instruction: String,
    pub verify: String,
    pub solution: String,
    pub failures: Vec<String>,
    pub env_kind: EnvKind,
    pub base_seed: u64,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// All programs of a bundle, parsed.
#[derive(Debug, Clone)]
pub struct ParsedBundle {
    pub verify: Program,
    pub solution: Program,
    pub failures: Vec<Program>,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleIoError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CatBundle {
    pub fn parse_programs(&self) -> Result<ParsedBundle, (String, SyntaxError)> {
        let verify = ctl::parse(&self.verify).map_err(|e| ("verify".to_string(), e))?;
        let solution = ctl::parse(&self.solution).map_err(|e| ("solution".to_string(), e))?;
        let failures = self
            .failures
            .iter()
            .enumerate()
            .map(|(i, f)| ctl::parse(f).map_err(|e| (format!("failure[{i}]"), e)))
            .collect::<Result<_, _>>()?;
        Ok(ParsedBundle { verify, solution, failures })
    }

    /// `metadata.task_id` when present, else a content hash.
    pub fn task_id(&self) -> String {
        if let Some(id) = self.metadata.get("task_id").and_then(|v| v.as_str()) {
            return id.to_string();
        }
        let line = serde_json::to_vec(self).unwrap_or_default();
        format!("{}-{}", self.env_kind, &hex::encode(Sha256::digest(line))[..12])
    }

    /// `metadata.scale` when present, else small.
    pub fn scale(&self) -> Scale {
        self.metadata.get("scale").and_then(|v| v.as_str()).and_then(|s| s.parse().ok()).unwrap_or_default()
    }

    pub fn planted_flaw(&self) -> Option<&str> {
        self.metadata.get("planted_flaw").and_then(|v| v.as_str())
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("bundles always serialize")
    }
}

/// Value bound to `answer` for a submitted answer text. Blank means no answer.
pub fn answer_value(text: &str) -> Value {
    let t = text.trim();
    if t.is_empty() {
        Value::Null
    } else {
        Value::str(t)
    }
}

/// Reads one JSON record per non-blank line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, BundleIoError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| BundleIoError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        writeln!(writer, "{}", serde_json::to_string(r).map_err(std::io::Error::other)?)?;
    }
    Ok(())
}
