use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbTask {
    pub id: String,
    pub question: String,
    /// Database file, relative to the task file's directory unless absolute.
    pub db: String,
    pub gold_sql: String,
    pub requires_content: bool,
    /// Tool calls that build `gold_sql` clause by clause.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_actions: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KbCategory {
    Counting,
    Superlative,
    None,
}

impl KbCategory {
    pub const ALL: [KbCategory; 3] = [KbCategory::Counting, KbCategory::Superlative, KbCategory::None];
}

impl fmt::Display for KbCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KbCategory::Counting => "Counting",
            KbCategory::Superlative => "Superlative",
            KbCategory::None => "None",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoldAnswer {
    Entities { entities: Vec<String> },
    Count { count: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbTask {
    pub id: String,
    pub question: String,
    pub entities: Vec<String>,
    pub category: KbCategory,
    pub gold_answer: GoldAnswer,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_actions: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate task id {0}")]
    DuplicateId(String),
}

/// Parses JSON lines, skipping blank lines.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, TaskError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| TaskError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn read(path: &Path) -> Result<String, TaskError> {
    std::fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn unique<T>(tasks: Vec<T>, id: impl Fn(&T) -> &str) -> Result<Vec<T>, TaskError> {
    let mut seen = std::collections::HashSet::new();
    for t in &tasks {
        if !seen.insert(id(t).to_string()) {
            return Err(TaskError::DuplicateId(id(t).to_string()));
        }
    }
    Ok(tasks)
}

pub fn parse_kb_tasks(text: &str) -> Result<Vec<KbTask>, TaskError> {
    unique(parse_jsonl(text)?, |t: &KbTask| &t.id)
}

pub fn parse_db_tasks(text: &str) -> Result<Vec<DbTask>, TaskError> {
    unique(parse_jsonl(text)?, |t: &DbTask| &t.id)
}

pub fn load_kb_tasks(path: impl AsRef<Path>) -> Result<Vec<KbTask>, TaskError> {
    parse_kb_tasks(&read(path.as_ref())?)
}

pub fn load_db_tasks(path: impl AsRef<Path>) -> Result<Vec<DbTask>, TaskError> {
    parse_db_tasks(&read(path.as_ref())?)
}
