//! Episode records and their JSON-lines form: one object per step, then a
//! summary object.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::env::Answer;
use super::Scheme;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retry {
    pub act: String,
    pub obs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub thought: String,
    pub act: String,
    pub obs: String,
    /// Failed attempts absorbed at this step, oldest first.
    pub retries: Vec<Retry>,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    FinalAnswer,
    MaxSteps,
    /// The last step's `act` and `obs` hold the final rejected attempt; that
    /// action never ran.
    RetriesExhausted,
    TransportError,
}

impl Terminal {
    pub fn as_str(self) -> &'static str {
        match self {
            Terminal::FinalAnswer => "final_answer",
            Terminal::MaxSteps => "max_steps",
            Terminal::RetriesExhausted => "retries_exhausted",
            Terminal::TransportError => "transport_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub terminal: Terminal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub answered: bool,
    pub answer: Option<Answer>,
    pub steps: usize,
    pub input_tokens: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeResult {
    pub scheme: Scheme,
    pub steps: Vec<Step>,
    pub terminal: Terminal,
    /// Extra context for non-answer terminals.
    pub detail: Option<String>,
    pub answer: Option<Answer>,
    pub input_tokens: u64,
    pub wall_ms: u64,
    pub model_calls: usize,
}

impl EpisodeResult {
    pub fn answered(&self) -> bool {
        self.terminal == Terminal::FinalAnswer && self.answer.is_some()
    }

    pub fn retry_count(&self) -> usize {
        self.steps.iter().map(|s| s.retries.len()).sum()
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            terminal: self.terminal,
            detail: self.detail.clone(),
            answered: self.answered(),
            answer: self.answer.clone(),
            steps: self.steps.len(),
            input_tokens: self.input_tokens,
            wall_ms: self.wall_ms,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step).expect("step serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary()).expect("summary serializes"));
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceFile {
    pub steps: Vec<Step>,
    pub summary: Option<TraceSummary>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub fn read_trace(text: &str) -> Result<TraceFile, TraceError> {
    let mut file = TraceFile::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| TraceError::Malformed { line: line_no, message };
        if file.summary.is_some() {
            return Err(bad("content after the summary line".into()));
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if value.get("terminal").is_some() {
            file.summary = Some(serde_json::from_value(value).map_err(|e| bad(e.to_string()))?);
        } else {
            let step: Step = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            if file.steps.last().is_some_and(|prev| prev.t >= step.t) {
                return Err(bad(format!("step index {} does not increase", step.t)));
            }
            file.steps.push(step);
        }
    }
    Ok(file)
}
