//! ReAct loop: prompt construction, model-output parsing and the two control
//! schemes.
//!
//! Under error feedback the model writes a thought and an action together; a
//! failing action is answered with its error message and the model retries
//! within the same step. Under decoupled generation the model only writes the
//! thought, and the action is then picked in a separate prompt from the list
//! of actions that are legal right now.

mod env;
mod parse;
mod prompt;
mod runner;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::CompletionParams;

pub use env::{Answer, DbEnv, EnvKind, Environment, Executed, KbEnv, Rejected};
pub use parse::{parse_selection, parse_step, ParsedStep, StepParseError};
pub use prompt::{context_messages, selection_messages, serialize_context, transcript, whitespace_tokens};
pub use runner::{run_episode, run_episode_decoupled, run_episode_error_feedback};
pub use trace::{read_trace, EpisodeResult, Retry, Step, Terminal, TraceError, TraceFile, TraceSummary};

/// Appended to every error observation.
pub const RETRY_PROMPT: &str = "Please fix the error and try again.";

/// Keeps the model from writing observations of its own.
pub const STOP_SEQUENCE: &str = "\nObservation";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ErrorFeedback,
    Decoupled,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ErrorFeedback => "error_feedback",
            Scheme::Decoupled => "decoupled",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "error_feedback" => Ok(Scheme::ErrorFeedback),
            "decoupled" => Ok(Scheme::Decoupled),
            other => Err(format!("unknown scheme {other:?} (expected error_feedback or decoupled)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub scheme: Scheme,
    pub max_steps: usize,
    /// Extra model calls allowed per step after a failed action or selection.
    pub max_retries: usize,
    pub params: CompletionParams,
    /// Demonstration placed in the system prompt. `None` uses the
    /// environment's default; an empty string disables it.
    pub demonstration: Option<String>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::ErrorFeedback,
            max_steps: 15,
            max_retries: 3,
            params: CompletionParams::default(),
            demonstration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("decoupled generation needs an environment that can list its legal actions; {0} cannot")]
    DecoupledUnsupported(EnvKind),
}
