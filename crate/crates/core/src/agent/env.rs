use std::fmt;

use serde::{Deserialize, Serialize};

use super::Scheme;
use crate::db::{self, DbSession};
use crate::kb::{self, render_list, KbAnswer, KbSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Kb,
    Db,
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Kb => "kb",
            EnvKind::Db => "db",
        })
    }
}

/// Payload of a final answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Sql { sql: String },
    Kb(KbAnswer),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Executed {
    /// Canonical rendering of the action.
    pub action: String,
    pub observation: String,
    /// Set when the action ended the episode.
    pub answer: Option<Answer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    /// The action text as written.
    pub action: String,
    /// Error message followed by the retry prompt.
    pub observation: String,
}

pub const FINAL_ANSWER: &str = "Final Answer:";

/// Splits off the payload of a `Final Answer:` line.
pub(crate) fn final_answer_payload(text: &str) -> Option<&str> {
    let t = text.trim_start();
    let head = t.get(..FINAL_ANSWER.len())?;
    head.eq_ignore_ascii_case(FINAL_ANSWER).then(|| &t[FINAL_ANSWER.len()..])
}

/// What the agent loop needs from an environment.
pub trait Environment {
    fn kind(&self) -> EnvKind;

    fn instructions(&self, scheme: Scheme) -> &'static str;

    /// Tool cards, embedded verbatim in the system prompt.
    fn tool_docs(&self) -> &'static str;

    /// Environment-specific prompt material such as the database schema.
    fn background(&self) -> Option<String> {
        None
    }

    fn default_demonstration(&self) -> Option<&'static str> {
        None
    }

    /// Lines placed right after the question.
    fn task_header(&self) -> Vec<String> {
        Vec::new()
    }

    /// Parses and runs one action written by the model.
    fn act(&mut self, text: &str) -> Result<Executed, Rejected>;

    /// Legal actions right now, when the environment can enumerate them.
    fn candidates(&self) -> Option<Vec<String>> {
        None
    }
}

pub struct KbEnv {
    pub session: KbSession,
}

impl KbEnv {
    pub fn new(session: KbSession) -> Self {
        Self { session }
    }
}

impl Environment for KbEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Kb
    }

    fn instructions(&self, scheme: Scheme) -> &'static str {
        match scheme {
            Scheme::ErrorFeedback => kb::docs::INSTRUCTIONS,
            Scheme::Decoupled => kb::docs::DECOUPLED_INSTRUCTIONS,
        }
    }

    fn tool_docs(&self) -> &'static str {
        kb::docs::TOOL_DOCS
    }

    fn default_demonstration(&self) -> Option<&'static str> {
        Some(kb::docs::DEMONSTRATION)
    }

    fn task_header(&self) -> Vec<String> {
        let entities: Vec<String> = self.session.topic_entities().iter().map(|e| e.to_string()).collect();
        vec![format!("Entities: {}", render_list(&entities, usize::MAX))]
    }

    fn act(&mut self, text: &str) -> Result<Executed, Rejected> {
        let parsed = match final_answer_payload(text) {
            Some(payload) => self.session.parse_final_answer(payload),
            None => self.session.parse_action(text),
        };
        let outcome = parsed.and_then(|action| self.session.execute(&action).map(|obs| (action, obs)));
        match outcome {
            Ok((action, obs)) => Ok(Executed {
                action: action.to_string(),
                observation: obs.text,
                answer: obs.answer.map(Answer::Kb),
            }),
            Err(e) => Err(Rejected {
                action: text.trim().to_string(),
                observation: e.render(),
            }),
        }
    }

    fn candidates(&self) -> Option<Vec<String>> {
        Some(self.session.enumerate_candidates().iter().map(|a| a.to_string()).collect())
    }
}

pub struct DbEnv {
    pub session: DbSession,
}

impl DbEnv {
    pub fn new(session: DbSession) -> Self {
        Self { session }
    }
}

impl Environment for DbEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Db
    }

    fn instructions(&self, _scheme: Scheme) -> &'static str {
        db::docs::INSTRUCTIONS
    }

    fn tool_docs(&self) -> &'static str {
        db::docs::TOOL_DOCS
    }

    fn background(&self) -> Option<String> {
        Some(format!("The database schema:\n{}", self.session.api_docs()))
    }

    fn act(&mut self, text: &str) -> Result<Executed, Rejected> {
        let parsed = match final_answer_payload(text) {
            Some(payload) => self.session.parse_final_answer(payload),
            None => self.session.parse_action(text),
        };
        let outcome = parsed.and_then(|action| self.session.execute(&action).map(|obs| (action, obs)));
        match outcome {
            Ok((action, obs)) => Ok(Executed {
                action: action.to_string(),
                observation: obs.text,
                answer: obs.answer.map(|sql| Answer::Sql { sql }),
            }),
            Err(e) => Err(Rejected {
                action: text.trim().to_string(),
                observation: e.render(),
            }),
        }
    }
}
