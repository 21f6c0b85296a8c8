//! Scripted model outputs that replay a task's gold actions.

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use super::tasks::{DbTask, KbTask};
use crate::db::{DbError, DbSession};
use crate::kb::{EntityId, KbAction, KbLimits, KbSession, Operand, TripleStore};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("task {0} has no gold actions")]
    NoGold(String),
    #[error("task {task}, gold step {step}: {message}")]
    Replay { task: String, step: usize, message: String },
    #[error("task {task}, gold step {step}: {action} is not among the legal actions")]
    NotACandidate { task: String, step: usize, action: String },
    #[error("task {task}: {source}")]
    Db {
        task: String,
        #[source]
        source: DbError,
    },
}

fn thought_for(action: &str) -> String {
    format!("The next useful call is {action}.")
}

/// One `Thought/Act` completion per gold action, ending with `Final Answer`.
pub fn kb_error_feedback_script(task: &KbTask) -> Result<Vec<String>, ScriptError> {
    if task.gold_actions.is_empty() {
        return Err(ScriptError::NoGold(task.id.clone()));
    }
    Ok(task
        .gold_actions
        .iter()
        .enumerate()
        .map(|(i, action)| {
            let t = i + 1;
            match final_variable(action) {
                Some(var) => format!("Thought {t}: {var} holds the answer.\nFinal Answer: {var}"),
                None => format!("Thought {t}: {}\nAct {t}: {action}", thought_for(action)),
            }
        })
        .collect())
}

fn final_variable(action: &str) -> Option<&str> {
    action.trim().strip_prefix("final_answer(")?.strip_suffix(')').map(str::trim)
}

/// Alternating thought and selection replies: the selection is the 1-based
/// position of the gold action in the candidate list at that step.
pub fn kb_decoupled_script(
    task: &KbTask,
    store: &Arc<TripleStore>,
    limits: KbLimits,
) -> Result<Vec<String>, ScriptError> {
    if task.gold_actions.is_empty() {
        return Err(ScriptError::NoGold(task.id.clone()));
    }
    let entities: Vec<EntityId> = task
        .entities
        .iter()
        .filter_map(|e| EntityId::new(e.as_str()).ok())
        .collect();
    let mut shadow = KbSession::new(Arc::clone(store), entities).with_limits(limits);
    let mut script = Vec::with_capacity(2 * task.gold_actions.len());
    for (i, text) in task.gold_actions.iter().enumerate() {
        let replay = |message: String| ScriptError::Replay {
            task: task.id.clone(),
            step: i + 1,
            message,
        };
        let action = shadow.parse_action(text).map_err(|e| replay(e.to_string()))?;
        let position = gold_position(&shadow, &action).ok_or_else(|| ScriptError::NotACandidate {
            task: task.id.clone(),
            step: i + 1,
            action: action.to_string(),
        })?;
        let thought = match &action {
            KbAction::FinalAnswer(Operand::Var(v)) => format!("{v} holds the answer."),
            other => thought_for(&other.to_string()),
        };
        script.push(format!("Thought {}: {thought}", i + 1));
        script.push((position + 1).to_string());
        shadow.execute(&action).map_err(|e| replay(e.to_string()))?;
    }
    Ok(script)
}

fn gold_position(session: &KbSession, action: &KbAction) -> Option<usize> {
    session.enumerate_candidates().iter().position(|c| c == action)
}

/// Replays the gold clause actions on the database and finishes with the
/// assembled query.
pub fn db_gold_script(task: &DbTask, db_path: &Path) -> Result<Vec<String>, ScriptError> {
    if task.gold_actions.is_empty() {
        return Err(ScriptError::NoGold(task.id.clone()));
    }
    let mut shadow = DbSession::open(db_path).map_err(|source| ScriptError::Db {
        task: task.id.clone(),
        source,
    })?;
    let mut script = Vec::with_capacity(task.gold_actions.len() + 1);
    for (i, text) in task.gold_actions.iter().enumerate() {
        let replay = |message: String| ScriptError::Replay {
            task: task.id.clone(),
            step: i + 1,
            message,
        };
        let action = shadow.parse_action(text).map_err(|e| replay(e.to_string()))?;
        shadow.execute(&action).map_err(|e| replay(e.render()))?;
        let t = i + 1;
        script.push(format!("Thought {t}: {}\nAct {t}: {text}", thought_for(text)));
    }
    let t = task.gold_actions.len() + 1;
    let sql = shadow.assemble_sql().map_err(|e| ScriptError::Replay {
        task: task.id.clone(),
        step: t,
        message: e.to_string(),
    })?;
    script.push(format!("Thought {t}: The query is complete.\nFinal Answer: {sql}"));
    Ok(script)
}
