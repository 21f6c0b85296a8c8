use thiserror::Error;

use super::action::{ClauseKind, DbTool};
use crate::agent::RETRY_PROMPT;

/// Failure to open a database.
#[derive(Debug, Error)]
pub enum DbError {
    #[error("cannot open database {path}: {message}")]
    Open { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DbToolError {
    #[error("{name} is not a valid tool. The available tools are: {}.", DbTool::ALL.map(DbTool::name).join(", "))]
    UnknownTool { name: String },
    #[error("{tool} takes {expected} argument(s) but {found} were given. Call it as {}.", tool.signature())]
    BadArity {
        tool: DbTool,
        expected: usize,
        found: usize,
    },
    #[error("Could not parse the action {text:?}: {reason}. Write one call such as get_distinct_values(table, column) or Final Answer: <SQL>.")]
    Malformed { text: String, reason: String },
    #[error("{tool} needs a non-empty value.")]
    EmptyValue { tool: DbTool },
    #[error("There is no table named {name}.{}", suggest(.suggestions))]
    UnknownTable { name: String, suggestions: Vec<String> },
    #[error("Table {table} has no column named {name}.{}", suggest(.suggestions))]
    UnknownColumn {
        table: String,
        name: String,
        suggestions: Vec<String>,
    },
    #[error("Column {table}.{column} has no non-NULL value to show.")]
    NoExample { table: String, column: String },
    /// Message from the SQL engine, passed through unchanged.
    #[error("{0}")]
    Engine(String),
    #[error("Only read-only queries can be run; write statements are rejected.")]
    WriteRejected,
    #[error("{} requires {} to be set first.", kind.tool_name(), join_kinds(.missing))]
    Prerequisite { kind: ClauseKind, missing: Vec<ClauseKind> },
    #[error("{} expects a clause starting with {}.", kind.tool_name(), kind.keyword())]
    ClauseKeyword { kind: ClauseKind },
    #[error("Cannot assemble the query: {} is not set.", join_kinds(.missing))]
    MissingSlot { missing: Vec<ClauseKind> },
}

fn suggest(names: &[String]) -> String {
    if names.is_empty() {
        String::new()
    } else {
        format!(" Did you mean: {}?", names.join(", "))
    }
}

fn join_kinds(kinds: &[ClauseKind]) -> String {
    kinds.iter().map(|k| k.tool_name()).collect::<Vec<_>>().join(", ")
}

impl DbToolError {
    pub fn render(&self) -> String {
        match self {
            DbToolError::Engine(message) => format!("Error: {message}. {RETRY_PROMPT}"),
            other => format!("{other} {RETRY_PROMPT}"),
        }
    }
}

impl From<rusqlite::Error> for DbToolError {
    fn from(e: rusqlite::Error) -> Self {
        DbToolError::Engine(engine_message(&e))
    }
}

/// The engine's own message, without wrapper text.
pub fn engine_message(e: &rusqlite::Error) -> String {
    match e {
        rusqlite::Error::SqliteFailure(_, Some(msg)) => msg.clone(),
        rusqlite::Error::SqlInputError { msg, .. } => msg.clone(),
        other => other.to_string(),
    }
}
