//! Database environment: the twelve tools over a read-only SQLite file.

mod action;
pub mod docs;
mod error;
mod schema;
mod session;
mod value;

pub use action::{ClauseKind, DbAction, DbTool};
pub use error::{engine_message, DbError, DbToolError};
pub use schema::{Column, DbSchema, ForeignKey, Table};
pub use session::{
    exact_match, fuzzy_match, open_database, run_query, CellHit, DbLimits, DbObservation, DbSession, MatchKind,
    Probe, QueryResult, ScanResult,
};
pub use value::{format_real, quote_ident, CellValue};
