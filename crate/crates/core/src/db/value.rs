use std::cmp::Ordering;
use std::fmt;

use rusqlite::types::ValueRef;
use serde::{Deserialize, Serialize};

/// An owned SQLite cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl From<ValueRef<'_>> for CellValue {
    fn from(value: ValueRef<'_>) -> Self {
        match value {
            ValueRef::Null => CellValue::Null,
            ValueRef::Integer(i) => CellValue::Integer(i),
            ValueRef::Real(r) => CellValue::Real(r),
            ValueRef::Text(t) => CellValue::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => CellValue::Blob(b.to_vec()),
        }
    }
}

/// Formats a real the way the sqlite3 shell does for common values (`10.0`, `2.5`).
pub fn format_real(r: f64) -> String {
    if r.fract() == 0.0 && r.abs() < 1e15 {
        format!("{r:.1}")
    } else {
        r.to_string()
    }
}

impl CellValue {
    /// Renders the value as a SQL literal.
    pub fn sql_literal(&self) -> String {
        match self {
            CellValue::Text(t) => format!("'{}'", t.replace('\'', "''")),
            CellValue::Blob(b) => format!("X'{}'", hex::encode(b)),
            other => other.to_string(),
        }
    }

    /// Total order used to sort rows before multiset comparison. Integers and
    /// reals share one numeric domain.
    pub(crate) fn rank_cmp(&self, other: &Self) -> Ordering {
        fn class(v: &CellValue) -> u8 {
            match v {
                CellValue::Null => 0,
                CellValue::Integer(_) | CellValue::Real(_) => 1,
                CellValue::Text(_) => 2,
                CellValue::Blob(_) => 3,
            }
        }
        match (self.as_number(), other.as_number()) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            _ => match (self, other) {
                (CellValue::Text(a), CellValue::Text(b)) => a.cmp(b),
                (CellValue::Blob(a), CellValue::Blob(b)) => a.cmp(b),
                _ => class(self).cmp(&class(other)),
            },
        }
    }

    fn as_number(&self) -> Option<f64> {
        match *self {
            CellValue::Integer(i) => Some(i as f64),
            CellValue::Real(r) if r == 0.0 => Some(0.0),
            CellValue::Real(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Null => f.write_str("NULL"),
            CellValue::Integer(i) => write!(f, "{i}"),
            CellValue::Real(r) => f.write_str(&format_real(*r)),
            CellValue::Text(t) => f.write_str(t),
            CellValue::Blob(b) => write!(f, "<blob {} bytes>", b.len()),
        }
    }
}

/// Quotes an identifier for SQLite.
pub fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}
