//! Per-task records and their aggregates, as JSON and as a plain-text table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tasks::KbCategory;
use crate::agent::{Scheme, Terminal};
use crate::kb::KbAnswer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbRecord {
    pub id: String,
    pub requires_content: bool,
    pub pred_sql: Option<String>,
    pub ex: bool,
    pub va: bool,
    pub terminal: Terminal,
    pub steps: usize,
    pub retries: usize,
    pub input_tokens: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbRecord {
    pub id: String,
    pub category: KbCategory,
    pub answer: Option<KbAnswer>,
    pub f1: f64,
    pub va: bool,
    pub terminal: Terminal,
    pub steps: usize,
    pub retries: usize,
    pub input_tokens: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub mean_steps: f64,
    pub mean_input_tokens: f64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DbCell {
    pub n: usize,
    pub ex: f64,
    pub va: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KbCell {
    pub n: usize,
    pub f1: f64,
    pub va: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbReport {
    pub scheme: Scheme,
    pub records: Vec<DbRecord>,
    /// Questions answerable from the schema alone.
    pub content_n: DbCell,
    /// Questions that need database content.
    pub content_y: DbCell,
    pub overall: DbCell,
    pub efficiency: Efficiency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbReport {
    pub scheme: Scheme,
    pub records: Vec<KbRecord>,
    pub counting: KbCell,
    pub superlative: KbCell,
    pub none: KbCell,
    pub overall: KbCell,
    pub efficiency: Efficiency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "environment", rename_all = "lowercase")]
pub enum RunReport {
    Db(DbReport),
    Kb(KbReport),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("{tasks} tasks but {results} results")]
    LengthMismatch { tasks: usize, results: usize },
    #[error("result {index} belongs to task {found}, expected {expected}")]
    IdMismatch {
        index: usize,
        expected: String,
        found: String,
    },
}

/// Checks that `records` line up with `task_ids` one to one, in order.
pub fn check_ids<'a>(task_ids: impl ExactSizeIterator<Item = &'a str>, record_ids: &[&str]) -> Result<(), ReportError> {
    if task_ids.len() != record_ids.len() {
        return Err(ReportError::LengthMismatch {
            tasks: task_ids.len(),
            results: record_ids.len(),
        });
    }
    for (index, (expected, found)) in task_ids.zip(record_ids).enumerate() {
        if expected != *found {
            return Err(ReportError::IdMismatch {
                index,
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
    }
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn efficiency<'a>(rows: impl Iterator<Item = (usize, u64, u64)> + Clone + 'a) -> Efficiency {
    Efficiency {
        mean_steps: mean(rows.clone().map(|r| r.0 as f64)),
        mean_input_tokens: mean(rows.clone().map(|r| r.1 as f64)),
        mean_wall_ms: mean(rows.map(|r| r.2 as f64)),
    }
}

fn db_cell<'a>(records: impl Iterator<Item = &'a DbRecord> + Clone) -> DbCell {
    DbCell {
        n: records.clone().count(),
        ex: mean(records.clone().map(|r| flag(r.ex))),
        va: mean(records.map(|r| flag(r.va))),
    }
}

fn kb_cell<'a>(records: impl Iterator<Item = &'a KbRecord> + Clone) -> KbCell {
    KbCell {
        n: records.clone().count(),
        f1: mean(records.clone().map(|r| r.f1)),
        va: mean(records.map(|r| flag(r.va))),
    }
}

impl DbReport {
    pub fn from_records(scheme: Scheme, records: Vec<DbRecord>) -> Self {
        let content_n = db_cell(records.iter().filter(|r| !r.requires_content));
        let content_y = db_cell(records.iter().filter(|r| r.requires_content));
        let overall = db_cell(records.iter());
        let efficiency = efficiency(records.iter().map(|r| (r.steps, r.input_tokens, r.wall_ms)));
        Self {
            scheme,
            records,
            content_n,
            content_y,
            overall,
            efficiency,
        }
    }

    /// Whether the aggregates equal a recomputation from the records.
    pub fn is_consistent(&self) -> bool {
        *self == Self::from_records(self.scheme, self.records.clone())
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("Database suite, scheme {}, {} tasks\n", self.scheme, self.overall.n);
        let _ = writeln!(out, "{:<6}{:>12}{:>12}{:>12}", "", "Cont. (N)", "Cont. (Y)", "Overall");
        let row = |name: &str, f: fn(&DbCell) -> f64| {
            format!(
                "{name:<6}{:>12.1}{:>12.1}{:>12.1}\n",
                100.0 * f(&self.content_n),
                100.0 * f(&self.content_y),
                100.0 * f(&self.overall)
            )
        };
        out.push_str(&row("EX", |c| c.ex));
        out.push_str(&row("VA", |c| c.va));
        let _ = writeln!(
            out,
            "{:<6}{:>12}{:>12}{:>12}",
            "n", self.content_n.n, self.content_y.n, self.overall.n
        );
        push_efficiency(&mut out, &self.efficiency);
        out
    }
}

impl KbReport {
    pub fn from_records(scheme: Scheme, records: Vec<KbRecord>) -> Self {
        let by = |c: KbCategory| kb_cell(records.iter().filter(move |r| r.category == c));
        let counting = by(KbCategory::Counting);
        let superlative = by(KbCategory::Superlative);
        let none = by(KbCategory::None);
        let overall = kb_cell(records.iter());
        let efficiency = efficiency(records.iter().map(|r| (r.steps, r.input_tokens, r.wall_ms)));
        Self {
            scheme,
            records,
            counting,
            superlative,
            none,
            overall,
            efficiency,
        }
    }

    pub fn is_consistent(&self) -> bool {
        *self == Self::from_records(self.scheme, self.records.clone())
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("Knowledge-base suite, scheme {}, {} tasks\n", self.scheme, self.overall.n);
        let _ = writeln!(
            out,
            "{:<6}{:>12}{:>12}{:>12}{:>12}",
            "", "Counting", "Superlative", "None", "Overall"
        );
        let cells = [&self.counting, &self.superlative, &self.none, &self.overall];
        let _ = write!(out, "{:<6}", "F1");
        for c in cells {
            let _ = write!(out, "{:>12.1}", 100.0 * c.f1);
        }
        let _ = write!(out, "\n{:<6}", "VA");
        for c in cells {
            let _ = write!(out, "{:>12.1}", 100.0 * c.va);
        }
        let _ = write!(out, "\n{:<6}", "n");
        for c in cells {
            let _ = write!(out, "{:>12}", c.n);
        }
        out.push('\n');
        push_efficiency(&mut out, &self.efficiency);
        out
    }
}

fn push_efficiency(out: &mut String, e: &Efficiency) {
    let _ = writeln!(
        out,
        "Avg rounds {:.2}, avg input tokens {:.1}, avg wall time {:.1} ms",
        e.mean_steps, e.mean_input_tokens, e.mean_wall_ms
    );
}

impl RunReport {
    pub fn render_text(&self) -> String {
        match self {
            RunReport::Db(r) => r.render_text(),
            RunReport::Kb(r) => r.render_text(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn is_consistent(&self) -> bool {
        match self {
            RunReport::Db(r) => r.is_consistent(),
            RunReport::Kb(r) => r.is_consistent(),
        }
    }
}
