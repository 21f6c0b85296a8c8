use std::cmp::Ordering;
use std::collections::BTreeSet;

use rusqlite::Connection;

use super::tasks::GoldAnswer;
use crate::db::{engine_message, run_query, CellValue};
use crate::kb::KbAnswer;

/// All rows of a query, or the engine's message.
pub fn execute_rows(conn: &Connection, sql: &str) -> Result<Vec<Vec<CellValue>>, String> {
    run_query(conn, sql, None).map(|r| r.rows).map_err(|e| engine_message(&e))
}

fn row_cmp(a: &[CellValue], b: &[CellValue]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.rank_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Multiset equality of rows, ignoring row order. Integers and reals compare
/// numerically; NULL equals only NULL.
pub fn rows_match(pred: &[Vec<CellValue>], gold: &[Vec<CellValue>]) -> bool {
    if pred.len() != gold.len() {
        return false;
    }
    let mut p: Vec<&Vec<CellValue>> = pred.iter().collect();
    let mut g: Vec<&Vec<CellValue>> = gold.iter().collect();
    p.sort_by(|a, b| row_cmp(a, b));
    g.sort_by(|a, b| row_cmp(a, b));
    p.iter().zip(&g).all(|(a, b)| row_cmp(a, b) == Ordering::Equal)
}

pub fn execution_accuracy(pred: &str, gold: &str, conn: &Connection) -> bool {
    match (execute_rows(conn, pred), execute_rows(conn, gold)) {
        (Ok(p), Ok(g)) => rows_match(&p, &g),
        _ => false,
    }
}

pub fn validity_sql(pred: &str, conn: &Connection) -> bool {
    execute_rows(conn, pred).is_ok()
}

pub fn set_f1(pred: &BTreeSet<String>, gold: &BTreeSet<String>) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let hit = pred.intersection(gold).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let precision = hit / pred.len() as f64;
    let recall = hit / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Entity answers score by set F1; count answers by exact match.
pub fn kb_f1(pred: Option<&KbAnswer>, gold: &GoldAnswer) -> f64 {
    match gold {
        GoldAnswer::Count { count } => {
            if pred.and_then(|p| p.count) == Some(*count) {
                1.0
            } else {
                0.0
            }
        }
        GoldAnswer::Entities { entities } => {
            let gold: BTreeSet<String> = entities.iter().cloned().collect();
            let pred: BTreeSet<String> = pred.map(|p| p.entities.iter().cloned().collect()).unwrap_or_default();
            set_f1(&pred, &gold)
        }
    }
}
