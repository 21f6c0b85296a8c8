//! Database tool session over one read-only SQLite connection.

use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use super::action::{ClauseKind, DbAction, DbTool};
use super::error::{engine_message, DbError, DbToolError};
use super::schema::{Column, DbSchema, Table};
use super::value::{quote_ident, CellValue};
use crate::grammar;
use crate::kb::render_list;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbLimits {
    /// Values shown by `get_distinct_values`.
    pub distinct_limit: usize,
    /// Rows shown by `search_by_SQL`.
    pub row_limit: usize,
    /// Cells the finder tools may read per call.
    pub scan_budget: u64,
    /// Samples kept per column by the fuzzy finder.
    pub fuzzy_samples: usize,
    /// Example rows per table in the schema prompt.
    pub example_rows: usize,
}

impl Default for DbLimits {
    fn default() -> Self {
        Self {
            distinct_limit: 30,
            row_limit: 20,
            scan_budget: 5_000_000,
            fuzzy_samples: 5,
            example_rows: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellHit {
    pub table: String,
    pub column: String,
    pub kind: MatchKind,
    /// Distinct matching cells as stored, first one first.
    pub samples: Vec<String>,
}

impl CellHit {
    pub fn sample(&self) -> &str {
        &self.samples[0]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    pub hits: Vec<CellHit>,
    /// The scan budget ran out before every cell was read.
    pub truncated: bool,
}

/// Normalized lookup value shared by the matching predicates.
#[derive(Debug, Clone)]
pub struct Probe {
    trimmed: String,
    lower: String,
    integer: Option<i64>,
    number: Option<f64>,
}

impl Probe {
    pub fn new(value: &str) -> Self {
        let trimmed = value.trim().to_string();
        let number = trimmed.parse::<f64>().ok().filter(|n| n.is_finite());
        Self {
            lower: trimmed.to_lowercase(),
            integer: trimmed.parse::<i64>().ok(),
            number,
            trimmed,
        }
    }
}

/// Exact rule: trimmed, case-sensitive text equality, or numeric equality
/// when the probe parses as a number.
pub fn exact_match(cell: ValueRef<'_>, probe: &Probe) -> bool {
    match cell {
        ValueRef::Text(t) => String::from_utf8_lossy(t).trim() == probe.trimmed,
        ValueRef::Integer(i) => match probe.integer {
            Some(p) => p == i,
            None => probe.number == Some(i as f64),
        },
        ValueRef::Real(r) => probe.number == Some(r),
        _ => false,
    }
}

/// Fuzzy rule: exact, or for text cells a case-insensitive substring in either
/// direction, or normalized edit distance of at most 0.2.
pub fn fuzzy_match(cell: ValueRef<'_>, probe: &Probe) -> bool {
    if exact_match(cell, probe) {
        return true;
    }
    let ValueRef::Text(t) = cell else {
        return false;
    };
    let text = String::from_utf8_lossy(t);
    let cell = text.trim().to_lowercase();
    if cell.is_empty() || probe.lower.is_empty() {
        return false;
    }
    if cell.contains(&probe.lower) || probe.lower.contains(&cell) {
        return true;
    }
    let (a, b) = (cell.chars().count(), probe.lower.chars().count());
    let longest = a.max(b);
    if 5 * a.abs_diff(b) > longest {
        return false;
    }
    5 * strsim::levenshtein(&cell, &probe.lower) <= longest
}

/// Rows returned by a query; `total` counts rows beyond the ones kept.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<CellValue>>,
    pub total: usize,
}

impl QueryResult {
    pub fn render(&self) -> String {
        let mut out = self.columns.join(" | ");
        for row in &self.rows {
            out.push('\n');
            let cells: Vec<String> = row.iter().map(CellValue::to_string).collect();
            out.push_str(&cells.join(" | "));
        }
        if self.total == 0 {
            out.push_str("\n(0 rows)");
        } else if self.total > self.rows.len() {
            out.push_str(&format!("\n(+{} more rows)", self.total - self.rows.len()));
        }
        out
    }
}

/// Runs one statement, keeping at most `keep` rows (all when `None`).
pub fn run_query(conn: &Connection, sql: &str, keep: Option<usize>) -> rusqlite::Result<QueryResult> {
    let mut stmt = conn.prepare(sql)?;
    let columns: Vec<String> = stmt.column_names().into_iter().map(String::from).collect();
    let n = columns.len();
    let mut rows = Vec::new();
    let mut total = 0;
    let mut cursor = stmt.query([])?;
    while let Some(row) = cursor.next()? {
        total += 1;
        if keep.is_none_or(|k| rows.len() < k) {
            let mut cells = Vec::with_capacity(n);
            for i in 0..n {
                cells.push(CellValue::from(row.get_ref(i)?));
            }
            rows.push(cells);
        }
    }
    Ok(QueryResult { columns, rows, total })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbObservation {
    pub text: String,
    /// The submitted SQL, set by the terminal action.
    pub answer: Option<String>,
}

pub struct DbSession {
    conn: Connection,
    schema: DbSchema,
    path: PathBuf,
    slots: [Option<String>; 6],
    log: Vec<DbAction>,
    overwrites: Vec<ClauseKind>,
    limits: DbLimits,
}

/// Opens `path` read-only and reads its schema.
pub fn open_database(path: impl AsRef<Path>) -> Result<DbSession, DbError> {
    DbSession::open(path)
}

fn strip_statement(text: &str) -> &str {
    let mut s = text.trim();
    while let Some(rest) = s.strip_suffix(';') {
        s = rest.trim_end();
    }
    s
}

fn strip_ident(name: &str) -> &str {
    let s = name.trim();
    for (open, close) in [('"', '"'), ('`', '`'), ('[', ']')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn starts_with_keyword(statement: &str, keyword: &str) -> bool {
    let collapsed = statement.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_uppercase();
    match collapsed.strip_prefix(keyword) {
        Some(rest) => !rest.starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_'),
        None => false,
    }
}

impl DbSession {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DbError> {
        let path = path.as_ref();
        let fail = |e: rusqlite::Error| DbError::Open {
            path: path.display().to_string(),
            message: engine_message(&e),
        };
        let conn = Connection::open_with_flags(
            path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )
        .map_err(fail)?;
        let schema = DbSchema::read(&conn).map_err(fail)?;
        Ok(Self {
            conn,
            schema,
            path: path.to_path_buf(),
            slots: Default::default(),
            log: Vec::new(),
            overwrites: Vec::new(),
            limits: DbLimits::default(),
        })
    }

    pub fn with_limits(mut self, limits: DbLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn schema(&self) -> &DbSchema {
        &self.schema
    }

    pub fn connection(&self) -> &Connection {
        &self.conn
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn limits(&self) -> DbLimits {
        self.limits
    }

    pub fn log(&self) -> &[DbAction] {
        &self.log
    }

    /// Slots replaced by a later call of the same clause tool, in call order.
    pub fn overwrites(&self) -> &[ClauseKind] {
        &self.overwrites
    }

    pub fn slot(&self, kind: ClauseKind) -> Option<&str> {
        self.slots[kind.index()].as_deref()
    }

    /// Schema block for the prompt.
    pub fn api_docs(&self) -> String {
        self.schema.render_api_docs(&self.conn, self.limits.example_rows)
    }

    fn resolve(&self, table: &str, column: &str) -> Result<(&Table, &Column), DbToolError> {
        let (table, column) = (strip_ident(table), strip_ident(column));
        let t = self.schema.table(table).ok_or_else(|| DbToolError::UnknownTable {
            name: table.to_string(),
            suggestions: DbSchema::nearest(table, self.schema.tables.iter().map(|t| t.name.as_str())),
        })?;
        let c = t.column(column).ok_or_else(|| DbToolError::UnknownColumn {
            table: t.name.clone(),
            name: column.to_string(),
            suggestions: DbSchema::nearest(column, t.columns.iter().map(|c| c.name.as_str())),
        })?;
        Ok((t, c))
    }

    fn scan(&self, value: &str, kind: MatchKind) -> Result<ScanResult, DbToolError> {
        let probe = Probe::new(value);
        let cap = match kind {
            MatchKind::Exact => 1,
            MatchKind::Fuzzy => self.limits.fuzzy_samples.max(1),
        };
        let matches = |cell: ValueRef<'_>| match kind {
            MatchKind::Exact => exact_match(cell, &probe),
            MatchKind::Fuzzy => fuzzy_match(cell, &probe),
        };
        let mut budget = self.limits.scan_budget;
        let mut result = ScanResult::default();

        for table in &self.schema.tables {
            let n = table.columns.len();
            if n == 0 {
                continue;
            }
            let cols: Vec<String> = table.columns.iter().map(|c| quote_ident(&c.name)).collect();
            let sql = format!("SELECT {} FROM {}", cols.join(", "), quote_ident(&table.name));
            let mut stmt = self.conn.prepare(&sql)?;
            let mut rows = stmt.query([])?;
            let mut samples: Vec<Vec<String>> = vec![Vec::new(); n];
            let mut open = n;
            while open > 0 {
                let Some(row) = rows.next()? else { break };
                if budget < n as u64 {
                    result.truncated = true;
                    break;
                }
                budget -= n as u64;
                for (i, found) in samples.iter_mut().enumerate() {
                    if found.len() >= cap {
                        continue;
                    }
                    let cell = row.get_ref(i)?;
                    if matches(cell) {
                        let text = CellValue::from(cell).to_string();
                        if !found.contains(&text) {
                            found.push(text);
                            if found.len() >= cap {
                                open -= 1;
                            }
                        }
                    }
                }
            }
            for (column, found) in table.columns.iter().zip(samples) {
                if !found.is_empty() {
                    result.hits.push(CellHit {
                        table: table.name.clone(),
                        column: column.name.clone(),
                        kind,
                        samples: found,
                    });
                }
            }
            if result.truncated {
                break;
            }
        }
        Ok(result)
    }

    pub fn find_columns_containing_value(&self, value: &str) -> Result<ScanResult, DbToolError> {
        if value.trim().is_empty() {
            return Err(DbToolError::EmptyValue { tool: DbTool::FindColumns });
        }
        self.scan(value, MatchKind::Exact)
    }

    pub fn find_columns_containing_value_fuzzy(&self, value: &str) -> Result<ScanResult, DbToolError> {
        if value.trim().is_empty() {
            return Err(DbToolError::EmptyValue {
                tool: DbTool::FindColumnsFuzzy,
            });
        }
        self.scan(value, MatchKind::Fuzzy)
    }

    pub fn get_distinct_values(&self, table: &str, column: &str) -> Result<Vec<CellValue>, DbToolError> {
        let (t, c) = self.resolve(table, column)?;
        let col = quote_ident(&c.name);
        let sql = format!(
            "SELECT DISTINCT {col} FROM {} WHERE {col} IS NOT NULL ORDER BY {col}",
            quote_ident(&t.name)
        );
        let mut stmt = self.conn.prepare(&sql)?;
        let values = stmt
            .query_map([], |row| Ok(CellValue::from(row.get_ref(0)?)))?
            .collect::<Result<_, _>>()?;
        Ok(values)
    }

    pub fn is_value_in_column(&self, table: &str, column: &str, value: &str) -> Result<bool, DbToolError> {
        let (t, c) = self.resolve(table, column)?;
        let probe = Probe::new(value);
        let sql = format!("SELECT {} FROM {}", quote_ident(&c.name), quote_ident(&t.name));
        let mut stmt = self.conn.prepare(&sql)?;
        let mut rows = stmt.query([])?;
        while let Some(row) = rows.next()? {
            if exact_match(row.get_ref(0)?, &probe) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// First non-NULL cell in primary-key order, with the column's declared type.
    pub fn get_date_format(&self, table: &str, column: &str) -> Result<(CellValue, String), DbToolError> {
        let (t, c) = self.resolve(table, column)?;
        let col = quote_ident(&c.name);
        let sql = format!(
            "SELECT {col} FROM {} WHERE {col} IS NOT NULL ORDER BY {} LIMIT 1",
            quote_ident(&t.name),
            t.key_order()
        );
        let mut stmt = self.conn.prepare(&sql)?;
        let mut rows = stmt.query([])?;
        match rows.next()? {
            Some(row) => Ok((CellValue::from(row.get_ref(0)?), c.decl_type.clone())),
            None => Err(DbToolError::NoExample {
                table: t.name.clone(),
                column: c.name.clone(),
            }),
        }
    }

    pub fn search_by_sql(&self, query: &str) -> Result<QueryResult, DbToolError> {
        let query = strip_statement(query);
        if query.is_empty() {
            return Err(DbToolError::EmptyValue { tool: DbTool::SearchBySql });
        }
        let stmt = self.conn.prepare(query).map_err(|e| match e {
            rusqlite::Error::MultipleStatement => DbToolError::Malformed {
                text: query.to_string(),
                reason: "only one statement can be run at a time".into(),
            },
            other => DbToolError::from(other),
        })?;
        if !stmt.readonly() {
            return Err(DbToolError::WriteRejected);
        }
        drop(stmt);
        Ok(run_query(&self.conn, query, Some(self.limits.row_limit))?)
    }

    fn assemble_with(&self, slots: &[Option<String>; 6]) -> Option<String> {
        for kind in [ClauseKind::From, ClauseKind::Where, ClauseKind::Select] {
            slots[kind.index()].as_ref()?;
        }
        let parts: Vec<&str> = ClauseKind::ASSEMBLY_ORDER
            .iter()
            .filter_map(|k| slots[k.index()].as_deref())
            .filter(|s| !s.is_empty())
            .collect();
        Some(parts.join(" "))
    }

    /// The query built from the filled slots.
    pub fn assemble_sql(&self) -> Result<String, DbToolError> {
        let missing: Vec<ClauseKind> = [ClauseKind::From, ClauseKind::Where, ClauseKind::Select]
            .into_iter()
            .filter(|k| self.slots[k.index()].is_none())
            .collect();
        if !missing.is_empty() {
            return Err(DbToolError::MissingSlot { missing });
        }
        Ok(self.assemble_with(&self.slots).unwrap_or_default())
    }

    fn first_row(&self, sql: &str) -> Result<Option<Vec<CellValue>>, DbToolError> {
        let mut result = run_query(&self.conn, sql, Some(1))?;
        Ok(if result.rows.is_empty() {
            None
        } else {
            Some(result.rows.swap_remove(0))
        })
    }

    /// Validates a clause with a probe query and stores it. Returns the observation.
    pub fn set_clause(&mut self, kind: ClauseKind, statement: &str) -> Result<String, DbToolError> {
        let statement = strip_statement(statement).to_string();
        let missing: Vec<ClauseKind> = kind
            .prerequisites()
            .iter()
            .copied()
            .filter(|k| self.slots[k.index()].is_none())
            .collect();
        if !missing.is_empty() {
            return Err(DbToolError::Prerequisite { kind, missing });
        }
        let empty_where = kind == ClauseKind::Where && statement.is_empty();
        if !empty_where && !starts_with_keyword(&statement, kind.keyword()) {
            return Err(DbToolError::ClauseKeyword { kind });
        }

        let slot = |k: ClauseKind| self.slots[k.index()].clone().unwrap_or_default();
        let join = |parts: &[&str]| {
            parts
                .iter()
                .filter(|p| !p.is_empty())
                .copied()
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut next = self.slots.clone();
        next[kind.index()] = Some(statement.clone());
        let name = kind.keyword();

        let mut text = match kind {
            ClauseKind::From => {
                self.first_row(&join(&["SELECT *", &statement, "LIMIT 1"]))?;
                format!("The {name} clause is valid.")
            }
            ClauseKind::Where => {
                let from = slot(ClauseKind::From);
                self.first_row(&join(&["SELECT *", &from, &statement, "LIMIT 1"]))?;
                let counted = format!("SELECT COUNT(*) FROM ({})", join(&["SELECT 1", &from, &statement]));
                let n = match self.first_row(&counted)?.and_then(|r| r.into_iter().next()) {
                    Some(CellValue::Integer(n)) => n,
                    _ => 0,
                };
                let rows = if n == 1 { "row" } else { "rows" };
                if empty_where {
                    format!("No filter is applied; the FROM clause yields {n} {rows}.")
                } else if n > 0 {
                    format!("The {name} clause is valid and matches {n} {rows}.")
                } else {
                    format!("The {name} clause is valid but matches no rows.")
                }
            }
            ClauseKind::Select => {
                let probe = join(&[&statement, &slot(ClauseKind::From), &slot(ClauseKind::Where), "LIMIT 1"]);
                self.describe_probe(name, &probe)?
            }
            ClauseKind::GroupBy | ClauseKind::Having | ClauseKind::OrderBy => {
                let assembled = self.assemble_with(&next).unwrap_or_default();
                self.describe_probe(name, &format!("SELECT * FROM ({assembled}) LIMIT 1"))?
            }
        };

        // A replaced slot can invalidate the clauses that were checked against
        // its old text, so the whole statement is checked again.
        if let Some(full) = self.assemble_with(&next) {
            self.first_row(&format!("SELECT * FROM ({full}) LIMIT 1"))?;
        }

        if self.slots[kind.index()].is_some() {
            self.overwrites.push(kind);
            text.push_str(&format!(" It replaces the previous {name} clause."));
        }
        self.slots = next;
        Ok(text)
    }

    fn describe_probe(&self, name: &str, probe: &str) -> Result<String, DbToolError> {
        Ok(match self.first_row(probe)? {
            Some(row) => {
                let cells: Vec<String> = row.iter().map(CellValue::sql_literal).collect();
                format!("The {name} clause is valid. First result row: ({}).", cells.join(", "))
            }
            None => format!("The {name} clause is valid but the query returns no rows."),
        })
    }

    /// Parses one call into a [`DbAction`].
    pub fn parse_action(&self, text: &str) -> Result<DbAction, DbToolError> {
        let call = grammar::parse_call(text).map_err(|e| DbToolError::Malformed {
            text: text.trim().to_string(),
            reason: e.to_string(),
        })?;
        let tool = DbTool::from_name(&call.name).ok_or_else(|| DbToolError::UnknownTool {
            name: call.name.clone(),
        })?;
        if call.args.len() != tool.arity() {
            return Err(DbToolError::BadArity {
                tool,
                expected: tool.arity(),
                found: call.args.len(),
            });
        }
        let mut args = call.args.into_iter();
        let mut next = || args.next().unwrap_or_default();
        Ok(match tool {
            DbTool::FindColumns => DbAction::FindColumns { value: next() },
            DbTool::FindColumnsFuzzy => DbAction::FindColumnsFuzzy { value: next() },
            DbTool::GetDistinctValues => DbAction::GetDistinctValues {
                table: next(),
                column: next(),
            },
            DbTool::IsValueInColumn => DbAction::IsValueInColumn {
                table: next(),
                column: next(),
                value: next(),
            },
            DbTool::GetDateFormat => DbAction::GetDateFormat {
                table: next(),
                column: next(),
            },
            DbTool::SearchBySql => DbAction::SearchBySql { query: next() },
            DbTool::Clause(kind) => DbAction::SetClause {
                kind,
                statement: next(),
            },
        })
    }

    /// Parses the payload of a `Final Answer:` line.
    pub fn parse_final_answer(&self, text: &str) -> Result<DbAction, DbToolError> {
        let sql = text.split_whitespace().collect::<Vec<_>>().join(" ");
        let sql = strip_statement(&sql).to_string();
        if sql.is_empty() {
            return Err(DbToolError::Malformed {
                text: "Final Answer:".into(),
                reason: "no SQL query follows it".into(),
            });
        }
        Ok(DbAction::FinalAnswer { sql })
    }

    pub fn execute(&mut self, action: &DbAction) -> Result<DbObservation, DbToolError> {
        let text = match action {
            DbAction::FindColumns { value } => {
                let scan = self.find_columns_containing_value(value)?;
                let mut text = if scan.hits.is_empty() {
                    format!(
                        "No column contains the exact value {}. Try find_columns_containing_value_fuzzy for approximate matches.",
                        grammar::quote(value.trim())
                    )
                } else {
                    let cols: Vec<String> = scan.hits.iter().map(|h| format!("{}.{}", h.table, h.column)).collect();
                    format!("Columns containing {}: {}", grammar::quote(value.trim()), render_list(&cols, usize::MAX))
                };
                self.truncation_notice(&scan, &mut text);
                text
            }
            DbAction::FindColumnsFuzzy { value } => {
                let scan = self.find_columns_containing_value_fuzzy(value)?;
                let mut text = if scan.hits.is_empty() {
                    format!("No column contains a value similar to {}.", grammar::quote(value.trim()))
                } else {
                    let cols: Vec<String> = scan
                        .hits
                        .iter()
                        .map(|h| {
                            let samples: Vec<String> =
                                h.samples.iter().map(|s| CellValue::Text(s.clone()).sql_literal()).collect();
                            format!("{}.{} ({})", h.table, h.column, samples.join(", "))
                        })
                        .collect();
                    format!("Columns with values similar to {}: {}", grammar::quote(value.trim()), cols.join("; "))
                };
                self.truncation_notice(&scan, &mut text);
                text
            }
            DbAction::GetDistinctValues { table, column } => {
                let values: Vec<String> = self
                    .get_distinct_values(table, column)?
                    .iter()
                    .map(CellValue::sql_literal)
                    .collect();
                render_list(&values, self.limits.distinct_limit)
            }
            DbAction::IsValueInColumn { table, column, value } => {
                self.is_value_in_column(table, column, value)?.to_string()
            }
            DbAction::GetDateFormat { table, column } => {
                let (value, decl) = self.get_date_format(table, column)?;
                let decl = if decl.is_empty() { "none" } else { decl.as_str() };
                format!("{value} (declared type: {decl})")
            }
            DbAction::SearchBySql { query } => self.search_by_sql(query)?.render(),
            DbAction::SetClause { kind, statement } => self.set_clause(*kind, statement)?,
            DbAction::FinalAnswer { sql } => {
                self.log.push(action.clone());
                return Ok(DbObservation {
                    text: format!("Final answer submitted: {sql}"),
                    answer: Some(sql.clone()),
                });
            }
        };
        self.log.push(action.clone());
        Ok(DbObservation { text, answer: None })
    }

    fn truncation_notice(&self, scan: &ScanResult, text: &mut String) {
        if scan.truncated {
            text.push_str(&format!(
                " The scan stopped after {} cells, so the result may be incomplete.",
                self.limits.scan_budget
            ));
        }
    }
}
