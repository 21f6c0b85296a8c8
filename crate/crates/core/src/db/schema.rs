//! Database catalog, read once when a session opens.

use std::fmt::Write as _;

use rusqlite::Connection;

use super::value::{quote_ident, CellValue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForeignKey {
    pub table: String,
    pub column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub decl_type: String,
    pub primary_key: bool,
    pub foreign_key: Option<ForeignKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    /// The `CREATE TABLE` statement as stored in the catalog.
    pub sql: String,
    /// Primary-key columns in key order; empty when the table relies on rowid.
    pub primary_key: Vec<String>,
    pub without_rowid: bool,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    /// `ORDER BY` expression giving primary-key order.
    pub(crate) fn key_order(&self) -> String {
        if self.primary_key.is_empty() && !self.without_rowid {
            "rowid".to_string()
        } else {
            self.primary_key
                .iter()
                .map(|c| quote_ident(c))
                .collect::<Vec<_>>()
                .join(", ")
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DbSchema {
    pub tables: Vec<Table>,
}

impl DbSchema {
    pub fn read(conn: &Connection) -> rusqlite::Result<Self> {
        let mut stmt = conn.prepare(
            "SELECT name, COALESCE(sql, '') FROM sqlite_master \
             WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
        )?;
        let heads: Vec<(String, String)> = stmt
            .query_map([], |row| Ok((row.get(0)?, row.get(1)?)))?
            .collect::<Result<_, _>>()?;

        let mut tables = Vec::with_capacity(heads.len());
        for (name, sql) in heads {
            let mut fks = conn.prepare("SELECT \"from\", \"table\", \"to\" FROM pragma_foreign_key_list(?1)")?;
            let foreign: Vec<(String, String, Option<String>)> = fks
                .query_map([&name], |row| Ok((row.get(0)?, row.get(1)?, row.get(2)?)))?
                .collect::<Result<_, _>>()?;

            let mut info = conn.prepare("SELECT name, type, pk FROM pragma_table_info(?1) ORDER BY cid")?;
            let raw: Vec<(String, String, i64)> = info
                .query_map([&name], |row| Ok((row.get(0)?, row.get(1)?, row.get(2)?)))?
                .collect::<Result<_, _>>()?;

            let mut keyed: Vec<(i64, String)> = raw
                .iter()
                .filter(|(_, _, pk)| *pk > 0)
                .map(|(n, _, pk)| (*pk, n.clone()))
                .collect();
            keyed.sort();
            let columns = raw
                .into_iter()
                .map(|(col, decl_type, pk)| {
                    let foreign_key = foreign
                        .iter()
                        .find(|(from, _, _)| *from == col)
                        .map(|(_, table, to)| ForeignKey {
                            table: table.clone(),
                            column: to.clone(),
                        });
                    Column {
                        name: col,
                        decl_type,
                        primary_key: pk > 0,
                        foreign_key,
                    }
                })
                .collect();
            let without_rowid = sql.to_ascii_uppercase().contains("WITHOUT ROWID");
            tables.push(Table {
                name,
                columns,
                sql,
                primary_key: keyed.into_iter().map(|(_, n)| n).collect(),
                without_rowid,
            });
        }
        Ok(Self { tables })
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Schema in API-docs form: each `CREATE TABLE` followed by a few example rows.
    pub fn render_api_docs(&self, conn: &Connection, example_rows: usize) -> String {
        let mut out = String::new();
        for table in &self.tables {
            let _ = writeln!(out, "{}", table.sql.trim());
            if example_rows == 0 {
                out.push('\n');
                continue;
            }
            let query = format!("SELECT * FROM {} LIMIT {example_rows}", quote_ident(&table.name));
            let _ = writeln!(out, "/*\n{example_rows} example rows:\n{query};");
            let header: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
            let _ = writeln!(out, "{}", header.join("\t"));
            if let Ok(mut stmt) = conn.prepare(&query) {
                let n = stmt.column_count();
                if let Ok(mut rows) = stmt.query([]) {
                    while let Ok(Some(row)) = rows.next() {
                        let cells: Vec<String> = (0..n)
                            .map(|i| row.get_ref(i).map(|v| CellValue::from(v).to_string()).unwrap_or_default())
                            .collect();
                        let _ = writeln!(out, "{}", cells.join("\t"));
                    }
                }
            }
            out.push_str("*/\n\n");
        }
        out.truncate(out.trim_end().len());
        out
    }

    /// Up to three schema names closest to `wanted`.
    pub(crate) fn nearest<'a>(wanted: &str, names: impl Iterator<Item = &'a str>) -> Vec<String> {
        let wanted = wanted.to_lowercase();
        let mut scored: Vec<(usize, String)> = names
            .map(|n| {
                let lower = n.to_lowercase();
                let mut d = strsim::levenshtein(&wanted, &lower);
                if lower.contains(&wanted) || wanted.contains(&lower) {
                    d = d.min(1);
                }
                (d, n.to_string())
            })
            .collect();
        scored.sort();
        scored.into_iter().take(3).map(|(_, n)| n).collect()
    }
}
