use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grammar::{quote, render_call};

/// One of the six clause slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseKind {
    From,
    Where,
    Select,
    GroupBy,
    Having,
    OrderBy,
}

impl ClauseKind {
    pub const ALL: [ClauseKind; 6] = [
        ClauseKind::From,
        ClauseKind::Where,
        ClauseKind::Select,
        ClauseKind::GroupBy,
        ClauseKind::Having,
        ClauseKind::OrderBy,
    ];

    pub fn tool_name(self) -> &'static str {
        match self {
            ClauseKind::From => "from",
            ClauseKind::Where => "where",
            ClauseKind::Select => "select",
            ClauseKind::GroupBy => "group_by",
            ClauseKind::Having => "having",
            ClauseKind::OrderBy => "order_by",
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ClauseKind::From => "FROM",
            ClauseKind::Where => "WHERE",
            ClauseKind::Select => "SELECT",
            ClauseKind::GroupBy => "GROUP BY",
            ClauseKind::Having => "HAVING",
            ClauseKind::OrderBy => "ORDER BY",
        }
    }

    /// Slots that must be filled before this one.
    pub fn prerequisites(self) -> &'static [ClauseKind] {
        use ClauseKind::*;
        match self {
            From => &[],
            Where => &[From],
            Select => &[From, Where],
            GroupBy => &[From, Where, Select],
            Having => &[From, Where, Select, GroupBy],
            OrderBy => &[From, Where, Select],
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    /// Position in the assembled statement.
    pub(crate) const ASSEMBLY_ORDER: [ClauseKind; 6] = [
        ClauseKind::Select,
        ClauseKind::From,
        ClauseKind::Where,
        ClauseKind::GroupBy,
        ClauseKind::Having,
        ClauseKind::OrderBy,
    ];
}

/// The twelve database tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DbTool {
    FindColumns,
    FindColumnsFuzzy,
    GetDistinctValues,
    IsValueInColumn,
    GetDateFormat,
    SearchBySql,
    Clause(ClauseKind),
}

impl DbTool {
    pub const ALL: [DbTool; 12] = [
        DbTool::FindColumns,
        DbTool::FindColumnsFuzzy,
        DbTool::GetDistinctValues,
        DbTool::IsValueInColumn,
        DbTool::GetDateFormat,
        DbTool::SearchBySql,
        DbTool::Clause(ClauseKind::From),
        DbTool::Clause(ClauseKind::Where),
        DbTool::Clause(ClauseKind::Select),
        DbTool::Clause(ClauseKind::GroupBy),
        DbTool::Clause(ClauseKind::Having),
        DbTool::Clause(ClauseKind::OrderBy),
    ];

    pub fn name(self) -> &'static str {
        match self {
            DbTool::FindColumns => "find_columns_containing_value",
            DbTool::FindColumnsFuzzy => "find_columns_containing_value_fuzzy",
            DbTool::GetDistinctValues => "get_distinct_values",
            DbTool::IsValueInColumn => "is_value_in_column",
            DbTool::GetDateFormat => "get_date_format",
            DbTool::SearchBySql => "search_by_SQL",
            DbTool::Clause(kind) => kind.tool_name(),
        }
    }

    pub fn arity(self) -> usize {
        match self {
            DbTool::FindColumns | DbTool::FindColumnsFuzzy | DbTool::SearchBySql | DbTool::Clause(_) => 1,
            DbTool::GetDistinctValues | DbTool::GetDateFormat => 2,
            DbTool::IsValueInColumn => 3,
        }
    }

    pub fn signature(self) -> &'static str {
        match self {
            DbTool::FindColumns => "find_columns_containing_value(value)",
            DbTool::FindColumnsFuzzy => "find_columns_containing_value_fuzzy(value)",
            DbTool::GetDistinctValues => "get_distinct_values(table, column)",
            DbTool::IsValueInColumn => "is_value_in_column(table, column, value)",
            DbTool::GetDateFormat => "get_date_format(table, column)",
            DbTool::SearchBySql => "search_by_SQL(query)",
            DbTool::Clause(ClauseKind::From) => "from(\"FROM ...\")",
            DbTool::Clause(ClauseKind::Where) => "where(\"WHERE ...\")",
            DbTool::Clause(ClauseKind::Select) => "select(\"SELECT ...\")",
            DbTool::Clause(ClauseKind::GroupBy) => "group_by(\"GROUP BY ...\")",
            DbTool::Clause(ClauseKind::Having) => "having(\"HAVING ...\")",
            DbTool::Clause(ClauseKind::OrderBy) => "order_by(\"ORDER BY ...\")",
        }
    }

    /// Tool names are matched case-insensitively so `search_by_sql` also resolves.
    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for DbTool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tool", rename_all = "snake_case")]
pub enum DbAction {
    FindColumns { value: String },
    FindColumnsFuzzy { value: String },
    GetDistinctValues { table: String, column: String },
    IsValueInColumn { table: String, column: String, value: String },
    GetDateFormat { table: String, column: String },
    SearchBySql { query: String },
    SetClause { kind: ClauseKind, statement: String },
    FinalAnswer { sql: String },
}

impl DbAction {
    /// `None` for the terminal action.
    pub fn tool(&self) -> Option<DbTool> {
        Some(match self {
            DbAction::FindColumns { .. } => DbTool::FindColumns,
            DbAction::FindColumnsFuzzy { .. } => DbTool::FindColumnsFuzzy,
            DbAction::GetDistinctValues { .. } => DbTool::GetDistinctValues,
            DbAction::IsValueInColumn { .. } => DbTool::IsValueInColumn,
            DbAction::GetDateFormat { .. } => DbTool::GetDateFormat,
            DbAction::SearchBySql { .. } => DbTool::SearchBySql,
            DbAction::SetClause { kind, .. } => DbTool::Clause(*kind),
            DbAction::FinalAnswer { .. } => return None,
        })
    }
}

impl fmt::Display for DbAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.tool().map(DbTool::name).unwrap_or_default();
        let text = match self {
            DbAction::FindColumns { value } | DbAction::FindColumnsFuzzy { value } => {
                format!("{name}({})", quote(value))
            }
            DbAction::GetDistinctValues { table, column } | DbAction::GetDateFormat { table, column } => {
                render_call(name, &[table, column])
            }
            DbAction::IsValueInColumn { table, column, value } => {
                let head = render_call(name, &[table, column]);
                format!("{}, {})", &head[..head.len() - 1], quote(value))
            }
            DbAction::SearchBySql { query } => format!("{name}({})", quote(query)),
            DbAction::SetClause { statement, .. } => format!("{name}({})", quote(statement)),
            DbAction::FinalAnswer { sql } => format!("Final Answer: {sql}"),
        };
        f.write_str(&text)
    }
}
