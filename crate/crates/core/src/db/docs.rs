//! Prompt text for the database environment.

pub const TOOL_DOCS: &str = "\
find_columns_containing_value(value) -> list of columns
Finds every column in the database holding a cell equal to the value (surrounding spaces are ignored, case matters). Use it to learn where a value mentioned in the question is stored. Example: find_columns_containing_value(\"Lisbon\").
Prerequisite: n/a

find_columns_containing_value_fuzzy(value) -> list of columns with sample cells
Like find_columns_containing_value but tolerant to casing, partial strings and small spelling differences. Each hit shows the stored cells that matched. Example: find_columns_containing_value_fuzzy(\"lisboa\").
Prerequisite: n/a

get_distinct_values(table, column) -> list of values
Lists the distinct non-NULL values of a column in sorted order. Useful for coded columns such as flags or categories. Example: get_distinct_values(customers, segment).
Prerequisite: n/a

is_value_in_column(table, column, value) -> true or false
Tells whether the column holds a cell equal to the value, with the same matching rule as find_columns_containing_value. Example: is_value_in_column(customers, city, \"Lisbon\").
Prerequisite: n/a

get_date_format(table, column) -> example value
Shows one stored value of a date column so you can write date conditions in the right format. Example: get_date_format(orders, order_date).
Prerequisite: n/a

search_by_SQL(query) -> result rows
Runs one read-only SQL query and shows the result. Use it to look around the data, not to submit your answer. Example: search_by_SQL(\"SELECT COUNT(*) FROM orders\").
Prerequisite: n/a

from(clause) -> validation result
Sets the FROM clause of the answer query, including any joins. Example: from(\"FROM table1 JOIN table2 ON table1.id = table2.id\").
Prerequisite: n/a

where(clause) -> validation result
Sets the WHERE clause, checks that it is legal and reports how many rows it matches. Pass \"\" when the query needs no filter. Example: where(\"WHERE table1.id = 1\").
Prerequisite: from

select(clause) -> validation result
Sets the SELECT clause and shows the first row the query returns. Example: select(\"SELECT table1.id, table2.name\").
Prerequisite: from, where

group_by(clause) -> validation result
Sets the GROUP BY clause. Example: group_by(\"GROUP BY table1.id\").
Prerequisite: from, where, select

having(clause) -> validation result
Sets the HAVING clause that filters groups. Example: having(\"HAVING COUNT(*) > 2\").
Prerequisite: from, where, select, group_by

order_by(clause) -> validation result
Sets the ORDER BY clause, optionally with LIMIT. Example: order_by(\"ORDER BY table1.id DESC LIMIT 3\").
Prerequisite: from, where, select
";

pub const INSTRUCTIONS: &str = "\
You write a SQLite query that answers a question about a database. Explore the database with the tools below, build the query clause by clause with the clause tools, and submit it when it is complete.
Work step by step. At step t write exactly two lines:
Thought t: your reasoning about what to do next
Act t: one tool call, for example get_distinct_values(customers, segment)
Put free text, SQL and clause arguments in double quotes. You will then receive Observation t with the result. When the query is ready, write instead:
Final Answer: <the full SQL query>

The available tools are:
";
