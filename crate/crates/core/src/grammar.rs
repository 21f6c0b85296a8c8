//! Surface grammar shared by every tool call: `name(arg1, arg2)`.
//!
//! Arguments are separated by commas. A bare argument is trimmed and may not
//! contain `(`, `)` or `"`. A double-quoted argument may contain anything;
//! inside it `\"` and `\\` are the only escapes. Calls do not nest.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolCall {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("expected a tool call of the form tool_name(arg1, arg2)")]
    NotACall,
    #[error("a quoted argument is missing its closing quote")]
    UnterminatedQuote,
    #[error("nested calls are not supported")]
    Nested,
    #[error("unexpected text after the closing parenthesis")]
    Trailing,
    #[error("unexpected text after a quoted argument")]
    AfterQuote,
    #[error("a bare argument may not contain a double quote")]
    StrayQuote,
}

pub fn parse_call(text: &str) -> Result<ToolCall, GrammarError> {
    let text = text.trim();
    let open = text.find('(').ok_or(GrammarError::NotACall)?;
    let name = text[..open].trim_end();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(GrammarError::NotACall);
    }

    let mut args = Vec::new();
    let mut chars = text[open + 1..].char_indices().peekable();
    let body_start = open + 1;
    let mut current = String::new();
    let mut quoted: Option<String> = None;
    let mut closed_at = None;

    while let Some((i, c)) = chars.next() {
        match c {
            '"' => {
                if quoted.is_some() || !current.trim().is_empty() {
                    return Err(GrammarError::StrayQuote);
                }
                let mut value = String::new();
                let mut terminated = false;
                while let Some((_, q)) = chars.next() {
                    match q {
                        '\\' => match chars.peek() {
                            Some(&(_, next @ ('"' | '\\'))) => {
                                value.push(next);
                                chars.next();
                            }
                            _ => value.push('\\'),
                        },
                        '"' => {
                            terminated = true;
                            break;
                        }
                        other => value.push(other),
                    }
                }
                if !terminated {
                    return Err(GrammarError::UnterminatedQuote);
                }
                quoted = Some(value);
                current.clear();
            }
            ',' | ')' => {
                let arg = match quoted.take() {
                    Some(v) => {
                        if !current.trim().is_empty() {
                            return Err(GrammarError::AfterQuote);
                        }
                        Some(v)
                    }
                    None => {
                        let bare = current.trim();
                        // `tool()` has no arguments; `tool(a, )` has an empty second one.
                        if c == ')' && bare.is_empty() && args.is_empty() {
                            None
                        } else {
                            Some(bare.to_string())
                        }
                    }
                };
                args.extend(arg);
                current.clear();
                if c == ')' {
                    closed_at = Some(body_start + i);
                    break;
                }
            }
            '(' => return Err(GrammarError::Nested),
            other => {
                if quoted.is_some() && !other.is_whitespace() {
                    return Err(GrammarError::AfterQuote);
                }
                current.push(other);
            }
        }
    }

    let close = closed_at.ok_or(GrammarError::NotACall)?;
    if !text[close + 1..].trim().is_empty() {
        return Err(GrammarError::Trailing);
    }
    Ok(ToolCall {
        name: name.to_string(),
        args,
    })
}

/// Whether an argument must be quoted to survive a parse round trip.
pub fn needs_quotes(arg: &str) -> bool {
    arg.is_empty()
        || arg.trim() != arg
        || arg.contains([',', '(', ')', '"', '\\'])
}

pub fn quote(arg: &str) -> String {
    let mut out = String::with_capacity(arg.len() + 2);
    out.push('"');
    for c in arg.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Renders a call, quoting only the arguments that need it.
pub fn render_call<S: AsRef<str>>(name: &str, args: &[S]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{name}(");
    for (i, arg) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let arg = arg.as_ref();
        if needs_quotes(arg) {
            out.push_str(&quote(arg));
        } else {
            out.push_str(arg);
        }
    }
    out.push(')');
    out
}
