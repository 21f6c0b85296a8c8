use thiserror::Error;

use super::env::final_answer_payload;
use super::RETRY_PROMPT;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedStep {
    /// Empty when the output carries no `Thought` line.
    pub thought: String,
    /// Action text, or a full `Final Answer: ...` line.
    pub act: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepParseError {
    #[error("Your reply has no Act line. Write one line \"Thought t: ...\" followed by one line \"Act t: <tool call>\", or \"Final Answer: ...\" when you are done.")]
    MissingAct,
}

impl StepParseError {
    pub fn render(&self) -> String {
        format!("{self} {RETRY_PROMPT}")
    }
}

/// Text after `Label:` or `Label N:`.
fn labelled<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let rest = line.trim_start().strip_prefix(label)?;
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_digit() || c == ' ');
    rest.strip_prefix(':').map(str::trim)
}

fn act_label(line: &str) -> Option<&str> {
    labelled(line, "Action").or_else(|| labelled(line, "Act"))
}

fn is_boundary(line: &str) -> bool {
    line.trim().is_empty()
        || labelled(line, "Thought").is_some()
        || act_label(line).is_some()
        || labelled(line, "Observation").is_some()
}

/// A `Final Answer:` payload may continue over the following lines (long SQL).
fn final_answer_text(first: &str, rest: &[&str]) -> String {
    let mut text = first.trim().to_string();
    for line in rest.iter().take_while(|l| !is_boundary(l)) {
        text.push(' ');
        text.push_str(line.trim());
    }
    text
}

/// Extracts the first `Thought` line and the first `Act` or `Final Answer`
/// line after it. Anything else in the output is ignored.
pub fn parse_step(output: &str) -> Result<ParsedStep, StepParseError> {
    let lines: Vec<&str> = output.lines().collect();
    let (thought, start) = match lines.iter().position(|l| labelled(l, "Thought").is_some()) {
        Some(i) => (labelled(lines[i], "Thought").unwrap_or_default().to_string(), i + 1),
        None => (String::new(), 0),
    };
    for (j, line) in lines.iter().enumerate().skip(start) {
        if let Some(rest) = act_label(line) {
            let act = if final_answer_payload(rest).is_some() {
                final_answer_text(rest, &lines[j + 1..])
            } else {
                rest.to_string()
            };
            return Ok(ParsedStep { thought, act });
        }
        if final_answer_payload(line).is_some() {
            return Ok(ParsedStep {
                thought,
                act: final_answer_text(line, &lines[j + 1..]),
            });
        }
    }
    Err(StepParseError::MissingAct)
}

/// The first `Thought` line, or the first non-empty line when unlabelled.
pub(crate) fn thought_of(output: &str) -> String {
    output
        .lines()
        .find_map(|l| labelled(l, "Thought"))
        .or_else(|| output.lines().map(str::trim).find(|l| !l.is_empty()))
        .unwrap_or_default()
        .to_string()
}

/// Resolves a phase-2 reply to a 0-based candidate index: a leading 1-based
/// number, or the exact text of a candidate.
pub fn parse_selection(reply: &str, candidates: &[String]) -> Option<usize> {
    let first = reply.trim().lines().next().unwrap_or_default().trim();
    let first = act_label(first).unwrap_or(first);
    let digits: String = first.chars().take_while(char::is_ascii_digit).collect();
    if !digits.is_empty() {
        let n: usize = digits.parse().ok()?;
        return (1..=candidates.len()).contains(&n).then(|| n - 1);
    }
    let text = first.trim_end_matches('.');
    candidates.iter().position(|c| c == text)
}
