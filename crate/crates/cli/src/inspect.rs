use std::fmt::Write as _;
use std::path::Path;

use middleware_core::agent::{read_trace, Step, TraceFile, TraceSummary};

use crate::CliError;

pub fn cmd_inspect(path: &Path, step: Option<usize>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read trace {}: {e}", path.display())))?;
    let trace = read_trace(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    print!("{}", render(&name, &trace, step).map_err(CliError::Config)?);
    Ok(())
}

/// Text rendering of a trace; failed attempts are prefixed with `[RETRY k]`.
pub fn render(name: &str, trace: &TraceFile, only: Option<usize>) -> Result<String, String> {
    let mut out = format!("== {name}: {} steps", trace.steps.len());
    if let Some(first) = trace.steps.first() {
        let _ = write!(out, ", scheme {}", first.scheme);
    }
    out.push_str(" ==\n");
    match only {
        Some(t) => {
            let step = trace
                .steps
                .iter()
                .find(|s| s.t == t)
                .ok_or_else(|| format!("trace has no step {t}"))?;
            render_step(&mut out, step);
        }
        None => {
            for step in &trace.steps {
                render_step(&mut out, step);
            }
            if let Some(summary) = &trace.summary {
                render_summary(&mut out, summary);
            }
        }
    }
    Ok(out)
}

fn render_step(out: &mut String, step: &Step) {
    let t = step.t;
    let _ = writeln!(out, "Thought {t}: {}", step.thought);
    for (k, retry) in step.retries.iter().enumerate() {
        let k = k + 1;
        let _ = writeln!(out, "[RETRY {k}] Act {t}: {}", retry.act);
        for line in retry.obs.lines() {
            let _ = writeln!(out, "[RETRY {k}] Observation {t}: {line}");
        }
    }
    let _ = writeln!(out, "Act {t}: {}", step.act);
    let _ = writeln!(out, "Observation {t}: {}", step.obs);
}

fn render_summary(out: &mut String, s: &TraceSummary) {
    let _ = write!(out, "-- {}", s.terminal.as_str());
    if let Some(detail) = &s.detail {
        let _ = write!(out, " ({detail})");
    }
    let answer = s
        .answer
        .as_ref()
        .map_or_else(|| "none".to_string(), |a| serde_json::to_string(a).unwrap_or_default());
    let _ = writeln!(
        out,
        "; answered {}; answer {answer}; {} steps; {} input tokens; {} ms",
        s.answered, s.steps, s.input_tokens, s.wall_ms
    );
}
