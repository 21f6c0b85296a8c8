use std::fmt::Write as _;

use super::env::Environment;
use super::trace::Step;
use super::AgentConfig;
use crate::kb::docs::SELECTION_INSTRUCTIONS;
use crate::llm::ChatMessage;

pub fn system_prompt(env: &dyn Environment, config: &AgentConfig) -> String {
    let mut out = String::from(env.instructions(config.scheme));
    out.push_str(env.tool_docs());
    if let Some(background) = env.background() {
        out.push('\n');
        out.push_str(&background);
        out.push('\n');
    }
    let demonstration = config.demonstration.as_deref().or(env.default_demonstration());
    if let Some(demo) = demonstration.filter(|d| !d.is_empty()) {
        out.push('\n');
        out.push_str(demo);
    }
    out
}

/// `Thought t / Act t / Observation t` blocks, with failed attempts inlined
/// before the action that finally ran.
pub fn transcript(steps: &[Step]) -> String {
    let mut out = String::new();
    for step in steps {
        let t = step.t;
        let _ = writeln!(out, "Thought {t}: {}", step.thought);
        for retry in &step.retries {
            let _ = writeln!(out, "Act {t}: {}\nObservation {t}: {}", retry.act, retry.obs);
        }
        let _ = writeln!(out, "Act {t}: {}\nObservation {t}: {}", step.act, step.obs);
    }
    out
}

fn user_prompt(env: &dyn Environment, question: &str, steps: &[Step]) -> String {
    let mut out = format!("Question: {question}\n");
    for line in env.task_header() {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&transcript(steps));
    out
}

/// Messages for the main context c_t.
pub fn context_messages(
    env: &dyn Environment,
    config: &AgentConfig,
    question: &str,
    steps: &[Step],
) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(system_prompt(env, config)),
        ChatMessage::user(user_prompt(env, question, steps)),
    ]
}

/// The main context as one string.
pub fn serialize_context(env: &dyn Environment, config: &AgentConfig, question: &str, steps: &[Step]) -> String {
    let [system, user]: [ChatMessage; 2] = context_messages(env, config, question, steps)
        .try_into()
        .expect("two messages");
    format!("{}\n\n{}", system.content, user.content)
}

/// Separate prompt asking for one of the numbered candidate actions.
pub fn selection_messages(question: &str, thought: &str, candidates: &[String]) -> Vec<ChatMessage> {
    let mut user = format!("Question: {question}\nThought: {thought}\nCandidate actions:\n");
    for (i, c) in candidates.iter().enumerate() {
        let _ = writeln!(user, "{}. {c}", i + 1);
    }
    user.push_str("Reply with the number of one action.");
    vec![ChatMessage::system(SELECTION_INSTRUCTIONS), ChatMessage::user(user)]
}

/// Input-size estimate: whitespace-separated tokens over all messages.
pub fn whitespace_tokens(messages: &[ChatMessage]) -> u64 {
    messages.iter().map(|m| m.content.split_whitespace().count() as u64).sum()
}
