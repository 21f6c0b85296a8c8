use std::time::Instant;

use super::env::{Answer, Environment, Rejected};
use super::parse::{parse_selection, parse_step, thought_of};
use super::prompt::{context_messages, selection_messages, whitespace_tokens};
use super::trace::{EpisodeResult, Retry, Step, Terminal};
use super::{AgentConfig, AgentError, Scheme, RETRY_PROMPT, STOP_SEQUENCE};
use crate::llm::{Backend, BackendError, ChatMessage, CompletionParams};

struct Episode<'a> {
    scheme: Scheme,
    backend: &'a dyn Backend,
    started: Option<Instant>,
    steps: Vec<Step>,
    input_tokens: u64,
    model_calls: usize,
}

impl<'a> Episode<'a> {
    fn new(scheme: Scheme, backend: &'a dyn Backend) -> Self {
        Self {
            scheme,
            backend,
            started: backend.timed().then(Instant::now),
            steps: Vec::new(),
            input_tokens: 0,
            model_calls: 0,
        }
    }

    fn complete(&mut self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError> {
        self.input_tokens += whitespace_tokens(messages);
        self.model_calls += 1;
        self.backend.complete(messages, params)
    }

    fn step(&self, t: usize, thought: &str, act: String, obs: String, retries: Vec<Retry>) -> Step {
        Step {
            t,
            thought: thought.to_string(),
            act,
            obs,
            retries,
            scheme: self.scheme,
        }
    }

    fn finish(self, terminal: Terminal, detail: Option<String>, answer: Option<Answer>) -> EpisodeResult {
        EpisodeResult {
            scheme: self.scheme,
            steps: self.steps,
            terminal,
            detail,
            answer,
            input_tokens: self.input_tokens,
            wall_ms: self.started.map_or(0, |s| s.elapsed().as_millis() as u64),
            model_calls: self.model_calls,
        }
    }
}

fn with_stops(params: &CompletionParams, stops: &[&str]) -> CompletionParams {
    let mut params = params.clone();
    for stop in stops {
        if !params.stop.iter().any(|s| s == stop) {
            params.stop.push(stop.to_string());
        }
    }
    params
}

fn first_line(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or_default()
        .to_string()
}

/// Runs one episode with the scheme named in `config`.
pub fn run_episode(
    question: &str,
    env: &mut dyn Environment,
    backend: &dyn Backend,
    config: &AgentConfig,
) -> Result<EpisodeResult, AgentError> {
    match config.scheme {
        Scheme::ErrorFeedback => Ok(run_episode_error_feedback(question, env, backend, config)),
        Scheme::Decoupled => run_episode_decoupled(question, env, backend, config),
    }
}

/// Thought and action come from one completion; a failed action is answered
/// with its error and retried within the same step.
pub fn run_episode_error_feedback(
    question: &str,
    env: &mut dyn Environment,
    backend: &dyn Backend,
    config: &AgentConfig,
) -> EpisodeResult {
    let mut ep = Episode::new(Scheme::ErrorFeedback, backend);
    let params = with_stops(&config.params, &[STOP_SEQUENCE]);

    for t in 1..=config.max_steps {
        let mut thought: Option<String> = None;
        let mut retries: Vec<Retry> = Vec::new();
        loop {
            let mut context = ep.steps.clone();
            if let Some(last) = retries.last() {
                let earlier = retries[..retries.len() - 1].to_vec();
                let pending = ep.step(t, thought.as_deref().unwrap_or_default(), last.act.clone(), last.obs.clone(), earlier);
                context.push(pending);
            }
            let messages = context_messages(env, config, question, &context);
            let output = match ep.complete(&messages, &params) {
                Ok(output) => output,
                Err(e) => return ep.finish(Terminal::TransportError, Some(e.to_string()), None),
            };
            let outcome = match parse_step(&output) {
                Ok(parsed) => {
                    thought.get_or_insert(parsed.thought);
                    env.act(&parsed.act)
                }
                Err(e) => {
                    thought.get_or_insert_with(|| thought_of(&output));
                    Err(Rejected {
                        action: first_line(&output),
                        observation: e.render(),
                    })
                }
            };
            let thought = thought.clone().unwrap_or_default();
            match outcome {
                Ok(done) => {
                    let step = ep.step(t, &thought, done.action, done.observation, retries);
                    ep.steps.push(step);
                    if let Some(answer) = done.answer {
                        return ep.finish(Terminal::FinalAnswer, None, Some(answer));
                    }
                    break;
                }
                Err(rejected) if retries.len() >= config.max_retries => {
                    let step = ep.step(t, &thought, rejected.action, rejected.observation, retries);
                    ep.steps.push(step);
                    let detail = format!("step {t} failed after {} retries", config.max_retries);
                    return ep.finish(Terminal::RetriesExhausted, Some(detail), None);
                }
                Err(rejected) => retries.push(Retry {
                    act: rejected.action,
                    obs: rejected.observation,
                }),
            }
        }
    }
    ep.finish(Terminal::MaxSteps, None, None)
}

/// Thought from the main context, then the action picked from the numbered
/// list of legal actions in a separate prompt.
pub fn run_episode_decoupled(
    question: &str,
    env: &mut dyn Environment,
    backend: &dyn Backend,
    config: &AgentConfig,
) -> Result<EpisodeResult, AgentError> {
    if env.candidates().is_none() {
        return Err(AgentError::DecoupledUnsupported(env.kind()));
    }
    let mut ep = Episode::new(Scheme::Decoupled, backend);
    let thought_params = with_stops(&config.params, &["\nAct", STOP_SEQUENCE]);
    let select_params = config.params.clone();

    for t in 1..=config.max_steps {
        let messages = context_messages(env, config, question, &ep.steps);
        let output = match ep.complete(&messages, &thought_params) {
            Ok(output) => output,
            Err(e) => return Ok(ep.finish(Terminal::TransportError, Some(e.to_string()), None)),
        };
        let thought = thought_of(&output);

        let candidates = env.candidates().unwrap_or_default();
        if candidates.is_empty() {
            return Ok(ep.finish(Terminal::RetriesExhausted, Some(format!("no legal action at step {t}")), None));
        }
        let mut selection = selection_messages(question, &thought, &candidates);
        let mut retries: Vec<Retry> = Vec::new();
        loop {
            let reply = match ep.complete(&selection, &select_params) {
                Ok(reply) => reply,
                Err(e) => return Ok(ep.finish(Terminal::TransportError, Some(e.to_string()), None)),
            };
            let outcome = match parse_selection(&reply, &candidates) {
                Some(i) => env.act(&candidates[i]),
                None => Err(Rejected {
                    action: first_line(&reply),
                    observation: format!(
                        "{:?} is not one of the listed actions. Reply with a number from 1 to {}. {RETRY_PROMPT}",
                        first_line(&reply),
                        candidates.len()
                    ),
                }),
            };
            match outcome {
                Ok(done) => {
                    let step = ep.step(t, &thought, done.action, done.observation, retries);
                    ep.steps.push(step);
                    if let Some(answer) = done.answer {
                        return Ok(ep.finish(Terminal::FinalAnswer, None, Some(answer)));
                    }
                    break;
                }
                Err(rejected) if retries.len() >= config.max_retries => {
                    let step = ep.step(t, &thought, rejected.action, rejected.observation, retries);
                    ep.steps.push(step);
                    let detail = format!("no valid selection at step {t} after {} retries", config.max_retries);
                    return Ok(ep.finish(Terminal::RetriesExhausted, Some(detail), None));
                }
                Err(rejected) => {
                    selection.push(ChatMessage::assistant(reply));
                    selection.push(ChatMessage::user(rejected.observation.clone()));
                    retries.push(Retry {
                        act: rejected.action,
                        obs: rejected.observation,
                    });
                }
            }
        }
    }
    Ok(ep.finish(Terminal::MaxSteps, None, None))
}
