//! Model backends: a chat-completions HTTP client, a scripted backend for
//! tests, and a record/replay cache that wraps either.

mod cache;
mod http;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cache_key, CachedBackend};
pub use http::{HttpBackend, HttpConfig};
pub use scripted::ScriptedBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub stop: Vec<String>,
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: Some(512),
            stop: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("still rate limited or unavailable after {attempts} attempts (last status {status})")]
    RetriesExhausted { attempts: u32, status: u16 },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("scripted backend exhausted after {served} responses")]
    Exhausted { served: usize },
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("cache error: {0}")]
    Cache(String),
}

/// A chat model. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError>;

    /// Whether wall-clock time is meaningful for this backend. Deterministic
    /// backends return false so that recorded timings stay reproducible.
    fn timed(&self) -> bool {
        true
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError> {
        (**self).complete(messages, params)
    }

    fn timed(&self) -> bool {
        (**self).timed()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError> {
        (**self).complete(messages, params)
    }

    fn timed(&self) -> bool {
        (**self).timed()
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError> {
        (**self).complete(messages, params)
    }

    fn timed(&self) -> bool {
        (**self).timed()
    }
}
