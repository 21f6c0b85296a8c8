use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Backend, BackendError, ChatMessage, CompletionParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Server root; `/v1/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: u64,
    /// Extra attempts after a 429 or 5xx reply.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com".into(),
            model: "gpt-4-0613".into(),
            timeout_secs: 120,
            max_retries: 5,
            initial_backoff_ms: 500,
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
}

/// OpenAI-compatible chat-completions client.
#[derive(Debug)]
pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// Reads the key from the configured environment variable. A missing
    /// variable is tolerated when the endpoint is local.
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let local = ["http://127.0.0.1", "http://localhost"]
            .iter()
            .any(|p| config.endpoint.starts_with(p));
        if api_key.is_none() && !local {
            return Err(BackendError::MissingCredential(config.api_key_env.clone()));
        }
        Ok(Self::with_key(config, api_key))
    }

    pub fn with_key(config: HttpConfig, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, api_key, agent }
    }

    fn url(&self) -> String {
        format!("{}/v1/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Request<'_>) -> Result<(u16, String), BackendError> {
        let mut request = self.agent.post(self.url());
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok((status, text))
    }
}

fn first_choice(body: &str) -> Result<String, BackendError> {
    let value: Value = serde_json::from_str(body).map_err(|e| BackendError::Protocol(e.to_string()))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Protocol("no choices[0].message.content in response".into()))
}

impl Backend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError> {
        let body = Request {
            model: &self.config.model,
            messages,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
            stop: &params.stop,
        };
        let mut delay = Duration::from_millis(self.config.initial_backoff_ms);
        let mut attempts = 0;
        loop {
            attempts += 1;
            let (status, text) = self.attempt(&body)?;
            match status {
                200..=299 => return first_choice(&text),
                429 | 500..=599 => {
                    if attempts > self.config.max_retries {
                        return Err(BackendError::RetriesExhausted { attempts, status });
                    }
                    std::thread::sleep(delay);
                    delay = (delay * 2).min(Duration::from_secs(60));
                }
                _ => return Err(BackendError::Status { status, body: text }),
            }
        }
    }
}
