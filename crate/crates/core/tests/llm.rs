use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use middleware_core::agent::{run_episode, AgentConfig, KbEnv, Scheme};
use middleware_core::eval::scripts::kb_error_feedback_script;
use middleware_core::fixtures;
use middleware_core::kb::{EntityId, KbSession};
use middleware_core::llm::{
    Backend, BackendError, CachedBackend, ChatMessage, CompletionParams, HttpBackend, HttpConfig, ScriptedBackend,
};
use proptest::prelude::*;

/// Answers each request with the next `(status, body)` pair and records the
/// request bodies.
fn stub_server(replies: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut request = vec![0; length];
            reader.read_exact(&mut request).unwrap();
            bodies.push(String::from_utf8(request).unwrap());
            write!(
                reader.into_inner(),
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        bodies
    });
    (url, handle)
}

fn completion(text: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

fn http(url: &str) -> HttpBackend {
    HttpBackend::with_key(
        HttpConfig {
            endpoint: url.into(),
            model: "stub-model".into(),
            max_retries: 3,
            initial_backoff_ms: 1,
            ..HttpConfig::default()
        },
        Some("secret".into()),
    )
}

#[test]
fn request_shape_and_reply() {
    let (url, server) = stub_server(vec![(200, completion("hello"))]);
    let params = CompletionParams {
        temperature: 0.0,
        max_tokens: Some(64),
        stop: vec!["\nObservation".into()],
    };
    let reply = http(&url).complete(&[ChatMessage::system("s"), ChatMessage::user("echo")], &params).unwrap();
    assert_eq!(reply, "hello");
    let body: serde_json::Value = serde_json::from_str(&server.join().unwrap()[0]).unwrap();
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["messages"][1], serde_json::json!({"role": "user", "content": "echo"}));
    assert_eq!(body["stop"][0], "\nObservation");
    assert_eq!(body["max_tokens"], 64);
}

#[test]
fn rate_limits_are_retried() {
    let (url, server) = stub_server(vec![(429, "{}".into()), (429, "{}".into()), (200, completion("ok"))]);
    let reply = http(&url).complete(&[ChatMessage::user("x")], &CompletionParams::default());
    assert_eq!(reply.unwrap(), "ok");
    assert_eq!(server.join().unwrap().len(), 3);
}

#[test]
fn bad_replies() {
    let (url, server) = stub_server(vec![(200, "not json".into()), (200, "{\"choices\": []}".into()), (400, "nope".into())]);
    let backend = http(&url);
    let p = CompletionParams::default();
    assert!(matches!(backend.complete(&[], &p), Err(BackendError::Protocol(_))));
    assert!(matches!(backend.complete(&[], &p), Err(BackendError::Protocol(_))));
    assert_eq!(
        backend.complete(&[], &p),
        Err(BackendError::Status { status: 400, body: "nope".into() })
    );
    server.join().unwrap();

    let (url, server) = stub_server(vec![(503, "{}".into()); 4]);
    assert_eq!(
        http(&url).complete(&[], &p),
        Err(BackendError::RetriesExhausted { attempts: 4, status: 503 })
    );
    server.join().unwrap();
}

/// Counts calls and answers with a function of the last message.
struct Counting {
    calls: AtomicUsize,
}

impl Backend for Counting {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let last = messages.last().map_or("", |m| m.content.as_str());
        Ok(format!("{last}@{}", params.temperature))
    }
}

#[test]
fn cache_hits_skip_the_inner_backend() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let messages = [ChatMessage::user("q")];
    let p = CompletionParams::default();
    {
        let cache = CachedBackend::open(Counting { calls: AtomicUsize::new(0) }, &path).unwrap();
        let first = cache.complete(&messages, &p).unwrap();
        assert_eq!(cache.complete(&messages, &p).unwrap(), first);
        assert_eq!(cache.inner().calls.load(Ordering::SeqCst), 1);
        let warmer = CompletionParams { temperature: 0.7, ..p.clone() };
        assert_ne!(cache.complete(&messages, &warmer).unwrap(), first);
        assert_eq!(cache.inner().calls.load(Ordering::SeqCst), 2);
        assert_eq!((cache.hits(), cache.misses()), (1, 2));
    }
    let reopened = CachedBackend::open(ScriptedBackend::new(Vec::<String>::new()), &path).unwrap();
    assert_eq!(reopened.complete(&messages, &p).unwrap(), "q@0");
    assert_eq!(reopened.inner().served(), 0);
}

#[test]
fn corrupt_cache_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    std::fs::write(&path, "{\"key\": 1}\n").unwrap();
    assert!(matches!(
        CachedBackend::open(ScriptedBackend::default(), &path),
        Err(BackendError::Cache(_))
    ));
}

#[test]
fn recorded_run_replays_offline() {
    let store = fixtures::kb_store();
    let task = fixtures::kb_tasks().into_iter().nth(3).unwrap();
    let entities: Vec<EntityId> = task.entities.iter().map(|e| EntityId::new(e.as_str()).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let cfg = AgentConfig {
        scheme: Scheme::ErrorFeedback,
        ..AgentConfig::default()
    };
    let episode = |backend: &dyn Backend| {
        let mut env = KbEnv::new(KbSession::new(Arc::clone(&store), entities.clone()));
        run_episode(&task.question, &mut env, backend, &cfg).unwrap()
    };

    let recorded = {
        let cache = CachedBackend::open(ScriptedBackend::new(kb_error_feedback_script(&task).unwrap()), &path).unwrap();
        episode(&cache)
    };
    assert!(recorded.answered());
    let offline = CachedBackend::open(ScriptedBackend::default(), &path).unwrap();
    let replayed = episode(&offline);
    assert_eq!(replayed, recorded);
    assert_eq!(offline.misses(), 0);
}

/// Replies with a pseudo-random but prompt-determined string.
struct Hashing {
    log: Mutex<Vec<String>>,
}

impl Backend for Hashing {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, BackendError> {
        let key = middleware_core::llm::cache_key(messages, params);
        self.log.lock().unwrap().push(key.clone());
        Ok(key[..8].to_string())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cache_is_transparent(prompts in prop::collection::vec(("[a-c]{1,3}", 0..3u8), 1..30)) {
        let dir = tempfile::tempdir().unwrap();
        let direct = Hashing { log: Mutex::new(Vec::new()) };
        let cache = CachedBackend::open(Hashing { log: Mutex::new(Vec::new()) }, dir.path().join("c.jsonl")).unwrap();
        let mut distinct = std::collections::BTreeSet::new();
        for (text, t) in &prompts {
            let messages = [ChatMessage::user(text.clone())];
            let params = CompletionParams { temperature: f64::from(*t) / 2.0, ..CompletionParams::default() };
            prop_assert_eq!(cache.complete(&messages, &params).unwrap(), direct.complete(&messages, &params).unwrap());
            distinct.insert((text.clone(), *t));
        }
        prop_assert_eq!(cache.inner().log.lock().unwrap().len(), distinct.len());
        prop_assert_eq!(cache.hits() + cache.misses(), prompts.len());
    }
}
