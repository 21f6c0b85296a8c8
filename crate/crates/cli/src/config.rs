//! Run settings: a TOML file merged with command-line flags, flags winning.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use middleware_core::agent::{AgentConfig, Scheme};
use middleware_core::llm::HttpConfig;
use middleware_core::{db, kb};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Kb,
    Db,
}

impl Environment {
    pub fn tool_docs(self) -> &'static str {
        match self {
            Environment::Kb => kb::docs::TOOL_DOCS,
            Environment::Db => db::docs::TOOL_DOCS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// OpenAI-compatible HTTP endpoint.
    Http,
    /// Replays each task's gold actions, or per-task scripts from `--scripts`.
    Scripted,
    /// HTTP behind an on-disk response cache.
    Cached,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "env", value_enum)]
    pub environment: Option<Environment>,
    /// JSON-lines task file.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    /// Triple file for KB runs; defaults to kb.tsv beside the task file.
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Directory that task database paths are relative to; defaults to the
    /// task file's directory.
    #[arg(long)]
    pub db_root: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Directory of `<task id>.json` files, each a JSON array of replies,
    /// used by the scripted backend instead of gold replay.
    #[arg(long)]
    pub scripts: Option<PathBuf>,
    /// error_feedback or decoupled.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub max_retries: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Response cache for the cached backend; defaults to cache.jsonl in the
    /// output directory.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    environment: Option<Environment>,
    tasks: Option<PathBuf>,
    kb: Option<PathBuf>,
    db_root: Option<PathBuf>,
    backend: Option<BackendKind>,
    scripts: Option<PathBuf>,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    cache: Option<PathBuf>,
    #[serde(default)]
    agent: AgentConfig,
    #[serde(default)]
    http: HttpConfig,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub environment: Environment,
    pub tasks: PathBuf,
    pub kb: PathBuf,
    pub db_root: PathBuf,
    pub backend: BackendKind,
    pub scripts: Option<PathBuf>,
    pub out: PathBuf,
    pub jobs: usize,
    pub cache: PathBuf,
    pub agent: AgentConfig,
    pub http: HttpConfig,
}

fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut file: FileConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    // Paths in the file are relative to the file itself.
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut file.tasks,
        &mut file.kb,
        &mut file.db_root,
        &mut file.scripts,
        &mut file.out,
        &mut file.cache,
    ]
    .into_iter()
    .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(file)
}

impl RunArgs {
    pub fn resolve(self) -> Result<RunSpec, CliError> {
        let file = match &self.config {
            Some(path) => read_file_config(path)?,
            None => FileConfig::default(),
        };
        let environment = self
            .environment
            .or(file.environment)
            .ok_or_else(|| CliError::Config("no environment given (--env kb|db)".into()))?;
        let tasks = self
            .tasks
            .or(file.tasks)
            .ok_or_else(|| CliError::Config("no task file given (--tasks)".into()))?;
        let task_dir = tasks.parent().map(Path::to_path_buf).unwrap_or_default();

        let mut agent = file.agent;
        if let Some(s) = self.scheme {
            agent.scheme = s;
        }
        if let Some(n) = self.max_steps {
            agent.max_steps = n;
        }
        if let Some(n) = self.max_retries {
            agent.max_retries = n;
        }
        if let Some(t) = self.temperature {
            agent.params.temperature = t;
        }
        if environment == Environment::Db && agent.scheme == Scheme::Decoupled {
            return Err(CliError::Config(
                "the decoupled scheme needs an enumerable action space and is only available with --env kb".into(),
            ));
        }

        let mut http = file.http;
        if let Some(e) = self.endpoint {
            http.endpoint = e;
        }
        if let Some(m) = self.model {
            http.model = m;
        }

        let out = self.out.or(file.out).unwrap_or_else(|| PathBuf::from("out"));
        let cache = self.cache.or(file.cache).unwrap_or_else(|| out.join("cache.jsonl"));
        Ok(RunSpec {
            environment,
            kb: self.kb.or(file.kb).unwrap_or_else(|| task_dir.join("kb.tsv")),
            db_root: self.db_root.or(file.db_root).unwrap_or(task_dir),
            tasks,
            backend: self.backend.or(file.backend).unwrap_or(BackendKind::Scripted),
            scripts: self.scripts.or(file.scripts),
            jobs: self.jobs.or(file.jobs).unwrap_or(1),
            out,
            cache,
            agent,
            http,
        })
    }
}
