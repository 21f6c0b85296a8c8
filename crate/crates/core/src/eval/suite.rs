//! Runs a task suite, one isolated episode per task, optionally in parallel.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use super::metrics::{execution_accuracy, kb_f1, validity_sql};
use super::report::{DbRecord, DbReport, KbRecord, KbReport, RunReport};
use super::tasks::{DbTask, KbTask};
use crate::agent::{run_episode, AgentConfig, AgentError, Answer, DbEnv, EpisodeResult, KbEnv};
use crate::db::{DbError, DbLimits, DbSession};
use crate::kb::{EntityId, KbLimits, KbSession, TripleStore};
use crate::llm::{Backend, BackendError};

/// Builds the backend for one task.
pub type BackendFactory<'a, T> = dyn Fn(&T) -> Result<Box<dyn Backend>, BackendError> + Sync + 'a;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteOptions {
    pub config: AgentConfig,
    /// Worker threads; 0 and 1 both mean sequential.
    pub jobs: usize,
    pub kb_limits: KbLimits,
    pub db_limits: DbLimits,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRun {
    pub id: String,
    pub result: EpisodeResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRun {
    pub report: RunReport,
    pub runs: Vec<TaskRun>,
}

impl SuiteRun {
    /// Whether some episode ended on a backend failure.
    pub fn transport_failures(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.result.terminal == crate::agent::Terminal::TransportError)
            .count()
    }
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("task {task}: {source}")]
    Db {
        task: String,
        #[source]
        source: DbError,
    },
    #[error("task {task}: cannot create backend: {source}")]
    Backend {
        task: String,
        #[source]
        source: BackendError,
    },
    #[error("task {task}: invalid topic entity {entity:?}")]
    BadEntity { task: String, entity: String },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

fn parallel_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>, SuiteError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, SuiteError> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SuiteError::Pool(e.to_string()))?;
    pool.install(|| items.par_iter().map(f).collect())
}

pub fn run_kb_task(
    store: &Arc<TripleStore>,
    task: &KbTask,
    backend: &dyn Backend,
    options: &SuiteOptions,
) -> Result<(KbRecord, EpisodeResult), SuiteError> {
    let entities = task
        .entities
        .iter()
        .map(|e| {
            EntityId::new(e.as_str()).map_err(|_| SuiteError::BadEntity {
                task: task.id.clone(),
                entity: e.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let session = KbSession::new(Arc::clone(store), entities).with_limits(options.kb_limits);
    let mut env = KbEnv::new(session);
    let result = run_episode(&task.question, &mut env, backend, &options.config)?;
    let answer = match (&result.answer, result.answered()) {
        (Some(Answer::Kb(a)), true) => Some(a.clone()),
        _ => None,
    };
    let record = KbRecord {
        id: task.id.clone(),
        category: task.category,
        f1: answer.as_ref().map_or(0.0, |a| kb_f1(Some(a), &task.gold_answer)),
        va: answer.is_some(),
        answer,
        terminal: result.terminal,
        steps: result.steps.len(),
        retries: result.retry_count(),
        input_tokens: result.input_tokens,
        wall_ms: result.wall_ms,
    };
    Ok((record, result))
}

pub fn run_kb_suite(
    store: Arc<TripleStore>,
    tasks: &[KbTask],
    backends: &BackendFactory<'_, KbTask>,
    options: &SuiteOptions,
) -> Result<SuiteRun, SuiteError> {
    let outcomes = parallel_map(options.jobs, tasks, |task| {
        let backend = backends(task).map_err(|source| SuiteError::Backend {
            task: task.id.clone(),
            source,
        })?;
        run_kb_task(&store, task, backend.as_ref(), options)
    })?;
    let (records, runs) = split(outcomes);
    Ok(SuiteRun {
        report: RunReport::Kb(KbReport::from_records(options.config.scheme, records)),
        runs,
    })
}

pub fn run_db_task(
    db_root: &Path,
    task: &DbTask,
    backend: &dyn Backend,
    options: &SuiteOptions,
) -> Result<(DbRecord, EpisodeResult), SuiteError> {
    let session = DbSession::open(db_root.join(&task.db))
        .map_err(|source| SuiteError::Db {
            task: task.id.clone(),
            source,
        })?
        .with_limits(options.db_limits);
    let mut env = DbEnv::new(session);
    let result = run_episode(&task.question, &mut env, backend, &options.config)?;
    let pred_sql = match (&result.answer, result.answered()) {
        (Some(Answer::Sql { sql }), true) => Some(sql.clone()),
        _ => None,
    };
    let conn = env.session.connection();
    let record = DbRecord {
        id: task.id.clone(),
        requires_content: task.requires_content,
        ex: pred_sql
            .as_deref()
            .is_some_and(|p| execution_accuracy(p, &task.gold_sql, conn)),
        va: pred_sql.as_deref().is_some_and(|p| validity_sql(p, conn)),
        pred_sql,
        terminal: result.terminal,
        steps: result.steps.len(),
        retries: result.retry_count(),
        input_tokens: result.input_tokens,
        wall_ms: result.wall_ms,
    };
    Ok((record, result))
}

/// `db_root` is the directory task database paths are resolved against.
pub fn run_db_suite(
    db_root: &Path,
    tasks: &[DbTask],
    backends: &BackendFactory<'_, DbTask>,
    options: &SuiteOptions,
) -> Result<SuiteRun, SuiteError> {
    let outcomes = parallel_map(options.jobs, tasks, |task| {
        let backend = backends(task).map_err(|source| SuiteError::Backend {
            task: task.id.clone(),
            source,
        })?;
        run_db_task(db_root, task, backend.as_ref(), options)
    })?;
    let (records, runs) = split(outcomes);
    Ok(SuiteRun {
        report: RunReport::Db(DbReport::from_records(options.config.scheme, records)),
        runs,
    })
}

trait HasId {
    fn id(&self) -> &str;
}

impl HasId for KbRecord {
    fn id(&self) -> &str {
        &self.id
    }
}

impl HasId for DbRecord {
    fn id(&self) -> &str {
        &self.id
    }
}

fn split<R: HasId>(outcomes: Vec<(R, EpisodeResult)>) -> (Vec<R>, Vec<TaskRun>) {
    outcomes
        .into_iter()
        .map(|(record, result)| {
            let run = TaskRun {
                id: record.id().to_string(),
                result,
            };
            (record, run)
        })
        .unzip()
}

/// Writes `traces/<id>.jsonl`, `report.json` and `report.txt` under `dir`.
pub fn write_run(dir: &Path, run: &SuiteRun) -> std::io::Result<()> {
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces)?;
    for task in &run.runs {
        std::fs::write(traces.join(format!("{}.jsonl", task.id)), task.result.to_jsonl())?;
    }
    std::fs::write(dir.join("report.json"), run.report.to_json())?;
    std::fs::write(dir.join("report.txt"), run.report.render_text())?;
    Ok(())
}
