use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use middleware_core::agent::Scheme;
use middleware_core::eval::scripts::{db_gold_script, kb_decoupled_script, kb_error_feedback_script};
use middleware_core::eval::{
    load_db_tasks, load_kb_tasks, run_db_suite, run_kb_suite, write_run, DbTask, KbTask, SuiteError,
    SuiteOptions, SuiteRun,
};
use middleware_core::kb::{load_triples, TripleStore};
use middleware_core::llm::{Backend, BackendError, CachedBackend, HttpBackend, ScriptedBackend};

use crate::config::{BackendKind, Environment, RunArgs, RunSpec};
use crate::CliError;

pub fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let spec = args.resolve()?;
    let options = SuiteOptions {
        config: spec.agent.clone(),
        jobs: spec.jobs,
        ..SuiteOptions::default()
    };
    let run = match spec.environment {
        Environment::Kb => run_kb(&spec, &options)?,
        Environment::Db => run_db(&spec, &options)?,
    };
    write_run(&spec.out, &run).map_err(|e| CliError::Io(format!("cannot write to {}: {e}", spec.out.display())))?;
    print!("{}", run.report.render_text());
    let failed = run.transport_failures();
    if failed > 0 {
        return Err(CliError::Transport(format!(
            "{failed} of {} tasks stopped on a backend failure",
            run.runs.len()
        )));
    }
    Ok(())
}

fn suite_error(e: SuiteError) -> CliError {
    match e {
        SuiteError::Agent(_) | SuiteError::BadEntity { .. } | SuiteError::Pool(_) => CliError::Config(e.to_string()),
        SuiteError::Db { .. } => CliError::Io(e.to_string()),
        SuiteError::Backend { .. } => CliError::Transport(e.to_string()),
    }
}

/// Every task's replies, keyed by task id.
type Scripts = HashMap<String, Vec<String>>;

/// Shared model client for the non-scripted backends.
enum Live {
    Http(Arc<HttpBackend>),
    Cached(Arc<CachedBackend<HttpBackend>>),
}

impl Live {
    fn open(spec: &RunSpec) -> Result<Self, CliError> {
        let http = HttpBackend::new(spec.http.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(match spec.backend {
            BackendKind::Cached => {
                if let Some(dir) = spec.cache.parent() {
                    std::fs::create_dir_all(dir)
                        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
                }
                Live::Cached(Arc::new(
                    CachedBackend::open(http, &spec.cache).map_err(|e| CliError::Io(e.to_string()))?,
                ))
            }
            _ => Live::Http(Arc::new(http)),
        })
    }

    fn backend(&self) -> Box<dyn Backend> {
        match self {
            Live::Http(b) => Box::new(Arc::clone(b)),
            Live::Cached(b) => Box::new(Arc::clone(b)),
        }
    }
}

fn read_scripts(dir: &Path, ids: impl Iterator<Item = String>) -> Result<Scripts, CliError> {
    ids.map(|id| {
        let path = dir.join(format!("{id}.json"));
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Io(format!("cannot read script {}: {e}", path.display())))?;
        let replies: Vec<String> = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("script {}: {e}", path.display())))?;
        Ok((id, replies))
    })
    .collect()
}

fn scripted_factory<T>(scripts: Scripts, id: impl Fn(&T) -> &str) -> impl Fn(&T) -> Result<Box<dyn Backend>, BackendError> {
    move |task| {
        let replies = scripts.get(id(task)).cloned().unwrap_or_default();
        Ok(Box::new(ScriptedBackend::new(replies)) as Box<dyn Backend>)
    }
}

fn run_kb(spec: &RunSpec, options: &SuiteOptions) -> Result<SuiteRun, CliError> {
    let tasks = load_kb_tasks(&spec.tasks).map_err(|e| CliError::Io(e.to_string()))?;
    let file = std::fs::File::open(&spec.kb)
        .map_err(|e| CliError::Io(format!("cannot open triples {}: {e}", spec.kb.display())))?;
    let store: Arc<TripleStore> = Arc::new(
        load_triples(std::io::BufReader::new(file))
            .map_err(|e| CliError::Io(format!("{}: {e}", spec.kb.display())))?,
    );
    let ids = || tasks.iter().map(|t| t.id.clone());
    let result = match spec.backend {
        BackendKind::Scripted => {
            let scripts = match &spec.scripts {
                Some(dir) => read_scripts(dir, ids())?,
                None => gold_kb_scripts(&tasks, &store, options)?,
            };
            run_kb_suite(store, &tasks, &scripted_factory(scripts, |t: &KbTask| &t.id), options)
        }
        _ => {
            let live = Live::open(spec)?;
            run_kb_suite(store, &tasks, &|_: &KbTask| Ok(live.backend()), options)
        }
    };
    result.map_err(suite_error)
}

fn gold_kb_scripts(tasks: &[KbTask], store: &Arc<TripleStore>, options: &SuiteOptions) -> Result<Scripts, CliError> {
    tasks
        .iter()
        .map(|task| {
            let script = match options.config.scheme {
                Scheme::ErrorFeedback => kb_error_feedback_script(task),
                Scheme::Decoupled => kb_decoupled_script(task, store, options.kb_limits),
            };
            script
                .map(|s| (task.id.clone(), s))
                .map_err(|e| CliError::Config(format!("scripted backend: {e}")))
        })
        .collect()
}

fn run_db(spec: &RunSpec, options: &SuiteOptions) -> Result<SuiteRun, CliError> {
    let tasks: Vec<DbTask> = load_db_tasks(&spec.tasks).map_err(|e| CliError::Io(e.to_string()))?;
    for task in &tasks {
        let path = spec.db_root.join(&task.db);
        if !path.is_file() {
            return Err(CliError::Io(format!("task {}: database {} not found", task.id, path.display())));
        }
    }
    let result = match spec.backend {
        BackendKind::Scripted => {
            let scripts = match &spec.scripts {
                Some(dir) => read_scripts(dir, tasks.iter().map(|t| t.id.clone()))?,
                None => tasks
                    .iter()
                    .map(|task| {
                        db_gold_script(task, &spec.db_root.join(&task.db))
                            .map(|s| (task.id.clone(), s))
                            .map_err(|e| CliError::Config(format!("scripted backend: {e}")))
                    })
                    .collect::<Result<_, _>>()?,
            };
            run_db_suite(&spec.db_root, &tasks, &scripted_factory(scripts, |t: &DbTask| &t.id), options)
        }
        _ => {
            let live = Live::open(spec)?;
            run_db_suite(&spec.db_root, &tasks, &|_: &DbTask| Ok(live.backend()), options)
        }
    };
    result.map_err(suite_error)
}
