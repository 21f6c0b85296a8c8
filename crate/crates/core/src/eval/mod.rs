//! Metrics, task files, suite runners and reports.

mod metrics;
mod report;
pub mod scripts;
mod suite;
mod tasks;

pub use metrics::{execute_rows, execution_accuracy, kb_f1, rows_match, set_f1, validity_sql};
pub use report::{
    check_ids, DbCell, DbRecord, DbReport, Efficiency, KbCell, KbRecord, KbReport, ReportError, RunReport,
};
pub use suite::{
    run_db_suite, run_db_task, run_kb_suite, run_kb_task, write_run, BackendFactory, SuiteError, SuiteOptions, SuiteRun,
    TaskRun,
};
pub use tasks::{
    load_db_tasks, load_kb_tasks, parse_db_tasks, parse_jsonl, parse_kb_tasks, DbTask, GoldAnswer, KbCategory,
    KbTask, TaskError,
};
