//! Tool middleware for language-model agents working inside SQLite databases
//! and triple-store knowledge bases.
//!
//! The crate is split by concern:
//!
//! * [`kb`]: the triple store and the seven knowledge-base tools,
//! * [`db`]: the twelve database tools over a read-only SQLite file,
//! * [`agent`]: prompts, output parsing and the two control schemes,
//! * [`llm`]: model backends,
//! * [`eval`]: metrics, suites and reports,
//! * [`fixtures`]: the bundled knowledge base, database and task files.

pub mod agent;
pub mod db;
pub mod eval;
pub mod fixtures;
pub mod grammar;
pub mod kb;
pub mod llm;

// The guide under book/ is compiled here so its listings run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/knowledge-base.md")]
    mod knowledge_base {}
    #[doc = include_str!("../../../book/src/database.md")]
    mod database {}
    #[doc = include_str!("../../../book/src/agent-loop.md")]
    mod agent_loop {}
    #[doc = include_str!("../../../book/src/backends.md")]
    mod backends {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
