//! Knowledge-base environment: the triple store and the seven KB tools.

mod action;
pub mod docs;
mod error;
mod session;
mod store;

pub use action::{KbAction, KbTool, Operand, VarId};
pub use error::{render_error, KbErrorCode, KbToolError};
pub use session::{render_list, render_set, KbAnswer, KbLimits, KbObservation, KbSession, Variable};
pub use store::{
    load_triples, validate_token, EntityId, LoadError, Objects, TokenError, Triple, TripleStore,
    TypedObject, NUMBER_MARKER, TYPE_RELATION,
};
