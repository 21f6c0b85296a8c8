use std::collections::BTreeSet;

use thiserror::Error;

use super::action::{KbTool, VarId};
use crate::agent::RETRY_PROMPT;

/// Error categories surfaced to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KbErrorCode {
    UnknownTool,
    BadArity,
    UnknownArgument,
    PrerequisiteViolation,
    TypeMismatch,
    NonNumericAttribute,
    /// The action text does not follow the call grammar.
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbToolError {
    #[error("{name} is not a valid tool.")]
    UnknownTool { name: String },
    #[error("{tool} takes {expected} argument(s) but {found} were given.")]
    BadArity {
        tool: KbTool,
        expected: usize,
        found: usize,
    },
    #[error("{token} is neither an entity from the question nor an existing variable.")]
    UnknownArgument { token: String, known: Vec<String> },
    #[error("{tool} needs a variable produced by get_neighbors, but {token} is an entity.")]
    NotAVariable { tool: KbTool, token: String },
    #[error("{relation} is not a relation of {subject} returned by get_relations.")]
    RelationNotListed { subject: String, relation: String },
    #[error("{attribute} is not an attribute of {variable} returned by get_attributes.")]
    AttributeNotListed { variable: VarId, attribute: String },
    #[error("{left} ({left_classes}) and {right} ({right_classes}) are not of the same type.", left_classes = join(.left_classes), right_classes = join(.right_classes))]
    TypeMismatch {
        left: VarId,
        left_classes: BTreeSet<String>,
        right: VarId,
        right_classes: BTreeSet<String>,
    },
    #[error("{attribute} has no numeric values on {variable}.")]
    NonNumericAttribute { variable: VarId, attribute: String },
    #[error("Could not parse the action {text:?}: {reason}.")]
    Malformed { text: String, reason: String },
}

fn join(items: &BTreeSet<String>) -> String {
    items.iter().cloned().collect::<Vec<_>>().join(", ")
}

impl KbToolError {
    pub fn code(&self) -> KbErrorCode {
        match self {
            KbToolError::UnknownTool { .. } => KbErrorCode::UnknownTool,
            KbToolError::BadArity { .. } => KbErrorCode::BadArity,
            KbToolError::UnknownArgument { .. } => KbErrorCode::UnknownArgument,
            KbToolError::NotAVariable { .. }
            | KbToolError::RelationNotListed { .. }
            | KbToolError::AttributeNotListed { .. } => KbErrorCode::PrerequisiteViolation,
            KbToolError::TypeMismatch { .. } => KbErrorCode::TypeMismatch,
            KbToolError::NonNumericAttribute { .. } => KbErrorCode::NonNumericAttribute,
            KbToolError::Malformed { .. } => KbErrorCode::Malformed,
        }
    }

    /// The corrective sentence paired with each error.
    fn guidance(&self) -> String {
        match self {
            KbToolError::UnknownTool { .. } => format!(
                "The available tools are: {}.",
                KbTool::TOOLS.map(KbTool::name).join(", ")
            ),
            KbToolError::BadArity { tool, .. } => format!("Call it as {}.", tool.signature()),
            KbToolError::UnknownArgument { known, .. } if known.is_empty() => {
                "No entities or variables are available yet.".to_string()
            }
            KbToolError::UnknownArgument { known, .. } => {
                format!("Use one of: {}.", known.join(", "))
            }
            KbToolError::NotAVariable { .. } => {
                "Call get_neighbors first and pass the resulting variable.".to_string()
            }
            KbToolError::RelationNotListed { subject, .. } => format!(
                "Call get_relations({subject}) first and pick a relation from its output."
            ),
            KbToolError::AttributeNotListed { variable, .. } => format!(
                "Call get_attributes({variable}) first and pick an attribute from its output."
            ),
            KbToolError::TypeMismatch { .. } => {
                "intersection only combines two variables of the same type.".to_string()
            }
            KbToolError::NonNumericAttribute { variable, .. } => format!(
                "Pick a numeric attribute listed by get_attributes({variable})."
            ),
            KbToolError::Malformed { .. } => {
                "Write exactly one call such as get_relations(entity) or Final Answer: #k.".to_string()
            }
        }
    }

    /// Diagnosis, guidance and the retry instruction on a single line.
    pub fn render(&self) -> String {
        format!("{} {} {}", self, self.guidance(), RETRY_PROMPT)
    }
}

pub fn render_error(error: &KbToolError) -> String {
    error.render()
}
