use std::fmt;
use std::str::FromStr;

use crate::grammar;

use super::store::EntityId;

/// Identifier of a session variable, rendered `#k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl FromStr for VarId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix('#').ok_or(())?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(());
        }
        digits.parse().map(VarId).map_err(|_| ())
    }
}

/// An argument that denotes a set of entities: a topic entity or a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Entity(EntityId),
    Var(VarId),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Entity(e) => e.fmt(f),
            Operand::Var(v) => v.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KbTool {
    GetRelations,
    GetNeighbors,
    GetAttributes,
    Argmax,
    Argmin,
    Intersection,
    Count,
    FinalAnswer,
}

impl KbTool {
    /// The seven tools offered to the model. `final_answer` is the terminal action.
    pub const TOOLS: [KbTool; 7] = [
        KbTool::GetRelations,
        KbTool::GetNeighbors,
        KbTool::GetAttributes,
        KbTool::Argmax,
        KbTool::Argmin,
        KbTool::Intersection,
        KbTool::Count,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KbTool::GetRelations => "get_relations",
            KbTool::GetNeighbors => "get_neighbors",
            KbTool::GetAttributes => "get_attributes",
            KbTool::Argmax => "argmax",
            KbTool::Argmin => "argmin",
            KbTool::Intersection => "intersection",
            KbTool::Count => "count",
            KbTool::FinalAnswer => "final_answer",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            KbTool::GetNeighbors | KbTool::Argmax | KbTool::Argmin | KbTool::Intersection => 2,
            _ => 1,
        }
    }

    pub fn signature(self) -> &'static str {
        match self {
            KbTool::GetRelations => "get_relations(variable)",
            KbTool::GetNeighbors => "get_neighbors(variable, relation)",
            KbTool::GetAttributes => "get_attributes(variable)",
            KbTool::Argmax => "argmax(variable, attribute)",
            KbTool::Argmin => "argmin(variable, attribute)",
            KbTool::Intersection => "intersection(variable1, variable2)",
            KbTool::Count => "count(variable)",
            KbTool::FinalAnswer => "final_answer(variable)",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::TOOLS
            .into_iter()
            .chain([KbTool::FinalAnswer])
            .find(|t| t.name() == name)
    }
}

impl fmt::Display for KbTool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KbAction {
    GetRelations(Operand),
    GetNeighbors(Operand, String),
    GetAttributes(Operand),
    Argmax(Operand, String),
    Argmin(Operand, String),
    Intersection(Operand, Operand),
    Count(Operand),
    FinalAnswer(Operand),
}

impl KbAction {
    pub fn tool(&self) -> KbTool {
        match self {
            KbAction::GetRelations(_) => KbTool::GetRelations,
            KbAction::GetNeighbors(..) => KbTool::GetNeighbors,
            KbAction::GetAttributes(_) => KbTool::GetAttributes,
            KbAction::Argmax(..) => KbTool::Argmax,
            KbAction::Argmin(..) => KbTool::Argmin,
            KbAction::Intersection(..) => KbTool::Intersection,
            KbAction::Count(_) => KbTool::Count,
            KbAction::FinalAnswer(_) => KbTool::FinalAnswer,
        }
    }

    fn args(&self) -> Vec<String> {
        match self {
            KbAction::GetRelations(x)
            | KbAction::GetAttributes(x)
            | KbAction::Count(x)
            | KbAction::FinalAnswer(x) => vec![x.to_string()],
            KbAction::GetNeighbors(x, s) | KbAction::Argmax(x, s) | KbAction::Argmin(x, s) => {
                vec![x.to_string(), s.clone()]
            }
            KbAction::Intersection(a, b) => vec![a.to_string(), b.to_string()],
        }
    }
}

impl fmt::Display for KbAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&grammar::render_call(self.tool().name(), &self.args()))
    }
}
