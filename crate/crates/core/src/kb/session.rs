//! Knowledge-base tool session.
//!
//! A session owns the variables created during one episode together with the
//! knowledge the prerequisite rules depend on: which relations `get_relations`
//! has revealed for each argument and which attributes `get_attributes` has
//! revealed for each variable. A failing call never changes session state.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::action::{KbAction, KbTool, Operand, VarId};
use super::error::KbToolError;
use super::store::{EntityId, TripleStore};
use crate::grammar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KbLimits {
    /// Relation and attribute lists longer than this are cut with `(+N more)`.
    pub list_limit: usize,
    /// Member listings in variable observations are cut after this many entities.
    pub member_limit: usize,
}

impl Default for KbLimits {
    fn default() -> Self {
        Self {
            list_limit: 60,
            member_limit: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub id: VarId,
    pub members: BTreeSet<EntityId>,
    /// Empty when no type assertions cover the members.
    pub classes: BTreeSet<String>,
    pub producer: KbAction,
    /// Whether some action in the producer chain is `get_neighbors`.
    pub from_neighbors: bool,
}

/// Answer bound by `final_answer`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbAnswer {
    pub variable: String,
    pub entities: Vec<String>,
    /// Present when `count` was applied to the answered variable.
    pub count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbObservation {
    pub text: String,
    pub created: Option<VarId>,
    pub answer: Option<KbAnswer>,
}

impl KbObservation {
    fn text(text: String) -> Self {
        Self {
            text,
            created: None,
            answer: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KbSession {
    store: Arc<TripleStore>,
    topic: Vec<EntityId>,
    variables: Vec<Variable>,
    relation_knowledge: BTreeMap<Operand, BTreeSet<String>>,
    attribute_knowledge: BTreeMap<VarId, BTreeSet<String>>,
    counts: BTreeMap<VarId, u64>,
    log: Vec<KbAction>,
    limits: KbLimits,
}

impl KbSession {
    pub fn new(store: Arc<TripleStore>, topic_entities: Vec<EntityId>) -> Self {
        let mut topic = Vec::with_capacity(topic_entities.len());
        for e in topic_entities {
            if !topic.contains(&e) {
                topic.push(e);
            }
        }
        Self {
            store,
            topic,
            variables: Vec::new(),
            relation_knowledge: BTreeMap::new(),
            attribute_knowledge: BTreeMap::new(),
            counts: BTreeMap::new(),
            log: Vec::new(),
            limits: KbLimits::default(),
        }
    }

    pub fn with_limits(mut self, limits: KbLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn store(&self) -> &TripleStore {
        &self.store
    }

    pub fn topic_entities(&self) -> &[EntityId] {
        &self.topic
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> Option<&Variable> {
        self.variables.get(id.0)
    }

    /// Successfully executed actions, in order.
    pub fn log(&self) -> &[KbAction] {
        &self.log
    }

    pub fn relation_knowledge(&self, operand: &Operand) -> Option<&BTreeSet<String>> {
        self.relation_knowledge.get(operand)
    }

    pub fn attribute_knowledge(&self, variable: VarId) -> Option<&BTreeSet<String>> {
        self.attribute_knowledge.get(&variable)
    }

    /// Tokens the model may currently use as set-valued arguments.
    fn known_tokens(&self) -> Vec<String> {
        self.topic
            .iter()
            .map(|e| e.to_string())
            .chain(self.variables.iter().map(|v| v.id.to_string()))
            .collect()
    }

    fn unknown(&self, token: impl Into<String>) -> KbToolError {
        KbToolError::UnknownArgument {
            token: token.into(),
            known: self.known_tokens(),
        }
    }

    fn parse_operand(&self, token: &str) -> Result<Operand, KbToolError> {
        if token.starts_with('#') {
            return token
                .parse::<VarId>()
                .ok()
                .filter(|v| v.0 < self.variables.len())
                .map(Operand::Var)
                .ok_or_else(|| self.unknown(token));
        }
        EntityId::new(token)
            .ok()
            .filter(|e| self.topic.contains(e))
            .map(Operand::Entity)
            .ok_or_else(|| self.unknown(token))
    }

    /// Parses one call against the current session, resolving its arguments.
    pub fn parse_action(&self, text: &str) -> Result<KbAction, KbToolError> {
        let call = grammar::parse_call(text).map_err(|e| KbToolError::Malformed {
            text: text.trim().to_string(),
            reason: e.to_string(),
        })?;
        let tool = KbTool::from_name(&call.name).ok_or_else(|| KbToolError::UnknownTool {
            name: call.name.clone(),
        })?;
        if call.args.len() != tool.arity() {
            return Err(KbToolError::BadArity {
                tool,
                expected: tool.arity(),
                found: call.args.len(),
            });
        }
        let first = self.parse_operand(&call.args[0])?;
        let second = || call.args[1].clone();
        Ok(match tool {
            KbTool::GetRelations => KbAction::GetRelations(first),
            KbTool::GetNeighbors => KbAction::GetNeighbors(first, second()),
            KbTool::GetAttributes => KbAction::GetAttributes(first),
            KbTool::Argmax => KbAction::Argmax(first, second()),
            KbTool::Argmin => KbAction::Argmin(first, second()),
            KbTool::Intersection => KbAction::Intersection(first, self.parse_operand(&call.args[1])?),
            KbTool::Count => KbAction::Count(first),
            KbTool::FinalAnswer => KbAction::FinalAnswer(first),
        })
    }

    /// Parses the payload of a `Final Answer:` line.
    pub fn parse_final_answer(&self, text: &str) -> Result<KbAction, KbToolError> {
        let token = text.trim().trim_end_matches('.');
        match self.parse_operand(token)? {
            Operand::Var(v) => Ok(KbAction::FinalAnswer(Operand::Var(v))),
            Operand::Entity(_) => Err(KbToolError::NotAVariable {
                tool: KbTool::FinalAnswer,
                token: token.to_string(),
            }),
        }
    }

    fn check_operand(&self, operand: &Operand) -> Result<(), KbToolError> {
        match operand {
            Operand::Var(v) if v.0 >= self.variables.len() => Err(self.unknown(v.to_string())),
            Operand::Entity(e) if !self.topic.contains(e) => Err(self.unknown(e.to_string())),
            _ => Ok(()),
        }
    }

    fn members(&self, operand: &Operand) -> BTreeSet<EntityId> {
        match operand {
            Operand::Entity(e) => BTreeSet::from([e.clone()]),
            Operand::Var(v) => self.variables[v.0].members.clone(),
        }
    }

    /// Resolves an operand that must be a variable descending from `get_neighbors`.
    fn require_variable(&self, tool: KbTool, operand: &Operand) -> Result<&Variable, KbToolError> {
        self.check_operand(operand)?;
        match operand {
            Operand::Var(v) => {
                let var = &self.variables[v.0];
                if var.from_neighbors {
                    Ok(var)
                } else {
                    Err(KbToolError::NotAVariable {
                        tool,
                        token: v.to_string(),
                    })
                }
            }
            Operand::Entity(e) => Err(KbToolError::NotAVariable {
                tool,
                token: e.to_string(),
            }),
        }
    }

    fn new_variable(
        &mut self,
        members: BTreeSet<EntityId>,
        classes: BTreeSet<String>,
        producer: KbAction,
        from_neighbors: bool,
    ) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            id,
            members,
            classes,
            producer,
            from_neighbors,
        });
        id
    }

    pub fn exec_get_relations(&mut self, arg: &Operand) -> Result<Vec<String>, KbToolError> {
        self.check_operand(arg)?;
        let relations = self.store.relations_of(&self.members(arg));
        self.relation_knowledge
            .entry(arg.clone())
            .or_default()
            .extend(relations.iter().cloned());
        self.log.push(KbAction::GetRelations(arg.clone()));
        Ok(relations)
    }

    pub fn exec_get_neighbors(&mut self, arg: &Operand, relation: &str) -> Result<VarId, KbToolError> {
        self.check_operand(arg)?;
        let listed = self
            .relation_knowledge
            .get(arg)
            .is_some_and(|known| known.contains(relation));
        if !listed {
            return Err(KbToolError::RelationNotListed {
                subject: arg.to_string(),
                relation: relation.to_string(),
            });
        }
        let members = self.store.neighbors_of(&self.members(arg), relation);
        let classes = members
            .iter()
            .flat_map(|m| self.store.classes_of(m))
            .collect();
        let action = KbAction::GetNeighbors(arg.clone(), relation.to_string());
        self.log.push(action.clone());
        Ok(self.new_variable(members, classes, action, true))
    }

    pub fn exec_intersection(&mut self, left: &Operand, right: &Operand) -> Result<VarId, KbToolError> {
        let (l, r) = (
            self.require_variable(KbTool::Intersection, left)?,
            self.require_variable(KbTool::Intersection, right)?,
        );
        if !classes_compatible(&l.classes, &r.classes) {
            return Err(KbToolError::TypeMismatch {
                left: l.id,
                left_classes: l.classes.clone(),
                right: r.id,
                right_classes: r.classes.clone(),
            });
        }
        let members = l.members.intersection(&r.members).cloned().collect();
        let classes = l.classes.intersection(&r.classes).cloned().collect();
        let from_neighbors = l.from_neighbors || r.from_neighbors;
        let action = KbAction::Intersection(left.clone(), right.clone());
        self.log.push(action.clone());
        Ok(self.new_variable(members, classes, action, from_neighbors))
    }

    pub fn exec_get_attributes(&mut self, arg: &Operand) -> Result<Vec<String>, KbToolError> {
        let var = self.require_variable(KbTool::GetAttributes, arg)?;
        let id = var.id;
        let attributes = self.store.numeric_attributes_of(&var.members);
        self.attribute_knowledge
            .entry(id)
            .or_default()
            .extend(attributes.iter().cloned());
        self.log.push(KbAction::GetAttributes(arg.clone()));
        Ok(attributes)
    }

    /// `argmax`/`argmin`: keeps every entity attaining the extremal value.
    /// An entity with several values competes with its largest for `argmax`
    /// and its smallest for `argmin`.
    pub fn exec_superlative(&mut self, maximize: bool, arg: &Operand, attribute: &str) -> Result<VarId, KbToolError> {
        let tool = if maximize { KbTool::Argmax } else { KbTool::Argmin };
        let var = self.require_variable(tool, arg)?;
        let listed = self
            .attribute_knowledge
            .get(&var.id)
            .is_some_and(|known| known.contains(attribute));
        if !listed {
            return Err(KbToolError::AttributeNotListed {
                variable: var.id,
                attribute: attribute.to_string(),
            });
        }
        let mut per_entity: BTreeMap<EntityId, f64> = BTreeMap::new();
        for (entity, value) in self.store.attribute_values(&var.members, attribute) {
            per_entity
                .entry(entity)
                .and_modify(|best| {
                    *best = if maximize { best.max(value) } else { best.min(value) }
                })
                .or_insert(value);
        }
        let extreme = per_entity.values().copied().reduce(|a, b| if maximize { a.max(b) } else { a.min(b) });
        let Some(extreme) = extreme else {
            return Err(KbToolError::NonNumericAttribute {
                variable: var.id,
                attribute: attribute.to_string(),
            });
        };
        let members = per_entity
            .into_iter()
            .filter(|&(_, v)| v == extreme)
            .map(|(e, _)| e)
            .collect();
        let classes = var.classes.clone();
        let action = if maximize {
            KbAction::Argmax(arg.clone(), attribute.to_string())
        } else {
            KbAction::Argmin(arg.clone(), attribute.to_string())
        };
        self.log.push(action.clone());
        Ok(self.new_variable(members, classes, action, true))
    }

    pub fn exec_count(&mut self, arg: &Operand) -> Result<u64, KbToolError> {
        let var = self.require_variable(KbTool::Count, arg)?;
        let (id, count) = (var.id, var.members.len() as u64);
        self.counts.insert(id, count);
        self.log.push(KbAction::Count(arg.clone()));
        Ok(count)
    }

    pub fn exec_final_answer(&mut self, arg: &Operand) -> Result<KbAnswer, KbToolError> {
        let var = self.require_variable(KbTool::FinalAnswer, arg)?;
        let answer = KbAnswer {
            variable: var.id.to_string(),
            entities: var.members.iter().map(|e| e.to_string()).collect(),
            count: self.counts.get(&var.id).copied(),
        };
        self.log.push(KbAction::FinalAnswer(arg.clone()));
        Ok(answer)
    }

    /// Executes an action and renders its observation.
    pub fn execute(&mut self, action: &KbAction) -> Result<KbObservation, KbToolError> {
        match action {
            KbAction::GetRelations(x) => {
                let relations = self.exec_get_relations(x)?;
                Ok(KbObservation::text(render_list(&relations, self.limits.list_limit)))
            }
            KbAction::GetAttributes(x) => {
                let attributes = self.exec_get_attributes(x)?;
                Ok(KbObservation::text(render_list(&attributes, self.limits.list_limit)))
            }
            KbAction::GetNeighbors(x, r) => {
                let id = self.exec_get_neighbors(x, r)?;
                Ok(self.variable_observation(id))
            }
            KbAction::Intersection(a, b) => {
                let id = self.exec_intersection(a, b)?;
                Ok(self.variable_observation(id))
            }
            KbAction::Argmax(x, a) => {
                let id = self.exec_superlative(true, x, a)?;
                Ok(self.variable_observation(id))
            }
            KbAction::Argmin(x, a) => {
                let id = self.exec_superlative(false, x, a)?;
                Ok(self.variable_observation(id))
            }
            KbAction::Count(x) => {
                let n = self.exec_count(x)?;
                Ok(KbObservation::text(n.to_string()))
            }
            KbAction::FinalAnswer(x) => {
                let answer = self.exec_final_answer(x)?;
                let mut text = format!(
                    "Final answer {}: {}",
                    answer.variable,
                    render_set(&answer.entities, self.limits.member_limit)
                );
                if let Some(n) = answer.count {
                    text.push_str(&format!(", count {n}"));
                }
                Ok(KbObservation {
                    text,
                    created: None,
                    answer: Some(answer),
                })
            }
        }
    }

    fn variable_observation(&self, id: VarId) -> KbObservation {
        let var = &self.variables[id.0];
        let members: Vec<String> = var.members.iter().map(|e| e.to_string()).collect();
        let noun = if members.len() == 1 { "entity" } else { "entities" };
        let mut text = format!("variable {id}");
        if !var.classes.is_empty() {
            let classes: Vec<String> = var.classes.iter().cloned().collect();
            text.push_str(&format!(", which are instances of {}", render_set(&classes, usize::MAX)));
        }
        text.push_str(&format!(
            ", {} {noun}: {}",
            members.len(),
            render_set(&members, self.limits.member_limit)
        ));
        KbObservation {
            text,
            created: Some(id),
            answer: None,
        }
    }

    /// Every action that would execute without error right now, in a fixed
    /// order: tools as listed below, operands with topic entities first (in
    /// task order) then variables by id, names lexicographically.
    pub fn enumerate_candidates(&self) -> Vec<KbAction> {
        let operands: Vec<Operand> = self
            .topic
            .iter()
            .cloned()
            .map(Operand::Entity)
            .chain(self.variables.iter().map(|v| Operand::Var(v.id)))
            .collect();
        let eligible: Vec<&Variable> = self.variables.iter().filter(|v| v.from_neighbors).collect();
        let mut out = Vec::new();

        out.extend(operands.iter().cloned().map(KbAction::GetRelations));
        for x in &operands {
            if let Some(known) = self.relation_knowledge.get(x) {
                out.extend(known.iter().map(|r| KbAction::GetNeighbors(x.clone(), r.clone())));
            }
        }
        for a in &eligible {
            for b in &eligible {
                if classes_compatible(&a.classes, &b.classes) {
                    out.push(KbAction::Intersection(Operand::Var(a.id), Operand::Var(b.id)));
                }
            }
        }
        out.extend(eligible.iter().map(|v| KbAction::GetAttributes(Operand::Var(v.id))));
        for v in &eligible {
            if let Some(known) = self.attribute_knowledge.get(&v.id) {
                for a in known {
                    out.push(KbAction::Argmax(Operand::Var(v.id), a.clone()));
                    out.push(KbAction::Argmin(Operand::Var(v.id), a.clone()));
                }
            }
        }
        out.extend(eligible.iter().map(|v| KbAction::Count(Operand::Var(v.id))));
        out.extend(eligible.iter().map(|v| KbAction::FinalAnswer(Operand::Var(v.id))));
        out
    }
}

fn classes_compatible(a: &BTreeSet<String>, b: &BTreeSet<String>) -> bool {
    a.is_empty() || b.is_empty() || !a.is_disjoint(b)
}

/// `[a, b, c]`, cut after `limit` entries with a `(+N more)` suffix.
pub fn render_list(items: &[String], limit: usize) -> String {
    render_delimited(items, limit, '[', ']')
}

/// `{a, b, c}`, cut after `limit` entries with a `(+N more)` suffix.
pub fn render_set(items: &[String], limit: usize) -> String {
    render_delimited(items, limit, '{', '}')
}

fn render_delimited(items: &[String], limit: usize, open: char, close: char) -> String {
    let shown = items.len().min(limit);
    let mut out = String::new();
    out.push(open);
    out.push_str(&items[..shown].join(", "));
    out.push(close);
    if items.len() > shown {
        out.push_str(&format!(" (+{} more)", items.len() - shown));
    }
    out
}
