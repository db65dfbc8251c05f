//! Template rendering of world states and goal formulas into text. The
//! rendered pair is both the policy observation and the activity description
//! used for similarity.
//!
//! Rendering is deterministic: state sentences follow scene object order and
//! a fixed predicate order, so equal inputs produce byte-identical output.

use std::fmt;

use thiserror::Error;

use crate::goal::{GoalFormula, LitTemplate, Term};
use crate::world::{Atom, PredicateKind, Scene, WorldState};

/// Period-terminated sentences describing a world state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateText(pub String);

/// Quantifier sentences describing a goal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoalText(pub String);

impl StateText {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl GoalText {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StateText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for GoalText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("atom references an object outside the scene: index {index}")]
    UnknownObject { index: usize },
    #[error("goal literal references unknown object id `{id}`")]
    UnknownObjectId { id: String },
    #[error("goal variable `{var}` is not bound by an enclosing quantifier")]
    UnboundVariable { var: String },
}

fn predicate_phrase(kind: PredicateKind) -> &'static str {
    match kind {
        PredicateKind::Dusty => "dusty",
        PredicateKind::Dirty => "dirty",
        PredicateKind::Open => "open",
        PredicateKind::ToggledOn => "toggled on",
        PredicateKind::Inside => "inside",
        PredicateKind::Ontop => "on top",
        PredicateKind::Under => "under",
        PredicateKind::Nextto => "next to",
        PredicateKind::Inreach => "in reach of robot",
        PredicateKind::Insameroom => "in same room as robot",
        PredicateKind::Infov => "in field of view of robot",
        PredicateKind::Holding => "holding",
    }
}

fn atom_sentence(atom: &Atom, scene: &Scene) -> Result<String, RenderError> {
    let subject = scene
        .id_of(atom.subject)
        .ok_or(RenderError::UnknownObject { index: atom.subject.0 })?;
    let object = match atom.object {
        Some(idx) => {
            Some(scene.id_of(idx).ok_or(RenderError::UnknownObject { index: idx.0 })?)
        }
        None => None,
    };
    let sentence = match (atom.kind, object) {
        (PredicateKind::Holding, None) => format!("robot is holding {subject}."),
        (kind, None) => format!("{subject} is {}.", predicate_phrase(kind)),
        (kind, Some(obj)) => format!("{subject} is {} {obj}.", predicate_phrase(kind)),
    };
    Ok(sentence)
}

/// Render a world state as one sentence per atom, grouped by subject object
/// in scene order and then by the fixed predicate order.
pub fn render_state(state: &WorldState, scene: &Scene) -> Result<StateText, RenderError> {
    let mut atoms: Vec<&Atom> = state.atoms.iter().collect();
    atoms.sort_by_key(|a| (a.subject.0, a.kind as usize, a.object.map(|o| o.0)));
    let mut sentences = Vec::with_capacity(atoms.len());
    for atom in atoms {
        sentences.push(atom_sentence(atom, scene)?);
    }
    Ok(StateText(sentences.join(" ")))
}

/// Object ids inside goal sentences drop their underscores (`cup_1` reads as
/// `cup1`), while state sentences keep ids verbatim.
fn goal_object_name(id: &str) -> String {
    id.replace('_', "")
}

struct GoalRenderer<'a> {
    /// Innermost binding wins on shadowing; validation forbids it anyway.
    bindings: Vec<(&'a str, &'a str)>,
}

impl<'a> GoalRenderer<'a> {
    fn term(&self, term: &Term) -> Result<String, RenderError> {
        match term {
            Term::Var(v) => self
                .bindings
                .iter()
                .rev()
                .find(|(name, _)| name == v)
                .map(|(_, category)| format!("the {category}"))
                .ok_or_else(|| RenderError::UnboundVariable { var: v.clone() }),
            Term::Object(id) => Ok(goal_object_name(id)),
        }
    }

    fn literal(&self, lit: &LitTemplate) -> Result<String, RenderError> {
        let subject = self.term(&lit.subject)?;
        match (lit.kind, &lit.object) {
            (PredicateKind::Holding, None) => Ok(format!("robot is holding {subject}")),
            (kind, None) => Ok(format!("{subject} is {}", predicate_phrase(kind))),
            (kind, Some(obj)) => {
                Ok(format!("{subject} is {} {}", predicate_phrase(kind), self.term(obj)?))
            }
        }
    }

    fn clause(&mut self, formula: &'a GoalFormula) -> Result<String, RenderError> {
        match formula {
            GoalFormula::ForAll { category, var, body } => {
                self.bindings.push((var, category));
                let inner = self.clause(body)?;
                self.bindings.pop();
                Ok(format!("for every {category}, {inner}"))
            }
            GoalFormula::ForAtLeastOne { category, var, body } => {
                self.bindings.push((var, category));
                let inner = self.clause(body)?;
                self.bindings.pop();
                Ok(format!("for at least one {category}, {inner}"))
            }
            GoalFormula::And(children) => {
                let parts = children
                    .iter()
                    .map(|c| self.clause(c))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(parts.join(", and "))
            }
            GoalFormula::Not(child) => {
                let inner = self.clause(child)?;
                Ok(format!("the following is NOT true: {inner}"))
            }
            GoalFormula::Lit(lit) => self.literal(lit),
        }
    }
}

fn capitalize_first(clause: &str) -> String {
    let mut chars = clause.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Render a goal formula. A top-level conjunction becomes one sentence per
/// conjunct (newline separated); nested conjunctions join their clauses with
/// ", and ".
pub fn render_goal(formula: &GoalFormula) -> Result<GoalText, RenderError> {
    let mut renderer = GoalRenderer { bindings: Vec::new() };
    let sentences: Vec<String> = match formula {
        GoalFormula::And(children) => children
            .iter()
            .map(|c| renderer.clause(c))
            .collect::<Result<Vec<_>, _>>()?,
        other => vec![renderer.clause(other)?],
    };
    let text = sentences
        .iter()
        .map(|s| format!("{}.", capitalize_first(s)))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(GoalText(text))
}

/// The activity's full description: state text, a newline, then goal text.
/// This exact string is what gets embedded for similarity.
pub fn render_activity(
    initial: &WorldState,
    goal: &GoalFormula,
    scene: &Scene,
) -> Result<String, RenderError> {
    let state = render_state(initial, scene)?;
    let goal = render_goal(goal)?;
    Ok(format!("{}\n{}", state.0, goal.0))
}
