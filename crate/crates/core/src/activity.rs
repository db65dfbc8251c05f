//! Activity files: a JSON document describing a scene, an initial state, a
//! quantified goal, and optional action-model overrides. Loading validates
//! everything and grounds the goal, so a loaded [`Activity`] is ready to run.
//!
//! Goal trees are nested arrays:
//!
//! ```text
//! ["forall", "window", "w", ["not", ["open", "w"]]]
//! ["exists", "cabinet", "c", ["and", ["inside", "cup_0", "c"], ...]]
//! ```
//!
//! Inside a literal, an argument that matches an enclosing quantifier
//! variable is that variable; anything else must be a scene object id.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::goal::{ground_goal, GoalError, GoalFormula, GroundedGoal, LitTemplate, Term};
use crate::text::{render_activity, render_goal, GoalText, RenderError};
use crate::world::{
    validate_scene, ActionModel, Atom, ObjectDef, PredicateKind, Primitive, Scene, WorldError,
    WorldState,
};

/// A fully loaded and validated activity.
#[derive(Clone, Debug)]
pub struct Activity {
    pub name: String,
    pub scene: Scene,
    pub initial: WorldState,
    pub goal_formula: GoalFormula,
    pub goal: GroundedGoal,
    pub model: ActionModel,
    pub goal_text: GoalText,
    /// State text + goal text; the description embedded for similarity.
    pub description: String,
    /// Used as a transfer source but never as a target in grid runs.
    pub source_only: bool,
    pub notes: Option<String>,
}

#[derive(Debug, Error)]
pub enum ActivityError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown predicate kind `{name}`")]
    UnknownPredicate { name: String },
    #[error("unknown object id `{id}`")]
    UnknownObject { id: String },
    #[error("atom `{name}` expects {expected} argument(s), got {got}")]
    AtomArity { name: String, expected: usize, got: usize },
    #[error("unknown action primitive `{name}` in action_model")]
    UnknownPrimitive { name: String },
    #[error("malformed goal node: {detail}")]
    MalformedGoal { detail: String },
    #[error("goal term `{name}` is both a quantifier variable and a scene object id")]
    AmbiguousTerm { name: String },
    #[error("scene validation failed: {violations:?}")]
    SceneInvalid { violations: Vec<String> },
    #[error(transparent)]
    Goal(#[from] GoalError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Deserialize)]
struct ActivityFileRaw {
    name: String,
    objects: Vec<ObjectDef>,
    initial: Vec<Vec<String>>,
    goal: serde_json::Value,
    #[serde(default)]
    action_model: BTreeMap<String, f64>,
    #[serde(default)]
    source_only: bool,
    #[serde(default)]
    notes: Option<String>,
}

fn parse_atom(fields: &[String], scene: &Scene) -> Result<Atom, ActivityError> {
    let (name, args) = fields
        .split_first()
        .ok_or_else(|| ActivityError::MalformedGoal { detail: "empty atom".into() })?;
    let kind = PredicateKind::from_name(name)
        .ok_or_else(|| ActivityError::UnknownPredicate { name: name.clone() })?;
    let expected = if kind.is_binary() { 2 } else { 1 };
    if args.len() != expected {
        return Err(ActivityError::AtomArity {
            name: name.clone(),
            expected,
            got: args.len(),
        });
    }
    let resolve = |id: &String| {
        scene
            .index_of(id)
            .ok_or_else(|| ActivityError::UnknownObject { id: id.clone() })
    };
    let subject = resolve(&args[0])?;
    let object = if expected == 2 { Some(resolve(&args[1])?) } else { None };
    Ok(Atom { kind, subject, object })
}

fn as_array(node: &serde_json::Value) -> Result<&Vec<serde_json::Value>, ActivityError> {
    node.as_array().ok_or_else(|| ActivityError::MalformedGoal {
        detail: format!("expected an array node, got {node}"),
    })
}

fn as_str(node: &serde_json::Value, what: &str) -> Result<String, ActivityError> {
    node.as_str().map(str::to_owned).ok_or_else(|| ActivityError::MalformedGoal {
        detail: format!("expected a string for {what}, got {node}"),
    })
}

fn parse_term(name: &str, bound: &[String], scene: &Scene) -> Result<Term, ActivityError> {
    let is_var = bound.iter().any(|v| v == name);
    let is_object = scene.index_of(name).is_some();
    match (is_var, is_object) {
        (true, true) => Err(ActivityError::AmbiguousTerm { name: name.to_string() }),
        (true, false) => Ok(Term::Var(name.to_string())),
        (false, _) => Ok(Term::Object(name.to_string())),
    }
}

fn parse_goal_node(
    node: &serde_json::Value,
    bound: &mut Vec<String>,
    scene: &Scene,
) -> Result<GoalFormula, ActivityError> {
    let items = as_array(node)?;
    let tag = as_str(
        items.first().ok_or_else(|| ActivityError::MalformedGoal {
            detail: "empty goal node".into(),
        })?,
        "node tag",
    )?;
    match tag.as_str() {
        "forall" | "exists" => {
            if items.len() != 4 {
                return Err(ActivityError::MalformedGoal {
                    detail: format!("`{tag}` takes [category, var, body], got {} items", items.len() - 1),
                });
            }
            let category = as_str(&items[1], "category")?;
            let var = as_str(&items[2], "variable")?;
            bound.push(var.clone());
            let body = parse_goal_node(&items[3], bound, scene)?;
            bound.pop();
            Ok(if tag == "forall" {
                GoalFormula::forall(&category, &var, body)
            } else {
                GoalFormula::for_at_least_one(&category, &var, body)
            })
        }
        "and" => {
            let children = items[1..]
                .iter()
                .map(|c| parse_goal_node(c, bound, scene))
                .collect::<Result<Vec<_>, _>>()?;
            if children.is_empty() {
                return Err(ActivityError::MalformedGoal { detail: "`and` with no children".into() });
            }
            Ok(GoalFormula::And(children))
        }
        "not" => {
            if items.len() != 2 {
                return Err(ActivityError::MalformedGoal {
                    detail: format!("`not` takes one child, got {}", items.len() - 1),
                });
            }
            Ok(GoalFormula::negated(parse_goal_node(&items[1], bound, scene)?))
        }
        predicate => {
            let kind = PredicateKind::from_name(predicate)
                .ok_or_else(|| ActivityError::UnknownPredicate { name: predicate.into() })?;
            let expected = if kind.is_binary() { 2 } else { 1 };
            let args = &items[1..];
            if args.len() != expected {
                return Err(ActivityError::AtomArity {
                    name: predicate.into(),
                    expected,
                    got: args.len(),
                });
            }
            let subject = parse_term(&as_str(&args[0], "literal argument")?, bound, scene)?;
            let object = if expected == 2 {
                Some(parse_term(&as_str(&args[1], "literal argument")?, bound, scene)?)
            } else {
                None
            };
            Ok(GoalFormula::Lit(LitTemplate { kind, subject, object }))
        }
    }
}

fn build_action_model(overrides: &BTreeMap<String, f64>) -> Result<ActionModel, ActivityError> {
    let mut model = ActionModel::default();
    for (name, &p) in overrides {
        let primitive = Primitive::from_name(name)
            .ok_or_else(|| ActivityError::UnknownPrimitive { name: name.clone() })?;
        model.set_prob(primitive, p)?;
    }
    Ok(model)
}

impl Activity {
    /// Assemble and validate an activity from already-parsed parts.
    pub fn from_parts(
        name: String,
        scene: Scene,
        initial: WorldState,
        goal_formula: GoalFormula,
        model: ActionModel,
        source_only: bool,
        notes: Option<String>,
    ) -> Result<Activity, ActivityError> {
        let violations = validate_scene(&scene, &initial);
        if !violations.is_empty() {
            return Err(ActivityError::SceneInvalid {
                violations: violations.iter().map(|v| v.to_string()).collect(),
            });
        }
        let goal = ground_goal(&goal_formula, &scene)?;
        let goal_text = render_goal(&goal_formula)?;
        let description = render_activity(&initial, &goal_formula, &scene)?;
        Ok(Activity {
            name,
            scene,
            initial,
            goal_formula,
            goal,
            model,
            goal_text,
            description,
            source_only,
            notes,
        })
    }

    /// Parse an activity from JSON text. `origin` only labels errors.
    pub fn from_json(text: &str, origin: &str) -> Result<Activity, ActivityError> {
        let raw: ActivityFileRaw = serde_json::from_str(text).map_err(|source| {
            ActivityError::Json { path: origin.to_string(), source }
        })?;
        let scene = Scene::new(raw.objects);
        let mut atoms = Vec::with_capacity(raw.initial.len());
        for fields in &raw.initial {
            atoms.push(parse_atom(fields, &scene)?);
        }
        let initial = WorldState::new(atoms);
        let mut bound = Vec::new();
        let goal_formula = parse_goal_node(&raw.goal, &mut bound, &scene)?;
        let model = build_action_model(&raw.action_model)?;
        Activity::from_parts(
            raw.name,
            scene,
            initial,
            goal_formula,
            model,
            raw.source_only,
            raw.notes,
        )
    }

    pub fn load(path: &Path) -> Result<Activity, ActivityError> {
        let text = std::fs::read_to_string(path).map_err(|source| ActivityError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Activity::from_json(&text, &path.display().to_string())
    }

    /// Load every `*.act` file in a directory, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Activity>, ActivityError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|source| ActivityError::Io { path: dir.display().to_string(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "act").unwrap_or(false))
            .collect();
        paths.sort();
        paths.iter().map(|p| Activity::load(p)).collect()
    }

    pub fn grounding_count(&self) -> usize {
        self.goal.groundings.len()
    }
}
