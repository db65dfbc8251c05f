//! Quantified goal conditions and their expansion into alternative
//! groundings: concrete subgoal literal sets whose satisfied counts drive the
//! reward function.
//!
//! The goal language matches what the activity catalog needs: `ForAll` and
//! `ForAtLeastOne` quantifiers over object categories, conjunction, and
//! negation directly above literals. `ForAtLeastOne` is the only source of
//! alternatives; every combination of its witnesses yields one candidate
//! grounding.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Atom, ObjectIdx, PredicateKind, Scene, WorldState};

/// Argument of a goal literal: either a quantified variable or a concrete
/// object id (resolved against the scene at grounding time).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Object(String),
}

/// A predicate applied to terms; becomes a ground literal once all variables
/// are substituted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LitTemplate {
    pub kind: PredicateKind,
    pub subject: Term,
    pub object: Option<Term>,
}

/// Quantified goal tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalFormula {
    ForAll { category: String, var: String, body: Box<GoalFormula> },
    ForAtLeastOne { category: String, var: String, body: Box<GoalFormula> },
    And(Vec<GoalFormula>),
    Not(Box<GoalFormula>),
    Lit(LitTemplate),
}

impl GoalFormula {
    pub fn forall(category: &str, var: &str, body: GoalFormula) -> Self {
        GoalFormula::ForAll { category: category.into(), var: var.into(), body: Box::new(body) }
    }

    pub fn for_at_least_one(category: &str, var: &str, body: GoalFormula) -> Self {
        GoalFormula::ForAtLeastOne {
            category: category.into(),
            var: var.into(),
            body: Box::new(body),
        }
    }

    pub fn negated(body: GoalFormula) -> Self {
        GoalFormula::Not(Box::new(body))
    }

    pub fn lit(kind: PredicateKind, subject: Term, object: Option<Term>) -> Self {
        GoalFormula::Lit(LitTemplate { kind, subject, object })
    }
}

/// A ground literal: an atom required to hold (or, when negated, to be
/// absent).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn holds_in(&self, state: &WorldState) -> bool {
        state.holds(&self.atom) != self.negated
    }

    pub fn describe(&self, scene: &Scene) -> String {
        if self.negated {
            format!("not {}", self.atom.describe(scene))
        } else {
            self.atom.describe(scene)
        }
    }
}

/// One concrete expansion of the goal: a deduplicated set of subgoal
/// literals, plus the object chosen for each `ForAtLeastOne` variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grounding {
    pub literals: BTreeSet<Literal>,
    pub witness: BTreeMap<String, ObjectIdx>,
}

/// All alternative groundings of an activity's goal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedGoal {
    pub groundings: Vec<Grounding>,
    /// Non-fatal oddities found while grounding (e.g. a vacuous `ForAll`).
    pub warnings: Vec<String>,
}

impl GroundedGoal {
    /// Total subgoal count of the largest grounding, for display.
    pub fn max_subgoals(&self) -> usize {
        self.groundings.iter().map(|g| g.literals.len()).max().unwrap_or(0)
    }
}

/// Exact satisfied-subgoal fraction, kept rational so episode totals can be
/// bounded without float drift.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Fraction {
        assert!(den > 0, "fraction denominator must be positive");
        Fraction { num, den }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }

    /// `self - other` as an f64, computed exactly before the final rounding.
    pub fn diff_f64(self, other: Fraction) -> f64 {
        let num = self.num as i128 * other.den as i128 - other.num as i128 * self.den as i128;
        let den = self.den as i128 * other.den as i128;
        num as f64 / den as f64
    }
}

impl PartialEq for Fraction {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fraction {}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.num as u128 * other.den as u128;
        let rhs = other.num as u128 * self.den as u128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Goal progress in a state: the best satisfied fraction over all groundings
/// and whether some grounding is fully satisfied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProgressReport {
    pub fraction: Fraction,
    pub success: bool,
    /// Index of the grounding attaining the fraction.
    pub best_grounding: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum GoalError {
    #[error("variable `{var}` is not bound by an enclosing quantifier")]
    UnboundVariable { var: String },
    #[error("variable `{var}` is bound more than once")]
    ShadowedVariable { var: String },
    #[error("negation may only wrap a literal or a conjunction of literals")]
    MalformedNegation,
    #[error("ungroundable goal: category `{category}` has no scene objects under a `for at least one` quantifier")]
    UngroundableExistential { category: String },
    #[error("unknown object id `{id}` in goal literal")]
    UnknownObject { id: String },
    #[error("predicate {} takes {expected} argument(s), got {got}", kind.name())]
    LiteralArity { kind: PredicateKind, expected: usize, got: usize },
    #[error("goal has no satisfiable grounding (every witness combination is contradictory)")]
    NoConsistentGrounding,
    #[error("goal is empty")]
    EmptyGoal,
}

fn check_literal_arity(lit: &LitTemplate) -> Result<(), GoalError> {
    let expected = if lit.kind.is_binary() { 2 } else { 1 };
    let got = 1 + lit.object.is_some() as usize;
    if expected != got {
        return Err(GoalError::LiteralArity { kind: lit.kind, expected, got });
    }
    Ok(())
}

fn check_terms_bound(lit: &LitTemplate, bound: &BTreeSet<&str>) -> Result<(), GoalError> {
    for term in std::iter::once(&lit.subject).chain(lit.object.iter()) {
        if let Term::Var(v) = term {
            if !bound.contains(v.as_str()) {
                return Err(GoalError::UnboundVariable { var: v.clone() });
            }
        }
    }
    Ok(())
}

fn is_lit_or_and_of_lits(formula: &GoalFormula) -> bool {
    match formula {
        GoalFormula::Lit(_) => true,
        GoalFormula::And(children) => {
            children.iter().all(|c| matches!(c, GoalFormula::Lit(_)))
        }
        _ => false,
    }
}

fn validate_rec<'a>(formula: &'a GoalFormula, bound: &mut BTreeSet<&'a str>) -> Result<(), GoalError> {
    match formula {
        GoalFormula::ForAll { var, body, .. } | GoalFormula::ForAtLeastOne { var, body, .. } => {
            if !bound.insert(var.as_str()) {
                return Err(GoalError::ShadowedVariable { var: var.clone() });
            }
            validate_rec(body, bound)?;
            bound.remove(var.as_str());
            Ok(())
        }
        GoalFormula::And(children) => {
            for c in children {
                validate_rec(c, bound)?;
            }
            Ok(())
        }
        GoalFormula::Not(child) => {
            if !is_lit_or_and_of_lits(child) {
                return Err(GoalError::MalformedNegation);
            }
            validate_rec(child, bound)
        }
        GoalFormula::Lit(lit) => {
            check_literal_arity(lit)?;
            check_terms_bound(lit, bound)
        }
    }
}

/// Check the structural invariants of a goal formula: every variable bound by
/// exactly one enclosing quantifier, negation only at the leaf level, correct
/// literal arities.
pub fn validate_formula(formula: &GoalFormula) -> Result<(), GoalError> {
    let mut bound = BTreeSet::new();
    validate_rec(formula, &mut bound)
}

type Env = BTreeMap<String, ObjectIdx>;

/// Partial grounding produced while expanding the formula tree.
#[derive(Clone, Debug)]
struct PartialGrounding {
    literals: BTreeSet<Literal>,
    witness: BTreeMap<String, ObjectIdx>,
}

impl PartialGrounding {
    fn empty() -> Self {
        PartialGrounding { literals: BTreeSet::new(), witness: BTreeMap::new() }
    }

    fn merge(mut self, other: &PartialGrounding) -> Self {
        self.literals.extend(other.literals.iter().copied());
        self.witness.extend(other.witness.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }
}

fn resolve_term(term: &Term, env: &Env, scene: &Scene) -> Result<ObjectIdx, GoalError> {
    match term {
        Term::Var(v) => env
            .get(v)
            .copied()
            .ok_or_else(|| GoalError::UnboundVariable { var: v.clone() }),
        Term::Object(id) => scene
            .index_of(id)
            .ok_or_else(|| GoalError::UnknownObject { id: id.clone() }),
    }
}

fn ground_literal(
    lit: &LitTemplate,
    negated: bool,
    env: &Env,
    scene: &Scene,
) -> Result<Literal, GoalError> {
    check_literal_arity(lit)?;
    let subject = resolve_term(&lit.subject, env, scene)?;
    let object = lit
        .object
        .as_ref()
        .map(|t| resolve_term(t, env, scene))
        .transpose()?;
    let atom = Atom { kind: lit.kind, subject, object };
    Ok(Literal { atom, negated })
}

/// Cartesian combination of alternatives from sibling conjuncts.
fn combine(lhs: Vec<PartialGrounding>, rhs: Vec<PartialGrounding>) -> Vec<PartialGrounding> {
    let mut out = Vec::with_capacity(lhs.len() * rhs.len());
    for a in &lhs {
        for b in &rhs {
            out.push(a.clone().merge(b));
        }
    }
    out
}

fn expand(
    formula: &GoalFormula,
    env: &Env,
    scene: &Scene,
    warnings: &mut Vec<String>,
) -> Result<Vec<PartialGrounding>, GoalError> {
    match formula {
        GoalFormula::Lit(lit) => {
            let literal = ground_literal(lit, false, env, scene)?;
            Ok(vec![PartialGrounding {
                literals: BTreeSet::from([literal]),
                witness: BTreeMap::new(),
            }])
        }
        GoalFormula::Not(child) => match child.as_ref() {
            GoalFormula::Lit(lit) => {
                let literal = ground_literal(lit, true, env, scene)?;
                Ok(vec![PartialGrounding {
                    literals: BTreeSet::from([literal]),
                    witness: BTreeMap::new(),
                }])
            }
            // A negated conjunction of literals expands disjunctively: one
            // alternative per conjunct, each denying that conjunct.
            GoalFormula::And(children) => {
                let mut out = Vec::with_capacity(children.len());
                for c in children {
                    let GoalFormula::Lit(lit) = c else {
                        return Err(GoalError::MalformedNegation);
                    };
                    let literal = ground_literal(lit, true, env, scene)?;
                    out.push(PartialGrounding {
                        literals: BTreeSet::from([literal]),
                        witness: BTreeMap::new(),
                    });
                }
                Ok(out)
            }
            _ => Err(GoalError::MalformedNegation),
        },
        GoalFormula::And(children) => {
            let mut acc = vec![PartialGrounding::empty()];
            for c in children {
                let expanded = expand(c, env, scene, warnings)?;
                acc = combine(acc, expanded);
            }
            Ok(acc)
        }
        GoalFormula::ForAll { category, var, body } => {
            let members = scene.category_members(category);
            if members.is_empty() {
                warnings.push(format!(
                    "for-all over category `{category}` has no scene objects; conjunction is vacuously true"
                ));
                return Ok(vec![PartialGrounding::empty()]);
            }
            let mut acc = vec![PartialGrounding::empty()];
            for member in members {
                let mut inner = env.clone();
                inner.insert(var.clone(), member);
                let expanded = expand(body, &inner, scene, warnings)?;
                acc = combine(acc, expanded);
            }
            Ok(acc)
        }
        GoalFormula::ForAtLeastOne { category, var, body } => {
            let members = scene.category_members(category);
            if members.is_empty() {
                return Err(GoalError::UngroundableExistential { category: category.clone() });
            }
            let mut out = Vec::new();
            for member in members {
                let mut inner = env.clone();
                inner.insert(var.clone(), member);
                for mut pg in expand(body, &inner, scene, warnings)? {
                    pg.witness.insert(var.clone(), member);
                    out.push(pg);
                }
            }
            Ok(out)
        }
    }
}

fn is_contradictory(literals: &BTreeSet<Literal>) -> bool {
    literals
        .iter()
        .filter(|l| l.negated)
        .any(|l| literals.contains(&Literal { atom: l.atom, negated: false }))
}

/// Expand a goal formula over a scene into its alternative groundings.
///
/// Witness combinations whose literal sets coincide are merged, and
/// combinations that demand both an atom and its negation are dropped as
/// unsatisfiable. The result keeps the order in which witnesses were
/// enumerated (scene object order), so it is deterministic.
pub fn ground_goal(formula: &GoalFormula, scene: &Scene) -> Result<GroundedGoal, GoalError> {
    validate_formula(formula)?;
    let mut warnings = Vec::new();
    let expanded = expand(formula, &Env::new(), scene, &mut warnings)?;
    if expanded.is_empty() {
        return Err(GoalError::EmptyGoal);
    }
    let total = expanded.len();
    let mut seen = BTreeSet::new();
    let mut groundings = Vec::new();
    for pg in expanded {
        if is_contradictory(&pg.literals) {
            continue;
        }
        if seen.insert(pg.literals.clone()) {
            groundings.push(Grounding { literals: pg.literals, witness: pg.witness });
        }
    }
    if groundings.is_empty() {
        return Err(GoalError::NoConsistentGrounding);
    }
    if groundings.len() < total {
        warnings.push(format!(
            "{} of {} witness combinations merged or dropped as contradictory",
            total - groundings.len(),
            total
        ));
    }
    Ok(GroundedGoal { groundings, warnings })
}

/// Number of grounding literals that hold in `state`. A negated literal holds
/// iff its atom is absent.
pub fn count_satisfied(state: &WorldState, grounding: &Grounding) -> usize {
    grounding.literals.iter().filter(|l| l.holds_in(state)).count()
}

/// Best satisfied fraction over all groundings, and whether any grounding is
/// fully satisfied. A zero-literal grounding counts as fully satisfied.
pub fn progress(state: &WorldState, goal: &GroundedGoal) -> ProgressReport {
    assert!(!goal.groundings.is_empty(), "grounded goal must be nonempty");
    let mut best = Fraction::ZERO;
    let mut best_grounding = 0;
    let mut success = false;
    for (i, g) in goal.groundings.iter().enumerate() {
        let fraction = if g.literals.is_empty() {
            Fraction::ONE
        } else {
            Fraction::new(count_satisfied(state, g) as u64, g.literals.len() as u64)
        };
        if fraction.is_one() {
            success = true;
        }
        if i == 0 || fraction > best {
            best = fraction;
            best_grounding = i;
        }
    }
    ProgressReport { fraction: best, success, best_grounding }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ObjectDef, Property};

    fn obj(id: &str, category: &str, props: &[Property]) -> ObjectDef {
        ObjectDef {
            id: id.into(),
            category: category.into(),
            properties: props.iter().copied().collect(),
        }
    }

    fn var(v: &str) -> Term {
        Term::Var(v.into())
    }

    fn object(id: &str) -> Term {
        Term::Object(id.into())
    }

    /// Scene mirroring the cupboard activity: 2 cabinets, 2 cups, 2 bowls.
    fn cupboard_scene() -> Scene {
        Scene::new(vec![
            obj("bottom_cabinet_41", "cabinet", &[Property::Openable, Property::Container]),
            obj("top_cabinet_47", "cabinet", &[Property::Openable, Property::Container]),
            obj("cup_0", "cup", &[Property::Graspable]),
            obj("cup_1", "cup", &[Property::Graspable]),
            obj("bowl_0", "bowl", &[Property::Graspable]),
            obj("bowl_1", "bowl", &[Property::Graspable]),
        ])
    }

    /// The cupboard goal: dust every cabinet; all bowls in one cabinet (not
    /// cup_1's), all cups in one cabinet (not bowl_1's).
    fn cupboard_goal() -> GoalFormula {
        GoalFormula::And(vec![
            GoalFormula::forall(
                "cabinet",
                "c",
                GoalFormula::negated(GoalFormula::lit(PredicateKind::Dusty, var("c"), None)),
            ),
            GoalFormula::for_at_least_one(
                "cabinet",
                "cb",
                GoalFormula::And(vec![
                    GoalFormula::forall(
                        "bowl",
                        "b",
                        GoalFormula::lit(PredicateKind::Inside, var("b"), Some(var("cb"))),
                    ),
                    GoalFormula::negated(GoalFormula::lit(
                        PredicateKind::Inside,
                        object("cup_1"),
                        Some(var("cb")),
                    )),
                ]),
            ),
            GoalFormula::for_at_least_one(
                "cabinet",
                "cc",
                GoalFormula::And(vec![
                    GoalFormula::forall(
                        "cup",
                        "u",
                        GoalFormula::lit(PredicateKind::Inside, var("u"), Some(var("cc"))),
                    ),
                    GoalFormula::negated(GoalFormula::lit(
                        PredicateKind::Inside,
                        object("bowl_1"),
                        Some(var("cc")),
                    )),
                ]),
            ),
        ])
    }

    fn window_scene() -> Scene {
        Scene::new(vec![
            obj("window_0", "window", &[Property::Openable]),
            obj("window_1", "window", &[Property::Openable]),
            obj("window_2", "window", &[Property::Openable]),
        ])
    }

    fn window_goal() -> GoalFormula {
        GoalFormula::forall(
            "window",
            "w",
            GoalFormula::negated(GoalFormula::lit(PredicateKind::Open, var("w"), None)),
        )
    }

    #[test]
    fn cupboard_goal_grounds_two_ways() {
        let scene = cupboard_scene();
        let grounded = ground_goal(&cupboard_goal(), &scene).unwrap();
        assert_eq!(grounded.groundings.len(), 2);
        // Each consistent grounding assigns bowls and cups to different
        // cabinets.
        for g in &grounded.groundings {
            assert_ne!(g.witness["cb"], g.witness["cc"]);
            assert_eq!(g.literals.len(), 8);
        }
    }

    #[test]
    fn window_goal_grounds_once_with_three_literals() {
        let scene = window_scene();
        let grounded = ground_goal(&window_goal(), &scene).unwrap();
        assert_eq!(grounded.groundings.len(), 1);
        assert_eq!(grounded.groundings[0].literals.len(), 3);
        assert!(grounded.groundings[0].witness.is_empty());
    }

    #[test]
    fn independent_existentials_prune_contradictions() {
        // Hand enumeration for the cupboard-style pair of existentials: the
        // 2x2 witness product gives 4 combinations; the two same-cabinet ones
        // demand both inside(cup_1, c) and its negation, so 2 remain.
        let scene = cupboard_scene();
        let formula = GoalFormula::And(vec![
            GoalFormula::for_at_least_one(
                "cabinet",
                "x",
                GoalFormula::And(vec![
                    GoalFormula::lit(PredicateKind::Inside, object("cup_1"), Some(var("x"))),
                ]),
            ),
            GoalFormula::for_at_least_one(
                "cabinet",
                "y",
                GoalFormula::negated(GoalFormula::lit(
                    PredicateKind::Inside,
                    object("cup_1"),
                    Some(var("y")),
                )),
            ),
        ]);
        let grounded = ground_goal(&formula, &scene).unwrap();
        assert!(grounded.groundings.len() <= 4);
        assert_eq!(grounded.groundings.len(), 2);
        assert!(!grounded.warnings.is_empty());
    }

    #[test]
    fn identical_witness_expansions_are_merged() {
        let scene = cupboard_scene();
        // Both witnesses produce the same literal (cup_0 has a fixed place),
        // so the two groundings collapse into one.
        let formula = GoalFormula::for_at_least_one(
            "cabinet",
            "c",
            GoalFormula::lit(PredicateKind::Inside, object("cup_0"), Some(object("bottom_cabinet_41"))),
        );
        let grounded = ground_goal(&formula, &scene).unwrap();
        assert_eq!(grounded.groundings.len(), 1);
    }

    #[test]
    fn existential_over_empty_category_is_ungroundable() {
        let scene = window_scene();
        let formula = GoalFormula::for_at_least_one(
            "cabinet",
            "c",
            GoalFormula::lit(PredicateKind::Open, var("c"), None),
        );
        assert_eq!(
            ground_goal(&formula, &scene),
            Err(GoalError::UngroundableExistential { category: "cabinet".into() })
        );
    }

    #[test]
    fn forall_over_empty_category_is_vacuous_with_warning() {
        let scene = window_scene();
        let formula = GoalFormula::forall(
            "cabinet",
            "c",
            GoalFormula::lit(PredicateKind::Open, var("c"), None),
        );
        let grounded = ground_goal(&formula, &scene).unwrap();
        assert_eq!(grounded.groundings.len(), 1);
        assert!(grounded.groundings[0].literals.is_empty());
        assert!(grounded.warnings.iter().any(|w| w.contains("vacuously")));
    }

    #[test]
    fn unbound_variable_is_rejected() {
        let formula = GoalFormula::lit(PredicateKind::Open, var("w"), None);
        assert_eq!(
            validate_formula(&formula),
            Err(GoalError::UnboundVariable { var: "w".into() })
        );
    }

    #[test]
    fn count_satisfied_checks_literal_by_literal() {
        let scene = cupboard_scene();
        // State from the cupboard activity's initial configuration.
        let state = WorldState::new([
            Atom::unary(PredicateKind::Dusty, scene.index_of("bottom_cabinet_41").unwrap()).unwrap(),
            Atom::unary(PredicateKind::Dusty, scene.index_of("top_cabinet_47").unwrap()).unwrap(),
            Atom::binary(
                PredicateKind::Inside,
                scene.index_of("cup_0").unwrap(),
                scene.index_of("bottom_cabinet_41").unwrap(),
            )
            .unwrap(),
            Atom::binary(
                PredicateKind::Inside,
                scene.index_of("cup_1").unwrap(),
                scene.index_of("top_cabinet_47").unwrap(),
            )
            .unwrap(),
            Atom::binary(
                PredicateKind::Inside,
                scene.index_of("bowl_1").unwrap(),
                scene.index_of("bottom_cabinet_41").unwrap(),
            )
            .unwrap(),
        ]);
        let grounded = ground_goal(&cupboard_goal(), &scene).unwrap();
        // Hand evaluation against the grounding that stores bowls in the
        // bottom cabinet and cups in the top cabinet:
        //   not dusty(bottom) F, not dusty(top) F,
        //   inside(bowl_0, bottom) F, inside(bowl_1, bottom) T,
        //   not inside(cup_1, bottom) T,
        //   inside(cup_0, top) F, inside(cup_1, top) T,
        //   not inside(bowl_1, top) T
        // => 4 of 8.
        let bottom = scene.index_of("bottom_cabinet_41").unwrap();
        let bowls_bottom = grounded
            .groundings
            .iter()
            .find(|g| g.witness["cb"] == bottom)
            .unwrap();
        assert_eq!(count_satisfied(&state, bowls_bottom), 4);
    }

    #[test]
    fn count_satisfied_edge_cases() {
        let scene = window_scene();
        let empty = Grounding { literals: BTreeSet::new(), witness: BTreeMap::new() };
        let state = WorldState::default();
        assert_eq!(count_satisfied(&state, &empty), 0);

        let grounded = ground_goal(&window_goal(), &scene).unwrap();
        // No window open: all three negated literals hold.
        assert_eq!(
            count_satisfied(&state, &grounded.groundings[0]),
            grounded.groundings[0].literals.len()
        );
    }

    #[test]
    fn progress_on_windows() {
        let scene = window_scene();
        let grounded = ground_goal(&window_goal(), &scene).unwrap();
        let all_closed = WorldState::default();
        let report = progress(&all_closed, &grounded);
        assert_eq!(report.fraction, Fraction::ONE);
        assert!(report.success);

        let open = |ids: &[&str]| {
            WorldState::new(ids.iter().map(|id| {
                Atom::unary(PredicateKind::Open, scene.index_of(id).unwrap()).unwrap()
            }))
        };
        let two_open = open(&["window_1", "window_2"]);
        let report = progress(&two_open, &grounded);
        assert_eq!(report.fraction, Fraction::new(1, 3));
        assert!(!report.success);
    }

    #[test]
    fn progress_takes_the_best_grounding() {
        let scene = cupboard_scene();
        let grounded = ground_goal(&cupboard_goal(), &scene).unwrap();
        // Construct a state satisfying the bowls-in-bottom grounding fully:
        // nothing dusty, bowls inside bottom, cups inside top.
        let b = |id: &str| scene.index_of(id).unwrap();
        let state = WorldState::new([
            Atom::binary(PredicateKind::Inside, b("bowl_0"), b("bottom_cabinet_41")).unwrap(),
            Atom::binary(PredicateKind::Inside, b("bowl_1"), b("bottom_cabinet_41")).unwrap(),
            Atom::binary(PredicateKind::Inside, b("cup_0"), b("top_cabinet_47")).unwrap(),
            Atom::binary(PredicateKind::Inside, b("cup_1"), b("top_cabinet_47")).unwrap(),
        ]);
        let report = progress(&state, &grounded);
        assert!(report.success);
        assert_eq!(report.fraction, Fraction::ONE);
        // The other grounding is only partially satisfied.
        let other = (report.best_grounding + 1) % 2;
        let partial = count_satisfied(&state, &grounded.groundings[other]);
        assert!(partial < grounded.groundings[other].literals.len());
    }

    #[test]
    fn grounding_is_object_order_invariant() {
        let scene = cupboard_scene();
        let mut reversed_objects = scene.objects.clone();
        reversed_objects.reverse();
        let reversed = Scene::new(reversed_objects);

        let to_id_sets = |scene: &Scene, goal: &GroundedGoal| -> BTreeSet<BTreeSet<String>> {
            goal.groundings
                .iter()
                .map(|g| g.literals.iter().map(|l| l.describe(scene)).collect())
                .collect()
        };
        let a = ground_goal(&cupboard_goal(), &scene).unwrap();
        let b = ground_goal(&cupboard_goal(), &reversed).unwrap();
        assert_eq!(to_id_sets(&scene, &a), to_id_sets(&reversed, &b));
    }

    #[test]
    fn satisfying_another_literal_never_decreases_progress() {
        let scene = cupboard_scene();
        let grounded = ground_goal(&cupboard_goal(), &scene).unwrap();
        let b = |id: &str| scene.index_of(id).unwrap();
        let mut state = WorldState::new([
            Atom::unary(PredicateKind::Dusty, b("bottom_cabinet_41")).unwrap(),
            Atom::unary(PredicateKind::Dusty, b("top_cabinet_47")).unwrap(),
        ]);
        let mut last = progress(&state, &grounded).fraction;
        // Satisfy literals of the argmax grounding one at a time.
        loop {
            let report = progress(&state, &grounded);
            assert!(report.fraction >= last);
            last = report.fraction;
            let grounding = &grounded.groundings[report.best_grounding];
            let Some(unsatisfied) = grounding
                .literals
                .iter()
                .find(|l| !l.holds_in(&state))
                .copied()
            else {
                break;
            };
            if unsatisfied.negated {
                state.atoms.remove(&unsatisfied.atom);
            } else {
                state.atoms.insert(unsatisfied.atom);
            }
        }
        assert!(progress(&state, &grounded).success);
    }
}
