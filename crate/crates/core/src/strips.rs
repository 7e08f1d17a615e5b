//! Propositional STRIPS world model: literals, states, actions and plans.
//!
//! Only positive literals exist. An action removes literals through its
//! delete list; there are no negative preconditions or conditional effects.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by the world model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid literal symbol {0:?}")]
    InvalidLiteral(String),
    #[error("action `{action}` both adds and deletes `{literal}`")]
    AddDeleteOverlap { action: String, literal: String },
    #[error("action `{action}` is not applicable: missing {missing:?}")]
    NotApplicable { action: String, missing: Vec<String> },
    #[error("actions `{0}` and `{1}` are mutex and cannot share a time step")]
    Mutex(String, String),
}

/// A positive propositional literal, compared by exact symbol equality.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Literal(Arc<str>);

impl Literal {
    pub fn new(name: &str) -> Result<Self, ModelError> {
        if is_valid_symbol(name) {
            Ok(Literal(Arc::from(name)))
        } else {
            Err(ModelError::InvalidLiteral(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Symbols are non-empty and contain no whitespace or control characters.
pub fn is_valid_symbol(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|c| c.is_whitespace() || c.is_control())
}

impl TryFrom<String> for Literal {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Literal::new(&value)
    }
}

impl From<Literal> for String {
    fn from(value: Literal) -> Self {
        value.0.to_string()
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Builds a literal set from symbols, failing on the first invalid one.
pub fn literals<I, S>(names: I) -> Result<BTreeSet<Literal>, ModelError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    names.into_iter().map(|n| Literal::new(n.as_ref())).collect()
}

/// A planning state: the set of literals that currently hold.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State {
    literals: BTreeSet<Literal>,
}

impl State {
    pub fn new(literals: BTreeSet<Literal>) -> Self {
        State { literals }
    }

    pub fn from_symbols<I, S>(names: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        literals(names).map(State::new)
    }

    pub fn literals(&self) -> &BTreeSet<Literal> {
        &self.literals
    }

    pub fn contains(&self, literal: &Literal) -> bool {
        self.literals.contains(literal)
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.literals.iter()).finish()
    }
}

/// A STRIPS operator `<pre, add, del>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    name: String,
    pre: BTreeSet<Literal>,
    add: BTreeSet<Literal>,
    del: BTreeSet<Literal>,
}

impl Action {
    /// Fails if a literal appears in both the add and the delete list.
    pub fn new(
        name: impl Into<String>,
        pre: BTreeSet<Literal>,
        add: BTreeSet<Literal>,
        del: BTreeSet<Literal>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if let Some(lit) = add.intersection(&del).next() {
            return Err(ModelError::AddDeleteOverlap {
                action: name,
                literal: lit.to_string(),
            });
        }
        Ok(Action {
            name,
            pre,
            add,
            del,
        })
    }

    /// Convenience constructor from string slices.
    pub fn from_symbols(
        name: impl Into<String>,
        pre: &[&str],
        add: &[&str],
        del: &[&str],
    ) -> Result<Self, ModelError> {
        Action::new(name, literals(pre)?, literals(add)?, literals(del)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pre(&self) -> &BTreeSet<Literal> {
        &self.pre
    }

    pub fn add(&self) -> &BTreeSet<Literal> {
        &self.add
    }

    pub fn del(&self) -> &BTreeSet<Literal> {
        &self.del
    }
}

/// An agent's totally ordered plan together with the goals it declares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub name: String,
    pub owner: String,
    pub actions: Vec<Action>,
    pub goals: BTreeSet<String>,
}

impl Plan {
    pub fn new(
        name: impl Into<String>,
        owner: impl Into<String>,
        actions: Vec<Action>,
        goals: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Plan {
            name: name.into(),
            owner: owner.into(),
            actions,
            goals: goals.into_iter().map(Into::into).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Checks the declared goals against the state reached by executing the
    /// plan alone from `init`. Returns one message per goal that does not
    /// hold, or a single message if the plan cannot be executed at all.
    pub fn unmet_goals(&self, init: &State) -> Vec<String> {
        let mut state = init.clone();
        for action in &self.actions {
            match apply(&state, action) {
                Ok(next) => state = next,
                Err(e) => return vec![format!("plan `{}` is not executable alone: {e}", self.name)],
            }
        }
        self.goals
            .iter()
            .filter(|g| !Literal::new(g).map(|l| state.contains(&l)).unwrap_or(false))
            .map(|g| format!("plan `{}`: goal `{g}` does not hold after execution", self.name))
            .collect()
    }
}

/// Payoff parameters shared by every agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub goal_reward: f64,
    pub delay_penalty: f64,
    pub infeasible_payoff: f64,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        UtilityConfig {
            goal_reward: 10.0,
            delay_penalty: 1.0,
            infeasible_payoff: -1000.0,
        }
    }
}

impl UtilityConfig {
    /// Lowest utility a feasible schedule of `plans` can reach: every agent
    /// can be delayed by at most the total length of the other plans.
    pub fn worst_feasible_utility(&self, plans: &[&Plan]) -> f64 {
        let total: usize = plans.iter().map(|p| p.len()).sum();
        plans
            .iter()
            .map(|p| benefit(p, self) - self.delay_penalty * (total - p.len()) as f64)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn is_applicable(state: &State, action: &Action) -> bool {
    action.pre.is_subset(&state.literals)
}

/// STRIPS transition `(state \ del) ∪ add`.
pub fn apply(state: &State, action: &Action) -> Result<State, ModelError> {
    if !is_applicable(state, action) {
        return Err(not_applicable(state, action));
    }
    let mut literals: BTreeSet<Literal> = state.literals.difference(&action.del).cloned().collect();
    literals.extend(action.add.iter().cloned());
    Ok(State { literals })
}

fn not_applicable(state: &State, action: &Action) -> ModelError {
    ModelError::NotApplicable {
        action: action.name.clone(),
        missing: action
            .pre
            .difference(&state.literals)
            .map(|l| l.to_string())
            .collect(),
    }
}

/// Interference or inconsistent effects, in either direction.
pub fn mutex(a: &Action, b: &Action) -> bool {
    fn interferes(x: &Action, y: &Action) -> bool {
        x.del
            .iter()
            .any(|l| y.pre.contains(l) || y.add.contains(l))
    }
    interferes(a, b) || interferes(b, a)
}

/// Applies a set of pairwise non-mutex actions that all start in `state`.
pub fn joint_apply(state: &State, actions: &[&Action]) -> Result<State, ModelError> {
    for (i, a) in actions.iter().enumerate() {
        if !is_applicable(state, a) {
            return Err(not_applicable(state, a));
        }
        for b in &actions[i + 1..] {
            if mutex(a, b) {
                return Err(ModelError::Mutex(a.name.clone(), b.name.clone()));
            }
        }
    }
    let mut literals = state.literals.clone();
    for a in actions {
        for l in &a.del {
            literals.remove(l);
        }
    }
    for a in actions {
        literals.extend(a.add.iter().cloned());
    }
    Ok(State { literals })
}

/// Undelayed value of a plan: goal reward minus its earliest makespan, which
/// for a totally ordered plan of instantaneous actions is its length.
pub fn benefit(plan: &Plan, cfg: &UtilityConfig) -> f64 {
    plan.goals.len() as f64 * cfg.goal_reward - plan.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(names: &[&str]) -> State {
        State::from_symbols(names).unwrap()
    }

    fn act(name: &str, pre: &[&str], add: &[&str], del: &[&str]) -> Action {
        Action::from_symbols(name, pre, add, del).unwrap()
    }

    #[test]
    fn applicability() {
        assert!(is_applicable(&st(&["p", "q"]), &act("a", &["p"], &[], &[])));
        assert!(is_applicable(&st(&[]), &act("a", &[], &["x"], &[])));
        assert!(is_applicable(&st(&["z"]), &act("a", &[], &[], &[])));

        let b1 = act("b1", &["p"], &[], &["p"]);
        let a2 = act("a2", &["p"], &[], &[]);
        let after = apply(&st(&["p", "r"]), &b1).unwrap();
        assert!(!is_applicable(&after, &a2));
    }

    #[test]
    fn apply_examples() {
        let s = st(&["p"]);
        assert_eq!(apply(&s, &act("a", &[], &["q"], &["p"])).unwrap(), st(&["q"]));
        assert_eq!(s, st(&["p"]));
        assert_eq!(
            apply(&st(&["p", "r"]), &act("b1", &[], &[], &["p"])).unwrap(),
            st(&["r"])
        );
        assert_eq!(apply(&s, &act("noop", &[], &[], &[])).unwrap(), s);
    }

    #[test]
    fn apply_rejects_inapplicable() {
        let err = apply(&st(&["q"]), &act("a", &["p"], &[], &[])).unwrap_err();
        assert_eq!(
            err,
            ModelError::NotApplicable {
                action: "a".into(),
                missing: vec!["p".into()]
            }
        );
    }

    #[test]
    fn joint_apply_examples() {
        let s = st(&["p"]);
        let a = act("a", &[], &["q"], &[]);
        let b = act("b", &[], &["r"], &[]);
        assert_eq!(joint_apply(&s, &[&a, &b]).unwrap(), st(&["p", "q", "r"]));
        assert_eq!(joint_apply(&s, &[]).unwrap(), s);

        let s = st(&["p", "s"]);
        let a = act("a", &["p"], &["q"], &[]);
        let b = act("b", &["s"], &["t"], &["s"]);
        let joint = joint_apply(&s, &[&a, &b]).unwrap();
        assert_eq!(joint, st(&["p", "q", "t"]));
        let ab = apply(&apply(&s, &a).unwrap(), &b).unwrap();
        let ba = apply(&apply(&s, &b).unwrap(), &a).unwrap();
        assert_eq!(joint, ab);
        assert_eq!(joint, ba);
    }

    #[test]
    fn joint_apply_rejects_mutex_and_inapplicable() {
        let s = st(&["p"]);
        let a = act("a", &[], &[], &["p"]);
        let b = act("b", &["p"], &[], &[]);
        assert!(matches!(joint_apply(&s, &[&a, &b]), Err(ModelError::Mutex(..))));
        let c = act("c", &["zz"], &[], &[]);
        assert!(matches!(
            joint_apply(&s, &[&c]),
            Err(ModelError::NotApplicable { .. })
        ));
    }

    #[test]
    fn mutex_examples() {
        let b1 = act("b1", &["p"], &[], &["p"]);
        let a2 = act("a2", &["p"], &[], &[]);
        assert!(mutex(&b1, &a2));
        assert!(mutex(&a2, &b1));
        assert!(!mutex(&act("x", &["a"], &["b"], &["c"]), &act("y", &["d"], &["e"], &["f"])));
        assert!(mutex(&act("x", &[], &[], &["x"]), &act("y", &[], &["x"], &[])));
    }

    #[test]
    fn add_delete_overlap_is_rejected() {
        let err = Action::from_symbols("bad", &[], &["x"], &["x"]).unwrap_err();
        assert_eq!(
            err,
            ModelError::AddDeleteOverlap {
                action: "bad".into(),
                literal: "x".into()
            }
        );
    }

    #[test]
    fn invalid_symbols() {
        assert!(Literal::new("").is_err());
        assert!(Literal::new("a b").is_err());
        assert!(Literal::new("at-plane1-city2").is_ok());
    }

    #[test]
    fn benefit_examples() {
        let cfg = UtilityConfig::default();
        let a = act("a", &[], &[], &[]);
        let p = Plan::new("A1", "A", vec![a.clone(), a.clone(), a.clone()], ["g1", "g2"]);
        assert_eq!(benefit(&p, &cfg), 17.0);
        let p = Plan::new("A3", "A", vec![a], ["g2"]);
        assert_eq!(benefit(&p, &cfg), 9.0);
        let p = Plan::new("empty", "A", vec![], Vec::<String>::new());
        assert_eq!(benefit(&p, &cfg), 0.0);
    }

    #[test]
    fn unmet_goals_reports_missing_literals() {
        let plan = Plan::new("P", "A", vec![act("a", &[], &["g1"], &[])], ["g1", "g2"]);
        let msgs = plan.unmet_goals(&State::default());
        assert_eq!(msgs.len(), 1);
        assert!(msgs[0].contains("g2"));
    }
}
