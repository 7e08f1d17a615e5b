//! Problem files.
//!
//! A problem is a TOML document:
//!
//! ```toml
//! format = 1
//! name = "two-agents"
//! init = ["p"]
//!
//! [config]                       # every field optional
//! goal_reward = 10.0
//! delay_penalty = 1.0
//! infeasible_payoff = -1000.0
//! seed = 0
//! agent_order = "seeded"         # or "declared"
//! tie_break = "action-first"     # or "seeded"
//! check_goals = false
//!
//! [[agents]]
//! name = "A"
//!
//! [[agents.plans]]
//! name = "A1"
//! goals = ["g1"]
//! actions = [
//!   { name = "a1", pre = ["p"], add = ["q"], del = ["p"] },
//! ]
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::{AgentOrder, SolveOptions, TieBreak};
use crate::strips::{benefit, is_valid_symbol, Action, Literal, ModelError, Plan, State, UtilityConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Semantic { path: String, message: String },
}

impl ProblemError {
    fn semantic(path: impl Into<String>, message: impl Into<String>) -> Self {
        ProblemError::Semantic {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub name: String,
    pub plans: Vec<Plan>,
}

impl Agent {
    pub fn plan(&self, name: &str) -> Option<(usize, &Plan)> {
        self.plans.iter().enumerate().find(|(_, p)| p.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub utility: UtilityConfig,
    pub seed: u64,
    pub agent_order: AgentOrder,
    pub tie_break: TieBreak,
    /// Re-check declared goals against each plan's solo execution.
    pub check_goals: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            utility: UtilityConfig::default(),
            seed: 0,
            agent_order: AgentOrder::Seeded,
            tie_break: TieBreak::ActionFirst,
            check_goals: false,
        }
    }
}

impl ProblemConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            agent_order: self.agent_order,
            tie_break: self.tie_break,
            seed: self.seed,
            node_budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub init: State,
    pub agents: Vec<Agent>,
    pub config: ProblemConfig,
}

impl Problem {
    pub fn agent(&self, name: &str) -> Option<(usize, &Agent)> {
        self.agents.iter().enumerate().find(|(_, a)| a.name == name)
    }

    /// Lower bound on any feasible utility: agent `i` can be delayed at
    /// most once per real action of the other agents.
    pub fn worst_feasible_utility(&self) -> f64 {
        let cfg = &self.config.utility;
        let longest: Vec<usize> = self
            .agents
            .iter()
            .map(|a| a.plans.iter().map(Plan::len).max().unwrap_or(0))
            .collect();
        let total: usize = longest.iter().sum();
        self.agents
            .iter()
            .zip(&longest)
            .flat_map(|(a, own)| {
                a.plans
                    .iter()
                    .map(move |p| benefit(p, cfg) - cfg.delay_penalty * (total - own) as f64)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the utility parameters against this problem.
    pub fn validate_config(&self) -> Result<(), ProblemError> {
        let cfg = &self.config.utility;
        if !(cfg.goal_reward > 0.0 && cfg.goal_reward.is_finite()) {
            return Err(ProblemError::semantic("config.goal_reward", "must be a positive number"));
        }
        if !(cfg.delay_penalty >= 0.0 && cfg.delay_penalty.is_finite()) {
            return Err(ProblemError::semantic("config.delay_penalty", "must be non-negative"));
        }
        let worst = self.worst_feasible_utility();
        if !(cfg.infeasible_payoff.is_finite() && cfg.infeasible_payoff < worst) {
            return Err(ProblemError::semantic(
                "config.infeasible_payoff",
                format!(
                    "{} must be finite and below the worst reachable utility {worst}",
                    cfg.infeasible_payoff
                ),
            ));
        }
        Ok(())
    }

    /// Declared goals that do not hold after a plan's solo execution.
    pub fn goal_warnings(&self) -> Vec<String> {
        self.agents
            .iter()
            .flat_map(|a| a.plans.iter())
            .flat_map(|p| p.unmet_goals(&self.init))
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    format: u32,
    #[serde(default = "default_name")]
    name: String,
    #[serde(default)]
    init: Vec<String>,
    #[serde(default)]
    config: ConfigDoc,
    #[serde(default)]
    agents: Vec<AgentDoc>,
}

fn default_name() -> String {
    "untitled".to_string()
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    goal_reward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    infeasible_payoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agent_order: Option<AgentOrder>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tie_break: Option<TieBreak>,
    #[serde(skip_serializing_if = "Option::is_none")]
    check_goals: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentDoc {
    name: String,
    #[serde(default)]
    plans: Vec<PlanDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    name: String,
    #[serde(default)]
    goals: Vec<String>,
    #[serde(default)]
    actions: Vec<ActionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionDoc {
    name: String,
    #[serde(default)]
    pre: Vec<String>,
    #[serde(default)]
    add: Vec<String>,
    #[serde(default)]
    del: Vec<String>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn literal_set(names: &[String], path: &str) -> Result<BTreeSet<Literal>, ProblemError> {
    names
        .iter()
        .map(|n| Literal::new(n).map_err(|e| ProblemError::semantic(path, e.to_string())))
        .collect()
}

fn check_symbol(name: &str, path: &str) -> Result<(), ProblemError> {
    if is_valid_symbol(name) {
        Ok(())
    } else {
        Err(ProblemError::semantic(path, format!("invalid name {name:?}")))
    }
}

/// Parses and validates a problem document, applying config defaults.
pub fn parse_problem(text: &str) -> Result<Problem, ProblemError> {
    let doc: ProblemDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ProblemError::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    if doc.format != FORMAT_VERSION {
        return Err(ProblemError::semantic(
            "format",
            format!("unsupported format version {} (expected {FORMAT_VERSION})", doc.format),
        ));
    }
    if doc.agents.is_empty() {
        return Err(ProblemError::semantic("agents", "at least one agent is required"));
    }

    let init = State::new(literal_set(&doc.init, "init")?);
    let mut agents: Vec<Agent> = Vec::with_capacity(doc.agents.len());
    for (ai, agent) in doc.agents.iter().enumerate() {
        let apath = format!("agents[{ai}] ({})", agent.name);
        check_symbol(&agent.name, &apath)?;
        if agents.iter().any(|a| a.name == agent.name) {
            return Err(ProblemError::semantic(apath, "duplicate agent name"));
        }
        let mut plans: Vec<Plan> = Vec::with_capacity(agent.plans.len());
        for (pi, plan) in agent.plans.iter().enumerate() {
            let ppath = format!("agents[{ai}].plans[{pi}] ({})", plan.name);
            check_symbol(&plan.name, &ppath)?;
            if plans.iter().any(|p| p.name == plan.name) {
                return Err(ProblemError::semantic(ppath, "duplicate plan name"));
            }
            let mut actions = Vec::with_capacity(plan.actions.len());
            for (xi, action) in plan.actions.iter().enumerate() {
                let xpath = format!("agents[{ai}].plans[{pi}].actions[{xi}] ({})", action.name);
                check_symbol(&action.name, &xpath)?;
                let built = Action::new(
                    action.name.clone(),
                    literal_set(&action.pre, &xpath)?,
                    literal_set(&action.add, &xpath)?,
                    literal_set(&action.del, &xpath)?,
                )
                .map_err(|e| match e {
                    ModelError::AddDeleteOverlap { action, literal } => ProblemError::semantic(
                        xpath.clone(),
                        format!("action `{action}` both adds and deletes `{literal}`"),
                    ),
                    other => ProblemError::semantic(xpath.clone(), other.to_string()),
                })?;
                actions.push(built);
            }
            let mut goals = BTreeSet::new();
            for goal in &plan.goals {
                check_symbol(goal, &ppath)?;
                if !goals.insert(goal.clone()) {
                    return Err(ProblemError::semantic(ppath, format!("duplicate goal `{goal}`")));
                }
            }
            plans.push(Plan {
                name: plan.name.clone(),
                owner: agent.name.clone(),
                actions,
                goals,
            });
        }
        agents.push(Agent {
            name: agent.name.clone(),
            plans,
        });
    }

    let defaults = ProblemConfig::default();
    let c = &doc.config;
    let config = ProblemConfig {
        utility: UtilityConfig {
            goal_reward: c.goal_reward.unwrap_or(defaults.utility.goal_reward),
            delay_penalty: c.delay_penalty.unwrap_or(defaults.utility.delay_penalty),
            infeasible_payoff: c.infeasible_payoff.unwrap_or(defaults.utility.infeasible_payoff),
        },
        seed: c.seed.unwrap_or(defaults.seed),
        agent_order: c.agent_order.unwrap_or(defaults.agent_order),
        tie_break: c.tie_break.unwrap_or(defaults.tie_break),
        check_goals: c.check_goals.unwrap_or(defaults.check_goals),
    };
    let problem = Problem {
        name: doc.name,
        init,
        agents,
        config,
    };
    problem.validate_config()?;
    Ok(problem)
}

fn names(set: &BTreeSet<Literal>) -> Vec<String> {
    set.iter().map(|l| l.to_string()).collect()
}

/// Writes a problem back to the file format with every config field explicit.
pub fn serialize_problem(problem: &Problem) -> String {
    let c = &problem.config;
    let doc = ProblemDoc {
        format: FORMAT_VERSION,
        name: problem.name.clone(),
        init: names(problem.init.literals()),
        config: ConfigDoc {
            goal_reward: Some(c.utility.goal_reward),
            delay_penalty: Some(c.utility.delay_penalty),
            infeasible_payoff: Some(c.utility.infeasible_payoff),
            seed: Some(c.seed),
            agent_order: Some(c.agent_order),
            tie_break: Some(c.tie_break),
            check_goals: Some(c.check_goals),
        },
        agents: problem
            .agents
            .iter()
            .map(|a| AgentDoc {
                name: a.name.clone(),
                plans: a
                    .plans
                    .iter()
                    .map(|p| PlanDoc {
                        name: p.name.clone(),
                        goals: p.goals.iter().cloned().collect(),
                        actions: p
                            .actions
                            .iter()
                            .map(|x| ActionDoc {
                                name: x.name().to_string(),
                                pre: names(x.pre()),
                                add: names(x.add()),
                                del: names(x.del()),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("problem documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
format = 1
[[agents]]
name = "A"
[[agents.plans]]
name = "empty"
"#;

    #[test]
    fn minimal_problem() {
        let p = parse_problem(MINIMAL).unwrap();
        assert_eq!(p.agents.len(), 1);
        assert!(p.agents[0].plans[0].is_empty());
        assert_eq!(p.config, ProblemConfig::default());
        assert_eq!(p.name, "untitled");
    }

    #[test]
    fn integer_config_values_are_accepted() {
        let text = format!("{MINIMAL}\n[config]\ngoal_reward = 12\ndelay_penalty = 3.5\nseed = 7\n");
        let p = parse_problem(&text).unwrap();
        assert_eq!(p.config.utility.goal_reward, 12.0);
        assert_eq!(p.config.utility.delay_penalty, 3.5);
        assert_eq!(p.config.seed, 7);
    }

    #[test]
    fn add_delete_overlap_names_the_action() {
        let text = r#"
format = 1
[[agents]]
name = "A"
[[agents.plans]]
name = "P"
actions = [{ name = "fly", add = ["x"], del = ["x"] }]
"#;
        let err = parse_problem(text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ProblemError::Semantic { .. }));
        assert!(msg.contains("fly"), "{msg}");
        assert!(msg.contains("actions[0]"), "{msg}");
    }

    #[test]
    fn unknown_field_has_position() {
        let text = "format = 1\n[[agents]]\nname = \"A\"\ncolour = \"red\"\n";
        match parse_problem(text).unwrap_err() {
            ProblemError::Syntax { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_problem("format = 1\ninit = [\"p\"\n").unwrap_err();
        assert!(matches!(err, ProblemError::Syntax { line: 2, .. } | ProblemError::Syntax { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn duplicates_are_rejected() {
        let text = "format = 1\n[[agents]]\nname = \"A\"\n[[agents]]\nname = \"A\"\n";
        let err = parse_problem(text).unwrap_err().to_string();
        assert!(err.contains("duplicate agent"), "{err}");

        let text = "format = 1\n[[agents]]\nname = \"A\"\n[[agents.plans]]\nname = \"P\"\n[[agents.plans]]\nname = \"P\"\n";
        let err = parse_problem(text).unwrap_err().to_string();
        assert!(err.contains("duplicate plan"), "{err}");
    }

    #[test]
    fn bad_config_is_rejected() {
        let err = parse_problem(&format!("{MINIMAL}[config]\ngoal_reward = 0\n")).unwrap_err();
        assert!(err.to_string().contains("goal_reward"));
        let err = parse_problem(&format!("{MINIMAL}[config]\ninfeasible_payoff = 5\n")).unwrap_err();
        assert!(err.to_string().contains("infeasible_payoff"));
        let err = parse_problem("format = 2\n").unwrap_err();
        assert!(err.to_string().contains("format"));
    }

    #[test]
    fn invalid_literal_is_rejected() {
        let text = "format = 1\ninit = [\"two words\"]\n[[agents]]\nname = \"A\"\n";
        let err = parse_problem(text).unwrap_err().to_string();
        assert!(err.starts_with("init"), "{err}");
    }

    #[test]
    fn serialize_round_trip() {
        let text = r#"
format = 1
name = "rt"
init = ["p", "q"]
[config]
delay_penalty = 2.5
agent_order = "declared"
[[agents]]
name = "A"
[[agents.plans]]
name = "A1"
goals = ["g1", "g2"]
actions = [{ name = "a1", pre = ["p"], add = ["r"], del = ["q"] }, { name = "a2" }]
[[agents]]
name = "B"
"#;
        let p = parse_problem(text).unwrap();
        assert_eq!(parse_problem(&serialize_problem(&p)).unwrap(), p);
    }
}
