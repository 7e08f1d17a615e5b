//! Solution reports in human-readable text and JSON.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    max_welfare, mixed_nash_2p, pareto_front, pure_nash, welfare, BuiltMatrix, DegenerateSupport, MixedProfile,
    NormalFormGame, TOLERANCE,
};
use crate::problem::{Problem, ProblemConfig};
use crate::render::{format_number, render_matrix, render_schedule};
use crate::schedule::{AgentOrder, ScheduleProfile, TieBreak};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureEquilibrium {
    pub cell: Vec<usize>,
    pub profile: Vec<String>,
    pub payoffs: Vec<f64>,
    pub delays: Vec<usize>,
    pub welfare: f64,
    pub pareto_optimal: bool,
    pub max_welfare: bool,
    /// Agents in the order they moved in the internal game.
    pub agent_order: Vec<String>,
    pub schedule: Option<ScheduleProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub problem: String,
    pub config: ProblemConfig,
    pub matrix: NormalFormGame,
    pub pure_equilibria: Vec<PureEquilibrium>,
    /// Equilibria with at least one non-singleton support (2 agents only).
    pub mixed_equilibria: Vec<MixedProfile>,
    pub degenerate_supports: Vec<DegenerateSupport>,
    pub pareto_front: Vec<Vec<String>>,
    pub max_welfare: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

impl SolutionReport {
    pub fn equilibrium_count(&self) -> usize {
        self.pure_equilibria.len() + self.mixed_equilibria.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Runs every analysis on a built matrix.
pub fn build_report(problem: &Problem, built: &BuiltMatrix) -> SolutionReport {
    let game = &built.game;
    let front = pareto_front(game);
    let best = max_welfare(game);
    let pure_equilibria = pure_nash(game)
        .into_iter()
        .map(|cell| {
            let c = game.cell(&cell);
            let result = built.results[game.index(&cell)].as_ref().ok();
            PureEquilibrium {
                profile: game.profile_names(&cell),
                payoffs: c.payoffs.clone(),
                delays: c.delays.clone(),
                welfare: welfare(c),
                pareto_optimal: front.contains(&cell),
                max_welfare: best.contains(&cell),
                agent_order: result
                    .map(|r| r.agent_order.iter().map(|&i| game.agents[i].clone()).collect())
                    .unwrap_or_default(),
                schedule: result.map(|r| r.profile.clone()),
                cell,
            }
        })
        .collect();

    let mut warnings: Vec<String> = game
        .profiles()
        .filter_map(|p| {
            game.cell(&p)
                .error
                .as_ref()
                .map(|e| format!("{}: {e}", game.profile_names(&p).join("/")))
        })
        .collect();
    if problem.config.check_goals {
        warnings.extend(problem.goal_warnings());
    }

    let (mixed_equilibria, degenerate_supports) = match mixed_nash_2p(game, TOLERANCE) {
        Ok(m) => (m.equilibria.into_iter().filter(|e| !e.is_pure()).collect(), m.degenerate),
        Err(_) => (Vec::new(), Vec::new()),
    };

    SolutionReport {
        problem: problem.name.clone(),
        config: problem.config,
        pure_equilibria,
        mixed_equilibria,
        degenerate_supports,
        pareto_front: front.iter().map(|p| game.profile_names(p)).collect(),
        max_welfare: best.iter().map(|p| game.profile_names(p)).collect(),
        warnings,
        matrix: game.clone(),
    }
}

fn join_numbers(xs: &[f64]) -> String {
    xs.iter().map(|&x| format_number(x)).collect::<Vec<_>>().join(",")
}

fn format_probability(p: f64) -> String {
    let s = format!("{p:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn render_report(report: &SolutionReport) -> String {
    let game = &report.matrix;
    let cfg = &report.config;
    let mut out = String::new();
    let _ = writeln!(out, "problem: {}", report.problem);
    let _ = writeln!(
        out,
        "config: goal_reward={} delay_penalty={} infeasible_payoff={} seed={} agent_order={} tie_break={}",
        cfg.utility.goal_reward,
        cfg.utility.delay_penalty,
        cfg.utility.infeasible_payoff,
        cfg.seed,
        match cfg.agent_order {
            AgentOrder::Seeded => "seeded",
            AgentOrder::Declared => "declared",
        },
        match cfg.tie_break {
            TieBreak::ActionFirst => "action-first",
            TieBreak::Seeded => "seeded",
        }
    );
    out.push('\n');
    let marked: Vec<Vec<usize>> = report.pure_equilibria.iter().map(|e| e.cell.clone()).collect();
    out.push_str(&render_matrix(game, &marked));
    out.push('\n');

    let _ = writeln!(out, "pure equilibria: {}", report.pure_equilibria.len());
    for eq in &report.pure_equilibria {
        let delays: Vec<String> = eq.delays.iter().map(|d| d.to_string()).collect();
        let mut tags = Vec::new();
        if eq.pareto_optimal {
            tags.push("pareto-optimal");
        }
        if eq.max_welfare {
            tags.push("max-welfare");
        }
        let _ = writeln!(
            out,
            "  ({}) payoffs ({}) delays ({}) welfare {}{}",
            eq.profile.join(", "),
            join_numbers(&eq.payoffs),
            delays.join(","),
            format_number(eq.welfare),
            if tags.is_empty() {
                String::new()
            } else {
                format!(" [{}]", tags.join(", "))
            }
        );
        if let Some(schedule) = &eq.schedule {
            if let Ok(gantt) = render_schedule(schedule) {
                let _ = writeln!(out, "    agent order: {}", eq.agent_order.join(", "));
                for line in gantt.lines() {
                    let _ = writeln!(out, "    {line}");
                }
            }
        }
    }

    if game.num_agents() == 2 {
        let _ = writeln!(out, "mixed equilibria: {}", report.mixed_equilibria.len());
        for eq in &report.mixed_equilibria {
            let parts: Vec<String> = eq
                .probabilities
                .iter()
                .enumerate()
                .map(|(i, probs)| {
                    let entries: Vec<String> = eq.support[i]
                        .iter()
                        .map(|&s| format!("{}={}", game.strategies[i][s], format_probability(probs[s])))
                        .collect();
                    format!("{}: {}", game.agents[i], entries.join(" "))
                })
                .collect();
            let payoffs: Vec<String> = eq.payoffs.iter().map(|p| format_probability(*p)).collect();
            let _ = writeln!(out, "  {} | expected payoffs ({})", parts.join("; "), payoffs.join(","));
        }
        for d in &report.degenerate_supports {
            let names: Vec<String> = d
                .support
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let list: Vec<&str> = s.iter().map(|&k| game.strategies[i][k].as_str()).collect();
                    format!("{{{}}}", list.join(","))
                })
                .collect();
            let _ = writeln!(out, "  degenerate support {} (equilibria not isolated)", names.join(" x "));
        }
    }

    let list = |cells: &[Vec<String>]| {
        cells
            .iter()
            .map(|c| format!("({})", c.join(", ")))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "pareto front: {}", list(&report.pareto_front));
    let _ = writeln!(out, "max welfare: {}", list(&report.max_welfare));
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
