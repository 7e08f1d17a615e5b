//! Game-theoretic scheduling of self-interested agents' plans.
//!
//! Every agent owns a set of alternative STRIPS plans. For each plan profile
//! (one plan per agent) an internal extensive-form game decides, by backward
//! induction, which actions are deferred with empty moves so that the joint
//! execution stays conflict free. The resulting utilities fill a normal-form
//! game whose Nash equilibria predict which plans and schedules the agents
//! settle on.
//!
//! With the default `parallel` feature the plan profiles of the normal-form
//! game are solved on the rayon thread pool; without it they are solved
//! sequentially. Both paths produce identical results.

pub mod cli;
pub mod equilibrium;
pub mod nfg;
pub mod problem;
pub mod render;
pub mod report;
pub mod schedule;
pub mod strips;

pub use equilibrium::{
    build_matrix, build_matrix_sequential, max_welfare, mixed_nash_2p, pareto_front, pure_nash, verify_equilibrium,
    BuiltMatrix, Cell, MixedNash, MixedProfile, NormalFormGame, StrategyProfile,
};
#[cfg(feature = "parallel")]
pub use equilibrium::build_matrix_parallel;
pub use nfg::{export_nfg, parse_nfg, NfgGame};
pub use problem::{parse_problem, serialize_problem, Agent, Problem, ProblemConfig, ProblemError};
pub use render::{render_matrix, render_schedule};
pub use report::{build_report, render_report, SolutionReport};
pub use schedule::{
    delay, enumerate_terminals, solve_internal, utility, AgentOrder, GameNode, InternalGame, Move, ScheduleProfile,
    SolveOptions, SolveResult, TieBreak,
};
pub use strips::{apply, benefit, is_applicable, joint_apply, mutex, Action, Literal, Plan, State, UtilityConfig};
