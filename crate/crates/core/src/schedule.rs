//! The internal joint-schedule game.
//!
//! Simultaneous execution of one plan per agent is unrolled into a
//! perfect-information tree: within a time step the agents commit, one after
//! another in a fixed order, either their next plan action or the empty move.
//! Once every agent has committed, the step's real actions are applied
//! jointly and the game moves on to the next step. Backward induction over
//! this tree yields a subgame perfect joint schedule.
//!
//! Step semantics:
//! * preconditions are evaluated in the state at the start of the step;
//! * the real actions of one step must be pairwise non-mutex;
//! * a step made only of empty moves is illegal (checked when the last mover
//!   of the step commits), so every step before termination advances at
//!   least one plan and the number of steps is bounded by the summed plan
//!   lengths.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strips::{benefit, is_applicable, joint_apply, mutex, ModelError, Plan, State, UtilityConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("step {step} exceeds the schedule horizon of {horizon} steps")]
    HorizonExceeded { step: usize, horizon: usize },
    #[error("game tree exceeded the node budget of {0}")]
    BudgetExceeded(u64),
    #[error("invalid move: {0}")]
    InvalidMove(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One agent's move at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    /// Index of the action in the owner's plan.
    Action(usize),
    /// The empty action (⊥).
    Empty,
}

impl Move {
    pub fn is_empty(&self) -> bool {
        matches!(self, Move::Empty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentOrder {
    /// Order drawn per plan profile from the seed.
    #[default]
    Seeded,
    /// Declaration order.
    Declared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// On equal value the real action is preferred over ⊥.
    #[default]
    ActionFirst,
    /// Equal-valued children are picked by a seeded coin flip.
    Seeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub agent_order: AgentOrder,
    pub tie_break: TieBreak,
    pub seed: u64,
    pub node_budget: Option<u64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            agent_order: AgentOrder::Seeded,
            tie_break: TieBreak::ActionFirst,
            seed: 0,
            node_budget: None,
        }
    }
}

impl SolveOptions {
    pub fn declared() -> Self {
        SolveOptions {
            agent_order: AgentOrder::Declared,
            ..Default::default()
        }
    }
}

/// A node of the game tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameNode {
    /// Planning state at the start of the current step.
    pub state: State,
    pub time: usize,
    /// Agent to move, or `None` at a terminal node.
    pub mover: Option<usize>,
    /// Moves committed so far in the current step, as `(agent, move)`.
    pub pending: Vec<(usize, Move)>,
    /// Plan actions played per agent, pending ones included.
    pub progress: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TreeStats {
    /// Nodes visited, terminals and dead ends included.
    pub nodes: u64,
    /// Valid terminal nodes (schedule profiles) reached.
    pub leaves: u64,
    /// Non-terminal nodes without any legal move.
    pub pruned: u64,
}

/// The timed schedule of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSchedule {
    pub agent: String,
    pub plan: String,
    /// Action names of the plan, indexed by [`Move::Action`].
    pub actions: Vec<String>,
    /// One move per time step of the joint schedule.
    pub moves: Vec<Move>,
    /// Step after the agent's last real action (0 for an empty plan).
    pub finish_time: usize,
    pub delay: usize,
    pub utility: f64,
}

impl AgentSchedule {
    pub fn move_label(&self, mv: Move) -> &str {
        match mv {
            Move::Action(i) => &self.actions[i],
            Move::Empty => "⊥",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleProfile {
    pub schedules: Vec<AgentSchedule>,
    pub feasible: bool,
}

impl ScheduleProfile {
    pub fn utilities(&self) -> Vec<f64> {
        self.schedules.iter().map(|s| s.utility).collect()
    }

    pub fn delays(&self) -> Vec<usize> {
        self.schedules.iter().map(|s| s.delay).collect()
    }

    /// Number of time steps in the joint schedule.
    pub fn steps(&self) -> usize {
        self.schedules.first().map_or(0, |s| s.moves.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub profile: ScheduleProfile,
    pub payoff_vector: Vec<f64>,
    /// Agent indices in the order they move within a step.
    pub agent_order: Vec<usize>,
    pub tree_stats: TreeStats,
}

impl SolveResult {
    pub fn feasible(&self) -> bool {
        self.profile.feasible
    }
}

/// Delay of a schedule with respect to the undelayed execution of an
/// `m`-action plan. Empty moves after the last real action do not count.
pub fn delay(schedule: &[Move], m: usize) -> usize {
    if m == 0 {
        return 0;
    }
    let last = schedule.iter().rposition(|mv| !mv.is_empty());
    debug_assert_eq!(schedule.iter().filter(|mv| !mv.is_empty()).count(), m);
    last.map_or(0, |t| t + 1 - m)
}

pub fn utility(beta: f64, delay_steps: usize, cfg: &UtilityConfig) -> f64 {
    beta - cfg.delay_penalty * delay_steps as f64
}

/// Deterministic per-item seed derivation (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The extensive-form game of one plan profile.
#[derive(Debug, Clone)]
pub struct InternalGame<'a> {
    plans: Vec<&'a Plan>,
    init: State,
    cfg: UtilityConfig,
    order: Vec<usize>,
    benefits: Vec<f64>,
    horizon: usize,
}

impl<'a> InternalGame<'a> {
    /// `order` lists agent indices (positions in `plans`) in move order.
    pub fn new(plans: &[&'a Plan], init: &State, cfg: &UtilityConfig, order: Vec<usize>) -> Self {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert!(
            sorted.iter().copied().eq(0..plans.len()),
            "agent order must be a permutation of the profile's agents"
        );
        InternalGame {
            benefits: plans.iter().map(|p| benefit(p, cfg)).collect(),
            horizon: plans.iter().map(|p| p.len()).sum(),
            plans: plans.to_vec(),
            init: init.clone(),
            cfg: *cfg,
            order,
        }
    }

    pub fn with_declared_order(plans: &[&'a Plan], init: &State, cfg: &UtilityConfig) -> Self {
        Self::new(plans, init, cfg, (0..plans.len()).collect())
    }

    pub fn agent_order(&self) -> &[usize] {
        &self.order
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn root(&self) -> GameNode {
        let mut node = GameNode {
            state: self.init.clone(),
            time: 0,
            mover: None,
            pending: Vec::new(),
            progress: vec![0; self.plans.len()],
        };
        node.mover = self.mover_of(&node);
        node
    }

    fn mover_of(&self, node: &GameNode) -> Option<usize> {
        if self.is_terminal(node) {
            None
        } else {
            Some(self.order[node.pending.len()])
        }
    }

    /// True at a step boundary once every plan has been played completely.
    pub fn is_terminal(&self, node: &GameNode) -> bool {
        node.pending.is_empty()
            && node
                .progress
                .iter()
                .zip(&self.plans)
                .all(|(&done, plan)| done == plan.len())
    }

    /// Subset of `{next action, ⊥}` available to the mover, real action first.
    pub fn legal_moves(&self, node: &GameNode) -> Vec<Move> {
        let Some(agent) = node.mover else {
            return Vec::new();
        };
        let plan = self.plans[agent];
        let mut moves = Vec::with_capacity(2);

        let next = node.progress[agent];
        if next < plan.len() {
            let action = &plan.actions[next];
            let compatible = node.pending.iter().all(|&(other, mv)| match mv {
                Move::Action(i) => !mutex(action, &self.plans[other].actions[i]),
                Move::Empty => true,
            });
            if compatible && is_applicable(&node.state, action) {
                moves.push(Move::Action(next));
            }
        }

        let closes_step = node.pending.len() + 1 == self.plans.len();
        let step_is_empty = node.pending.iter().all(|(_, mv)| mv.is_empty());
        if !(closes_step && step_is_empty) {
            moves.push(Move::Empty);
        }
        moves
    }

    /// Commits the mover's move; closes the step when every agent has moved.
    pub fn play(&self, node: &GameNode, mv: Move) -> Result<GameNode, GameError> {
        if !self.legal_moves(node).contains(&mv) {
            return Err(GameError::InvalidMove(format!(
                "{mv:?} at step {} for agent {:?}",
                node.time, node.mover
            )));
        }
        let agent = node.mover.expect("legal moves exist only at non-terminal nodes");
        let mut child = node.clone();
        child.pending.push((agent, mv));
        if let Move::Action(_) = mv {
            child.progress[agent] += 1;
        }
        if child.pending.len() == self.plans.len() {
            return self.advance_step(&child);
        }
        child.mover = self.mover_of(&child);
        Ok(child)
    }

    /// Applies the committed step jointly and opens step `t + 1`.
    pub fn advance_step(&self, node: &GameNode) -> Result<GameNode, GameError> {
        if node.pending.len() != self.plans.len() {
            return Err(GameError::InvalidMove(format!(
                "step {} closed with {} of {} moves",
                node.time,
                node.pending.len(),
                self.plans.len()
            )));
        }
        let actions: Vec<_> = node
            .pending
            .iter()
            .filter_map(|&(agent, mv)| match mv {
                Move::Action(i) => Some(&self.plans[agent].actions[i]),
                Move::Empty => None,
            })
            .collect();
        let time = node.time + 1;
        if time > self.horizon {
            return Err(GameError::HorizonExceeded {
                step: time,
                horizon: self.horizon,
            });
        }
        let mut next = GameNode {
            state: joint_apply(&node.state, &actions)?,
            time,
            mover: None,
            pending: Vec::new(),
            progress: node.progress.clone(),
        };
        next.mover = self.mover_of(&next);
        Ok(next)
    }

    /// Per-agent move sequences of a root-to-terminal path given in tree
    /// level order.
    fn timelines(&self, path: &[Move]) -> Vec<Vec<Move>> {
        let n = self.plans.len();
        let mut lines = vec![Vec::with_capacity(path.len() / n.max(1)); n];
        for (level, &mv) in path.iter().enumerate() {
            lines[self.order[level % n]].push(mv);
        }
        lines
    }

    fn payoffs_of(&self, path: &[Move]) -> Vec<f64> {
        let n = self.plans.len();
        let mut last_step = vec![None; n];
        for (level, mv) in path.iter().enumerate() {
            if !mv.is_empty() {
                last_step[self.order[level % n]] = Some(level / n);
            }
        }
        (0..n)
            .map(|i| {
                let m = self.plans[i].len();
                let d = last_step[i].map_or(0, |t: usize| t + 1 - m);
                utility(self.benefits[i], d, &self.cfg)
            })
            .collect()
    }

    /// Builds the schedule profile of a complete path.
    pub fn profile_from_path(&self, path: &[Move]) -> ScheduleProfile {
        let schedules = self
            .timelines(path)
            .into_iter()
            .enumerate()
            .map(|(i, moves)| {
                let plan = self.plans[i];
                let d = delay(&moves, plan.len());
                AgentSchedule {
                    agent: plan.owner.clone(),
                    plan: plan.name.clone(),
                    actions: plan.actions.iter().map(|a| a.name().to_string()).collect(),
                    finish_time: if plan.is_empty() { 0 } else { plan.len() + d },
                    delay: d,
                    utility: utility(self.benefits[i], d, &self.cfg),
                    moves,
                }
            })
            .collect();
        ScheduleProfile {
            schedules,
            feasible: true,
        }
    }

    pub fn infeasible_profile(&self) -> ScheduleProfile {
        ScheduleProfile {
            schedules: self
                .plans
                .iter()
                .map(|plan| AgentSchedule {
                    agent: plan.owner.clone(),
                    plan: plan.name.clone(),
                    actions: plan.actions.iter().map(|a| a.name().to_string()).collect(),
                    moves: Vec::new(),
                    finish_time: 0,
                    delay: 0,
                    utility: self.cfg.infeasible_payoff,
                })
                .collect(),
            feasible: false,
        }
    }

    /// Backward induction in a single depth-first traversal.
    pub fn solve(&self, tie_break: TieBreak, rng: &mut ChaCha8Rng, budget: Option<u64>) -> Result<SolveResult, GameError> {
        let mut search = Search {
            game: self,
            tie_break,
            rng,
            budget,
            stats: TreeStats::default(),
            path: Vec::new(),
        };
        let best = search.backward(&self.root())?;
        let stats = search.stats;
        Ok(match best {
            Some(outcome) => SolveResult {
                profile: self.profile_from_path(&outcome.path),
                payoff_vector: outcome.payoffs,
                agent_order: self.order.clone(),
                tree_stats: stats,
            },
            None => SolveResult {
                profile: self.infeasible_profile(),
                payoff_vector: vec![self.cfg.infeasible_payoff; self.plans.len()],
                agent_order: self.order.clone(),
                tree_stats: stats,
            },
        })
    }

    /// Every valid schedule profile of the game, in depth-first order.
    pub fn enumerate_terminals(&self, budget: Option<u64>) -> Result<Vec<ScheduleProfile>, GameError> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        let mut nodes = 0u64;
        self.collect(&self.root(), &mut path, &mut nodes, budget, &mut out)?;
        Ok(out)
    }

    fn collect(
        &self,
        node: &GameNode,
        path: &mut Vec<Move>,
        nodes: &mut u64,
        budget: Option<u64>,
        out: &mut Vec<ScheduleProfile>,
    ) -> Result<(), GameError> {
        *nodes += 1;
        if let Some(b) = budget {
            if *nodes > b {
                return Err(GameError::BudgetExceeded(b));
            }
        }
        if self.is_terminal(node) {
            out.push(self.profile_from_path(path));
            return Ok(());
        }
        for mv in self.legal_moves(node) {
            let child = self.play(node, mv)?;
            path.push(mv);
            self.collect(&child, path, nodes, budget, out)?;
            path.pop();
        }
        Ok(())
    }
}

struct Outcome {
    payoffs: Vec<f64>,
    path: Vec<Move>,
}

struct Search<'g, 'a, 'r> {
    game: &'g InternalGame<'a>,
    tie_break: TieBreak,
    rng: &'r mut ChaCha8Rng,
    budget: Option<u64>,
    stats: TreeStats,
    path: Vec<Move>,
}

impl Search<'_, '_, '_> {
    fn backward(&mut self, node: &GameNode) -> Result<Option<Outcome>, GameError> {
        self.stats.nodes += 1;
        if let Some(b) = self.budget {
            if self.stats.nodes > b {
                return Err(GameError::BudgetExceeded(b));
            }
        }
        let Some(mover) = node.mover else {
            self.stats.leaves += 1;
            return Ok(Some(Outcome {
                payoffs: self.game.payoffs_of(&self.path),
                path: self.path.clone(),
            }));
        };
        let moves = self.game.legal_moves(node);
        if moves.is_empty() {
            self.stats.pruned += 1;
            return Ok(None);
        }

        let mut best: Option<Outcome> = None;
        let mut best_value = f64::NEG_INFINITY;
        for mv in moves {
            let child = self.game.play(node, mv)?;
            self.path.push(mv);
            let value = self.backward(&child)?;
            self.path.pop();
            let Some(value) = value else { continue };
            best_value = best_value.max(value.payoffs[mover]);
            best = match best {
                None => Some(value),
                Some(current) => {
                    let (new, old) = (value.payoffs[mover], current.payoffs[mover]);
                    let replace = new > old
                        || (new == old
                            && self.tie_break == TieBreak::Seeded
                            && self.rng.random_bool(0.5));
                    Some(if replace { value } else { current })
                }
            };
        }
        debug_assert!(best.as_ref().is_none_or(|b| b.payoffs[mover] == best_value));
        Ok(best)
    }
}

/// Move order used for one plan profile.
pub fn agent_order(n: usize, mode: AgentOrder, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if mode == AgentOrder::Seeded {
        order.shuffle(rng);
    }
    order
}

/// Solves the internal game of one plan profile (one plan per agent).
pub fn solve_internal(
    plans: &[&Plan],
    init: &State,
    cfg: &UtilityConfig,
    opts: &SolveOptions,
) -> Result<SolveResult, GameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let order = agent_order(plans.len(), opts.agent_order, &mut rng);
    InternalGame::new(plans, init, cfg, order).solve(opts.tie_break, &mut rng, opts.node_budget)
}

/// Brute-force listing of all valid schedule profiles of a plan profile.
pub fn enumerate_terminals(
    plans: &[&Plan],
    init: &State,
    cfg: &UtilityConfig,
    budget: Option<u64>,
) -> Result<Vec<ScheduleProfile>, GameError> {
    InternalGame::with_declared_order(plans, init, cfg).enumerate_terminals(budget)
}
