//! The general game: normal-form payoff tensor over plan profiles, Nash
//! equilibria, Pareto front and social welfare.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::Problem;
use crate::schedule::{derive_seed, solve_internal, GameError, SolveOptions, SolveResult};

/// Tolerance for probability sums, indifference and best-response slack.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("mixed equilibria are computed for 2-agent games only (got {0} agents)")]
    NotTwoPlayer(usize),
    #[error("agent `{0}` has no strategies")]
    NoStrategies(String),
    #[error("payoff tensor has {got} cells, expected {expected}")]
    Shape { expected: usize, got: usize },
}

/// Outcome of one plan profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub payoffs: Vec<f64>,
    pub delays: Vec<usize>,
    pub feasible: bool,
    /// Set when the internal game failed for this profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Payoff tensor stored row-major: the last agent's strategy varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormGame {
    pub agents: Vec<String>,
    pub strategies: Vec<Vec<String>>,
    pub cells: Vec<Cell>,
}

impl NormalFormGame {
    pub fn new(agents: Vec<String>, strategies: Vec<Vec<String>>, cells: Vec<Cell>) -> Result<Self, EquilibriumError> {
        for (agent, s) in agents.iter().zip(&strategies) {
            if s.is_empty() {
                return Err(EquilibriumError::NoStrategies(agent.clone()));
            }
        }
        let expected: usize = strategies.iter().map(Vec::len).product();
        if cells.len() != expected {
            return Err(EquilibriumError::Shape {
                expected,
                got: cells.len(),
            });
        }
        Ok(NormalFormGame {
            agents,
            strategies,
            cells,
        })
    }

    /// Two-agent game from payoff rows; `None` marks an infeasible cell,
    /// which receives `sentinel` for both agents.
    pub fn bimatrix(
        agents: [&str; 2],
        rows: &[&str],
        cols: &[&str],
        payoffs: &[Vec<Option<(f64, f64)>>],
        sentinel: f64,
    ) -> Result<Self, EquilibriumError> {
        let cells = payoffs
            .iter()
            .flatten()
            .map(|cell| match cell {
                Some((a, b)) => Cell {
                    payoffs: vec![*a, *b],
                    delays: vec![0, 0],
                    feasible: true,
                    error: None,
                },
                None => Cell {
                    payoffs: vec![sentinel, sentinel],
                    delays: vec![0, 0],
                    feasible: false,
                    error: None,
                },
            })
            .collect();
        NormalFormGame::new(
            agents.iter().map(|s| s.to_string()).collect(),
            vec![
                rows.iter().map(|s| s.to_string()).collect(),
                cols.iter().map(|s| s.to_string()).collect(),
            ],
            cells,
        )
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.strategies.iter().map(Vec::len).collect()
    }

    pub fn index(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.strategies)
            .fold(0, |acc, (&s, list)| acc * list.len() + s)
    }

    pub fn profile(&self, mut index: usize) -> Vec<usize> {
        let mut profile = vec![0; self.strategies.len()];
        for (slot, list) in profile.iter_mut().zip(&self.strategies).rev() {
            *slot = index % list.len();
            index /= list.len();
        }
        profile
    }

    pub fn cell(&self, profile: &[usize]) -> &Cell {
        &self.cells[self.index(profile)]
    }

    pub fn payoff(&self, profile: &[usize], agent: usize) -> f64 {
        self.cell(profile).payoffs[agent]
    }

    pub fn profiles(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.cells.len()).map(|i| self.profile(i))
    }

    pub fn profile_names(&self, profile: &[usize]) -> Vec<String> {
        profile
            .iter()
            .zip(&self.strategies)
            .map(|(&s, list)| list[s].clone())
            .collect()
    }

    /// Applies `payoff -> scale[i] * payoff + shift[i]` per agent.
    pub fn affine(&self, scale: &[f64], shift: &[f64]) -> NormalFormGame {
        let mut out = self.clone();
        for cell in &mut out.cells {
            for (i, p) in cell.payoffs.iter_mut().enumerate() {
                *p = scale[i] * *p + shift[i];
            }
        }
        out
    }

    /// Payoff matrix of one agent in a 2-agent game (rows: first agent).
    fn matrix_of(&self, agent: usize) -> DMatrix<f64> {
        let (r, c) = (self.strategies[0].len(), self.strategies[1].len());
        DMatrix::from_fn(r, c, |i, j| self.payoff(&[i, j], agent))
    }
}

/// Normal-form game of a problem together with the per-cell internal results.
#[derive(Debug, Clone)]
pub struct BuiltMatrix {
    pub game: NormalFormGame,
    pub results: Vec<Result<SolveResult, GameError>>,
}

fn solve_cell(problem: &Problem, shape: &[usize], index: usize, opts: &SolveOptions) -> Result<SolveResult, GameError> {
    let mut rem = index;
    let mut choice = vec![0; shape.len()];
    for (slot, &len) in choice.iter_mut().zip(shape).rev() {
        *slot = rem % len;
        rem /= len;
    }
    let plans: Vec<_> = problem
        .agents
        .iter()
        .zip(&choice)
        .map(|(agent, &k)| &agent.plans[k])
        .collect();
    let opts = SolveOptions {
        seed: derive_seed(opts.seed, index as u64),
        ..opts.clone()
    };
    solve_internal(&plans, &problem.init, &problem.config.utility, &opts)
}

fn assemble(problem: &Problem, results: Vec<Result<SolveResult, GameError>>) -> Result<BuiltMatrix, EquilibriumError> {
    let n = problem.agents.len();
    let sentinel = problem.config.utility.infeasible_payoff;
    let cells = results
        .iter()
        .map(|r| match r {
            Ok(res) => Cell {
                payoffs: res.payoff_vector.clone(),
                delays: res.profile.delays(),
                feasible: res.feasible(),
                error: None,
            },
            Err(e) => Cell {
                payoffs: vec![sentinel; n],
                delays: vec![0; n],
                feasible: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let game = NormalFormGame::new(
        problem.agents.iter().map(|a| a.name.clone()).collect(),
        problem
            .agents
            .iter()
            .map(|a| a.plans.iter().map(|p| p.name.clone()).collect())
            .collect(),
        cells,
    )?;
    Ok(BuiltMatrix { game, results })
}

fn check_strategies(problem: &Problem) -> Result<Vec<usize>, EquilibriumError> {
    problem
        .agents
        .iter()
        .map(|a| {
            if a.plans.is_empty() {
                Err(EquilibriumError::NoStrategies(a.name.clone()))
            } else {
                Ok(a.plans.len())
            }
        })
        .collect()
}

/// Runs the internal game on every plan profile, one after another.
pub fn build_matrix_sequential(problem: &Problem, opts: &SolveOptions) -> Result<BuiltMatrix, EquilibriumError> {
    let shape = check_strategies(problem)?;
    let total: usize = shape.iter().product();
    let results = (0..total).map(|i| solve_cell(problem, &shape, i, opts)).collect();
    assemble(problem, results)
}

/// Runs the internal game on every plan profile on the rayon pool.
#[cfg(feature = "parallel")]
pub fn build_matrix_parallel(problem: &Problem, opts: &SolveOptions) -> Result<BuiltMatrix, EquilibriumError> {
    use rayon::prelude::*;

    let shape = check_strategies(problem)?;
    let total: usize = shape.iter().product();
    let results = (0..total)
        .into_par_iter()
        .map(|i| solve_cell(problem, &shape, i, opts))
        .collect();
    assemble(problem, results)
}

/// Builds the normal-form game of a problem. Cells are independent, so with
/// the `parallel` feature they are solved concurrently; results do not
/// depend on scheduling because every cell derives its own seed.
pub fn build_matrix(problem: &Problem, opts: &SolveOptions) -> Result<BuiltMatrix, EquilibriumError> {
    #[cfg(feature = "parallel")]
    {
        build_matrix_parallel(problem, opts)
    }
    #[cfg(not(feature = "parallel"))]
    {
        build_matrix_sequential(problem, opts)
    }
}

/// Largest gain agent `agent` can get by deviating unilaterally from `profile`.
fn best_deviation_gain(game: &NormalFormGame, profile: &[usize], agent: usize) -> f64 {
    let current = game.payoff(profile, agent);
    let mut alt = profile.to_vec();
    (0..game.strategies[agent].len())
        .map(|s| {
            alt[agent] = s;
            game.payoff(&alt, agent) - current
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// All feasible cells from which no agent gains by a unilateral deviation.
pub fn pure_nash(game: &NormalFormGame) -> Vec<Vec<usize>> {
    game.profiles()
        .filter(|p| game.cell(p).feasible)
        .filter(|p| (0..game.num_agents()).all(|i| best_deviation_gain(game, p, i) <= TOLERANCE))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile {
    /// Per agent, a probability per strategy.
    pub probabilities: Vec<Vec<f64>>,
    /// Per agent, the strategies played with positive probability.
    pub support: Vec<Vec<usize>>,
    /// Expected payoff per agent.
    pub payoffs: Vec<f64>,
}

impl MixedProfile {
    fn from_probabilities(game: &NormalFormGame, probabilities: Vec<Vec<f64>>) -> Self {
        let support = probabilities
            .iter()
            .map(|p| p.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(i, _)| i).collect())
            .collect();
        let payoffs = (0..game.num_agents())
            .map(|i| expected_payoff(game, &probabilities, i, None))
            .collect();
        MixedProfile {
            probabilities,
            support,
            payoffs,
        }
    }

    pub fn is_pure(&self) -> bool {
        self.support.iter().all(|s| s.len() == 1)
    }
}

/// A support pair whose indifference system is singular but admits an
/// equilibrium: the equilibria on it are not isolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateSupport {
    pub support: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MixedNash {
    pub equilibria: Vec<MixedProfile>,
    pub degenerate: Vec<DegenerateSupport>,
}

/// Expected payoff of `agent` under independent mixing. With `pure` set,
/// the agent's own mix is replaced by that pure strategy.
pub fn expected_payoff(game: &NormalFormGame, probabilities: &[Vec<f64>], agent: usize, pure: Option<usize>) -> f64 {
    game.profiles()
        .map(|p| {
            let weight: f64 = p
                .iter()
                .enumerate()
                .map(|(i, &s)| match (i == agent, pure) {
                    (true, Some(own)) => f64::from(u8::from(s == own)),
                    _ => probabilities[i][s],
                })
                .product();
            if weight == 0.0 {
                0.0
            } else {
                weight * game.payoff(&p, agent)
            }
        })
        .sum()
}

enum Indifference {
    Solved(Vec<f64>),
    Singular(Vec<f64>),
    Inconsistent,
}

/// Mix over `cols` that makes the row player indifferent across `rows` in
/// `payoff` (row player's matrix). Returns the column mix, with the common
/// value appended.
fn indifference(payoff: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Indifference {
    let k = rows.len();
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (r, &i) in rows.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            m[(r, c)] = payoff[(i, j)];
        }
        m[(r, k)] = -1.0;
    }
    for c in 0..k {
        m[(k, c)] = 1.0;
    }
    rhs[k] = 1.0;

    let svd = m.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    let scale = max_sv.max(1.0);
    let Ok(sol) = svd.solve(&rhs, 1e-12 * scale) else {
        return Indifference::Inconsistent;
    };
    let residual = (&m * &sol - &rhs).amax();
    if residual > 1e-9 * scale {
        return Indifference::Inconsistent;
    }
    let sol: Vec<f64> = sol.iter().copied().collect();
    if min_sv <= 1e-12 * scale {
        Indifference::Singular(sol)
    } else {
        Indifference::Solved(sol)
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u64..1 << n)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

fn spread(n: usize, support: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; n];
    for (&i, &w) in support.iter().zip(weights) {
        p[i] = w;
    }
    p
}

/// Best payoff the row player of `payoff` gets against the column mix `mix`.
fn max_payoff(payoff: &DMatrix<f64>, mix: &[f64]) -> f64 {
    (0..payoff.nrows())
        .map(|i| (0..payoff.ncols()).map(|j| payoff[(i, j)] * mix[j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn clamp_normalize(p: &mut [f64], tolerance: f64) {
    for x in p.iter_mut() {
        if *x < tolerance {
            *x = 0.0;
        }
    }
    let sum: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= sum;
    }
}

/// Support enumeration over equal-size support pairs of a 2-agent game.
pub fn mixed_nash_2p(game: &NormalFormGame, tolerance: f64) -> Result<MixedNash, EquilibriumError> {
    if game.num_agents() != 2 {
        return Err(EquilibriumError::NotTwoPlayer(game.num_agents()));
    }
    let a = game.matrix_of(0);
    let b = game.matrix_of(1);
    let bt = b.transpose();
    let (rows, cols) = (a.nrows(), a.ncols());
    let mut out = MixedNash::default();

    for k in 1..=rows.min(cols) {
        for support_a in subsets(rows, k) {
            for support_b in subsets(cols, k) {
                if k == 1 && !game.cell(&[support_a[0], support_b[0]]).feasible {
                    continue;
                }
                // The column mix makes the row player indifferent, and
                // vice versa.
                let col_sol = indifference(&a, &support_a, &support_b);
                let row_sol = indifference(&bt, &support_b, &support_a);
                let (col_sol, row_sol, singular) = match (col_sol, row_sol) {
                    (Indifference::Inconsistent, _) | (_, Indifference::Inconsistent) => continue,
                    (Indifference::Solved(c), Indifference::Solved(r)) => (c, r, false),
                    (Indifference::Solved(c) | Indifference::Singular(c), Indifference::Singular(r))
                    | (Indifference::Singular(c), Indifference::Solved(r)) => (c, r, true),
                };
                let y = spread(cols, &support_b, &col_sol[..k]);
                let x = spread(rows, &support_a, &row_sol[..k]);
                let (v, w) = (col_sol[k], row_sol[k]);
                if x.iter().chain(&y).any(|&p| p < -tolerance) {
                    continue;
                }
                if max_payoff(&a, &y) > v + tolerance || max_payoff(&bt, &x) > w + tolerance {
                    continue;
                }
                if singular {
                    out.degenerate.push(DegenerateSupport {
                        support: vec![support_a.clone(), support_b.clone()],
                    });
                    continue;
                }
                let (mut x, mut y) = (x, y);
                clamp_normalize(&mut x, tolerance);
                clamp_normalize(&mut y, tolerance);
                let candidate = MixedProfile::from_probabilities(game, vec![x, y]);
                let duplicate = out.equilibria.iter().any(|e| {
                    e.probabilities
                        .iter()
                        .flatten()
                        .zip(candidate.probabilities.iter().flatten())
                        .all(|(p, q)| (p - q).abs() <= tolerance)
                });
                if !duplicate {
                    out.equilibria.push(candidate);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyProfile {
    Pure(Vec<usize>),
    Mixed(MixedProfile),
}

/// Independent deviation check of a pure cell or a mixed profile.
pub fn verify_equilibrium(game: &NormalFormGame, profile: &StrategyProfile, tolerance: f64) -> bool {
    match profile {
        StrategyProfile::Pure(cell) => {
            cell.len() == game.num_agents()
                && cell.iter().zip(game.shape()).all(|(&s, len)| s < len)
                && (0..game.num_agents()).all(|i| best_deviation_gain(game, cell, i) <= tolerance)
        }
        StrategyProfile::Mixed(mixed) => {
            let probs = &mixed.probabilities;
            if probs.len() != game.num_agents() {
                return false;
            }
            for (i, p) in probs.iter().enumerate() {
                if p.len() != game.strategies[i].len()
                    || p.iter().any(|&x| x < -tolerance)
                    || (p.iter().sum::<f64>() - 1.0).abs() > tolerance
                {
                    return false;
                }
                let value = expected_payoff(game, probs, i, None);
                for (s, &ps) in p.iter().enumerate() {
                    let deviation = expected_payoff(game, probs, i, Some(s));
                    if deviation > value + tolerance {
                        return false;
                    }
                    if ps > tolerance && (deviation - value).abs() > tolerance {
                        return false;
                    }
                }
            }
            true
        }
    }
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Feasible cells not Pareto-dominated by another feasible cell.
pub fn pareto_front(game: &NormalFormGame) -> Vec<Vec<usize>> {
    let feasible: Vec<&Cell> = game.cells.iter().filter(|c| c.feasible).collect();
    game.profiles()
        .filter(|p| {
            let cell = game.cell(p);
            cell.feasible && !feasible.iter().any(|other| dominates(&other.payoffs, &cell.payoffs))
        })
        .collect()
}

pub fn welfare(cell: &Cell) -> f64 {
    cell.payoffs.iter().sum()
}

/// Feasible cells with the largest payoff sum, ties included.
pub fn max_welfare(game: &NormalFormGame) -> Vec<Vec<usize>> {
    let best = game
        .cells
        .iter()
        .filter(|c| c.feasible)
        .map(welfare)
        .fold(f64::NEG_INFINITY, f64::max);
    game.profiles()
        .filter(|p| {
            let cell = game.cell(p);
            cell.feasible && (welfare(cell) - best).abs() <= TOLERANCE
        })
        .collect()
}
