#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use plangame::{parse_problem, Action, Move, NormalFormGame, Plan, Problem, ScheduleProfile, State, UtilityConfig};
use proptest::prelude::*;

pub fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

pub const SENTINEL: f64 = -1000.0;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> Problem {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    parse_problem(&text).unwrap()
}

pub type Table = Vec<Vec<Option<((f64, f64), (usize, usize))>>>;

/// Problem 1 normal form, payoffs and delays.
pub fn table2() -> Table {
    vec![
        vec![Some(((15.0, 16.0), (2, 2))), Some(((17.0, 7.0), (0, 2))), Some(((17.0, 9.0), (0, 0)))],
        vec![Some(((8.0, 16.0), (0, 2))), Some(((8.0, 7.0), (0, 2))), Some(((7.0, 9.0), (1, 0)))],
        vec![Some(((7.0, 18.0), (2, 0))), Some(((9.0, 9.0), (0, 0))), Some(((8.0, 9.0), (1, 0)))],
    ]
}

/// Problem 2 normal form, penalty 1.
pub fn table3() -> Table {
    vec![
        vec![None, Some(((15.0, 14.0), (3, 2))), Some(((18.0, 7.0), (0, 2))), Some(((17.0, 9.0), (1, 0)))],
        vec![Some(((14.0, 15.0), (2, 3))), Some(((14.0, 14.0), (2, 2))), Some(((16.0, 6.0), (0, 3))), Some(((16.0, 9.0), (0, 0)))],
        vec![Some(((8.0, 16.0), (0, 2))), Some(((8.0, 16.0), (0, 0))), Some(((8.0, 7.0), (0, 2))), Some(((8.0, 8.0), (0, 1)))],
        vec![Some(((7.0, 18.0), (2, 0))), Some(((6.0, 16.0), (3, 0))), Some(((9.0, 9.0), (0, 0))), Some(((8.0, 9.0), (1, 0)))],
    ]
}

/// Problem 2 normal form, penalty 3.5.
pub fn table4() -> Table {
    vec![
        vec![None, Some(((7.5, 9.0), (3, 2))), Some(((18.0, 2.0), (0, 2))), Some(((14.5, 9.0), (1, 0)))],
        vec![Some(((9.0, 7.5), (2, 3))), Some(((9.0, 9.0), (2, 2))), Some(((16.0, -1.5), (0, 3))), Some(((16.0, 9.0), (0, 0)))],
        vec![Some(((8.0, 11.0), (0, 2))), Some(((8.0, 16.0), (0, 0))), Some(((8.0, 2.0), (0, 2))), Some(((8.0, 5.5), (0, 1)))],
        vec![Some(((2.0, 18.0), (2, 0))), Some(((-1.5, 16.0), (3, 0))), Some(((9.0, 9.0), (0, 0))), Some(((5.5, 9.0), (1, 0)))],
    ]
}

/// Benefits of the Problem 2 plans: (A1..A4, B1..B4).
pub const PROBLEM2_BENEFITS: ([f64; 4], [f64; 4]) = ([18.0, 16.0, 8.0, 9.0], [18.0, 16.0, 9.0, 9.0]);

pub fn table_game(table: &Table) -> NormalFormGame {
    let rows: Vec<String> = (0..table.len()).map(|i| format!("A{}", i + 1)).collect();
    let cols: Vec<String> = (0..table[0].len()).map(|j| format!("B{}", j + 1)).collect();
    let r: Vec<&str> = rows.iter().map(String::as_str).collect();
    let c: Vec<&str> = cols.iter().map(String::as_str).collect();
    let payoffs: Vec<Vec<Option<(f64, f64)>>> =
        table.iter().map(|row| row.iter().map(|c| c.map(|(p, _)| p)).collect()).collect();
    NormalFormGame::bimatrix(["A", "B"], &r, &c, &payoffs, SENTINEL).unwrap()
}

pub fn bimatrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> NormalFormGame {
    let table: Table = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| Some(((p, q), (0, 0)))).collect())
        .collect();
    table_game(&table)
}

/// Exhaustive unilateral-deviation check over every cell of a 2-agent game.
pub fn brute_force_pure_nash(a: &[Vec<f64>], b: &[Vec<f64>], feasible: &[Vec<bool>]) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 0..a.len() {
        for j in 0..a[0].len() {
            if !feasible[i][j] {
                continue;
            }
            let a_ok = (0..a.len()).all(|k| a[k][j] <= a[i][j] + 1e-9);
            let b_ok = (0..a[0].len()).all(|k| b[i][k] <= b[i][j] + 1e-9);
            if a_ok && b_ok {
                out.insert((i, j));
            }
        }
    }
    out
}

fn names(set: &BTreeSet<plangame::Literal>) -> BTreeSet<String> {
    set.iter().map(|l| l.as_str().to_string()).collect()
}

/// One action deletes something the other needs or adds.
pub fn conflict(a: &Action, b: &Action) -> bool {
    let hits = |p: &Action, q: &Action| {
        let d = names(p.del());
        names(q.pre()).iter().chain(names(q.add()).iter()).any(|l| d.contains(l))
    };
    hits(a, b) || hits(b, a)
}

/// Validity of a joint schedule checked directly on string sets: every plan
/// played once in order, applicable real actions at every step, no
/// interfering pair within a step, no step without a real action.
pub fn validate_schedule(plans: &[&Plan], init: &State, profile: &ScheduleProfile) -> Result<(), String> {
    if !profile.feasible {
        return Err("profile is infeasible".into());
    }
    if profile.schedules.len() != plans.len() {
        return Err("wrong number of schedules".into());
    }
    let steps = profile.schedules.iter().map(|s| s.moves.len()).max().unwrap_or(0);
    if profile.schedules.iter().any(|s| s.moves.len() != steps) {
        return Err("schedules of unequal length".into());
    }
    for (plan, s) in plans.iter().zip(&profile.schedules) {
        let played: Vec<usize> = s
            .moves
            .iter()
            .filter_map(|m| match m {
                Move::Action(i) => Some(*i),
                Move::Empty => None,
            })
            .collect();
        if played != (0..plan.len()).collect::<Vec<_>>() {
            return Err(format!("plan {} played as {played:?}", plan.name));
        }
    }
    let mut state: BTreeSet<String> = names(init.literals());
    for t in 0..steps {
        let acts: Vec<&Action> = plans
            .iter()
            .zip(&profile.schedules)
            .filter_map(|(plan, s)| match s.moves[t] {
                Move::Action(i) => Some(&plan.actions[i]),
                Move::Empty => None,
            })
            .collect();
        if acts.is_empty() {
            return Err(format!("step {t} has no real action"));
        }
        for a in &acts {
            if !names(a.pre()).is_subset(&state) {
                return Err(format!("{} not applicable at step {t}", a.name()));
            }
        }
        for (x, a) in acts.iter().enumerate() {
            for b in &acts[x + 1..] {
                if conflict(a, b) {
                    return Err(format!("{} and {} conflict at step {t}", a.name(), b.name()));
                }
            }
        }
        let removed: BTreeSet<String> = acts.iter().flat_map(|a| names(a.del())).collect();
        let added: BTreeSet<String> = acts.iter().flat_map(|a| names(a.add())).collect();
        state = state.difference(&removed).cloned().collect();
        state.extend(added);
    }
    Ok(())
}

/// Reference backward induction on an explicitly materialised tree. Nodes
/// hold the per-agent timelines so far; the first mover option tried is
/// the real action and only a strictly better ⊥ replaces it.
pub struct Oracle<'a> {
    plans: Vec<&'a Plan>,
    init: BTreeSet<String>,
    cfg: UtilityConfig,
    order: Vec<usize>,
}

pub enum Tree {
    Leaf(Vec<Vec<bool>>),
    Dead,
    Choice { mover: usize, children: Vec<Tree> },
}

impl<'a> Oracle<'a> {
    pub fn new(plans: &[&'a Plan], init: &State, cfg: &UtilityConfig, order: Vec<usize>) -> Self {
        Oracle {
            plans: plans.to_vec(),
            init: names(init.literals()),
            cfg: *cfg,
            order,
        }
    }

    fn done(&self, lines: &[Vec<bool>]) -> Vec<usize> {
        lines.iter().map(|l| l.iter().filter(|&&x| x).count()).collect()
    }

    pub fn build(&self) -> Tree {
        let n = self.plans.len();
        self.expand(self.init.clone(), vec![Vec::new(); n], Vec::new())
    }

    /// `step` holds the (agent, real?) decisions already taken in the
    /// current step; `lines` the completed steps.
    fn expand(&self, state: BTreeSet<String>, lines: Vec<Vec<bool>>, step: Vec<(usize, bool)>) -> Tree {
        let n = self.plans.len();
        let mut progress = self.done(&lines);
        for &(agent, real) in &step {
            progress[agent] += usize::from(real);
        }
        if step.is_empty() && (0..n).all(|i| progress[i] == self.plans[i].len()) {
            return Tree::Leaf(lines);
        }
        if step.len() == n {
            let acts: Vec<&Action> = step
                .iter()
                .filter(|(_, real)| *real)
                .map(|&(agent, _)| &self.plans[agent].actions[progress[agent] - 1])
                .collect();
            let mut next = state.clone();
            for a in &acts {
                for l in names(a.del()) {
                    next.remove(&l);
                }
            }
            for a in &acts {
                next.extend(names(a.add()));
            }
            let mut lines = lines;
            for &(agent, real) in &step {
                lines[agent].push(real);
            }
            return self.expand(next, lines, Vec::new());
        }
        let mover = self.order[step.len()];
        let mut children = Vec::new();
        if progress[mover] < self.plans[mover].len() {
            let a = &self.plans[mover].actions[progress[mover]];
            let applicable = names(a.pre()).is_subset(&state);
            let compatible = step.iter().filter(|(_, real)| *real).all(|&(other, _)| {
                let b = &self.plans[other].actions[progress[other] - 1];
                !conflict(a, b)
            });
            if applicable && compatible {
                let mut s = step.clone();
                s.push((mover, true));
                children.push(self.expand(state.clone(), lines.clone(), s));
            }
        }
        let last = step.len() + 1 == n;
        if !(last && step.iter().all(|(_, real)| !real)) {
            let mut s = step;
            s.push((mover, false));
            children.push(self.expand(state, lines, s));
        }
        if children.is_empty() {
            Tree::Dead
        } else {
            Tree::Choice { mover, children }
        }
    }

    pub fn payoffs(&self, lines: &[Vec<bool>]) -> Vec<f64> {
        lines
            .iter()
            .zip(&self.plans)
            .map(|(line, plan)| {
                let m = plan.len();
                let beta = plan.goals.len() as f64 * self.cfg.goal_reward - m as f64;
                let finish = line.iter().rposition(|&x| x).map_or(0, |t| t + 1);
                let d = if m == 0 { 0 } else { finish - m };
                beta - self.cfg.delay_penalty * d as f64
            })
            .collect()
    }

    /// Backed-up value of a tree, asserting the choice rule at every node.
    pub fn value(&self, tree: &Tree) -> Option<(Vec<f64>, Vec<Vec<bool>>)> {
        match tree {
            Tree::Leaf(lines) => Some((self.payoffs(lines), lines.clone())),
            Tree::Dead => None,
            Tree::Choice { mover, children } => {
                let values: Vec<_> = children.iter().map(|c| self.value(c)).collect();
                let mut best: Option<(Vec<f64>, Vec<Vec<bool>>)> = None;
                for v in values.iter().flatten() {
                    if best.as_ref().is_none_or(|b| v.0[*mover] > b.0[*mover]) {
                        best = Some(v.clone());
                    }
                }
                if let Some(b) = &best {
                    let max = values.iter().flatten().map(|v| v.0[*mover]).fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(b.0[*mover], max);
                }
                best
            }
        }
    }

    pub fn leaves(&self, tree: &Tree, out: &mut Vec<Vec<Vec<bool>>>) {
        match tree {
            Tree::Leaf(lines) => out.push(lines.clone()),
            Tree::Dead => {}
            Tree::Choice { children, .. } => children.iter().for_each(|c| self.leaves(c, out)),
        }
    }
}

/// Shape of a schedule profile: per agent, real-or-empty per step.
pub fn shape_of(profile: &ScheduleProfile) -> Vec<Vec<bool>> {
    profile
        .schedules
        .iter()
        .map(|s| s.moves.iter().map(|m| !m.is_empty()).collect())
        .collect()
}

pub const UNIVERSE: [&str; 4] = ["p", "q", "r", "s"];

pub fn arb_literals() -> impl Strategy<Value = Vec<&'static str>> {
    proptest::sample::subsequence(UNIVERSE.to_vec(), 0..=UNIVERSE.len())
}

pub fn arb_action(name: String) -> impl Strategy<Value = Action> {
    (arb_literals(), arb_literals(), arb_literals()).prop_map(move |(pre, add, del)| {
        let del: Vec<&str> = del.into_iter().filter(|l| !add.contains(l)).collect();
        Action::from_symbols(&name, &pre, &add, &del).unwrap()
    })
}

pub fn arb_plan(owner: &'static str, max_len: usize) -> impl Strategy<Value = Plan> {
    (0..=max_len, 0..=2usize).prop_flat_map(move |(len, goals)| {
        let actions: Vec<_> = (0..len).map(|i| arb_action(format!("{}{}", owner.to_lowercase(), i + 1))).collect();
        actions.prop_map(move |actions| Plan::new(format!("{owner}1"), owner, actions, (0..goals).map(|g| format!("g{g}"))))
    })
}

pub fn arb_state() -> impl Strategy<Value = State> {
    arb_literals().prop_map(|l| State::from_symbols(l).unwrap())
}
