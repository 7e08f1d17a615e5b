//! Plain-text renderings of payoff matrices and joint schedules.

use std::fmt::Write as _;

use thiserror::Error;

use crate::equilibrium::{Cell, NormalFormGame};
use crate::schedule::{Move, ScheduleProfile};

/// Glyph printed for an empty move.
pub const EMPTY_GLYPH: &str = "·";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("cannot render the schedule of an infeasible profile")]
    Infeasible,
}

/// Bare integers when integral, one decimal place otherwise.
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.1}")
    }
}

/// `u_A,u_B (d_A,d_B)`, or `-inf,-inf` for an infeasible cell.
pub fn format_cell(cell: &Cell) -> String {
    if !cell.feasible {
        return vec!["-inf"; cell.payoffs.len()].join(",");
    }
    let payoffs: Vec<String> = cell.payoffs.iter().map(|&p| format_number(p)).collect();
    let delays: Vec<String> = cell.delays.iter().map(|d| d.to_string()).collect();
    format!("{} ({})", payoffs.join(","), delays.join(","))
}

fn width(s: &str) -> usize {
    s.chars().count()
}

fn pad(s: &str, w: usize) -> String {
    let mut out = s.to_string();
    out.extend(std::iter::repeat_n(' ', w.saturating_sub(width(s))));
    out
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| width(s)).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().zip(&widths).map(|(s, &w)| pad(s, w)).collect();
        let _ = writeln!(out, "{}", line.join(" | ").trim_end());
    }
    out
}

/// Payoff table; cells listed in `marked` get a trailing `*`.
///
/// Two-agent games are drawn as a grid with the first agent's plans as rows.
/// Other games are listed one profile per line.
pub fn render_matrix(game: &NormalFormGame, marked: &[Vec<usize>]) -> String {
    let text = |p: &[usize]| {
        let mut s = format_cell(game.cell(p));
        if marked.iter().any(|m| m == p) {
            s.push('*');
        }
        s
    };
    if game.num_agents() == 2 {
        let mut rows = Vec::with_capacity(game.strategies[0].len() + 1);
        let mut header = vec![format!("{} \\ {}", game.agents[0], game.agents[1])];
        header.extend(game.strategies[1].iter().cloned());
        rows.push(header);
        for (i, row_name) in game.strategies[0].iter().enumerate() {
            let mut row = vec![row_name.clone()];
            row.extend((0..game.strategies[1].len()).map(|j| text(&[i, j])));
            rows.push(row);
        }
        table(&rows)
    } else {
        let mut rows = vec![vec![game.agents.join(" / "), "payoffs (delays)".to_string()]];
        for p in game.profiles() {
            rows.push(vec![game.profile_names(&p).join(" / "), text(&p)]);
        }
        table(&rows)
    }
}

/// Gantt-style table: one row per agent, one column per time step.
pub fn render_schedule(profile: &ScheduleProfile) -> Result<String, RenderError> {
    if !profile.feasible {
        return Err(RenderError::Infeasible);
    }
    let steps = profile.steps();
    let mut rows = Vec::with_capacity(profile.schedules.len() + 1);
    let mut header = vec!["t".to_string()];
    header.extend((0..steps).map(|t| t.to_string()));
    rows.push(header);
    for s in &profile.schedules {
        let mut row = vec![format!("{} ({})", s.agent, s.plan)];
        row.extend(s.moves.iter().map(|&mv| match mv {
            Move::Action(_) => s.move_label(mv).to_string(),
            Move::Empty => EMPTY_GLYPH.to_string(),
        }));
        rows.push(row);
    }
    // Columns are separated by blanks rather than bars.
    let widths: Vec<usize> = (0..=steps)
        .map(|c| rows.iter().map(|r| width(&r[c])).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let label = pad(&row[0], widths[0]);
        let cells: Vec<String> = row[1..].iter().zip(&widths[1..]).map(|(s, &w)| pad(s, w)).collect();
        let _ = writeln!(out, "{label} | {}", cells.join(" ").trim_end());
    }
    Ok(out)
}
