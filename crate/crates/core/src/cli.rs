//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 no equilibrium found,
//! 3 an equilibrium failed re-verification.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::equilibrium::{build_matrix, verify_equilibrium, StrategyProfile, TOLERANCE};
use crate::nfg::export_nfg;
use crate::problem::{parse_problem, Problem};
use crate::render::{format_number, render_matrix, render_schedule};
use crate::report::{build_report, render_report, SolutionReport};
use crate::schedule::{derive_seed, solve_internal, AgentOrder, TieBreak};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_EQUILIBRIUM: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "plangame", version, about = "Equilibrium schedules for competing agent plans")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the payoff matrix and report every equilibrium.
    Solve(RunConfig),
    /// Build and print the payoff matrix only.
    Matrix(RunConfig),
    /// Solve the internal game of a single plan profile.
    Spe {
        #[command(flatten)]
        run: RunConfig,
        /// Plan selection, one `AGENT=PLAN` per agent.
        #[arg(long = "plan", value_name = "AGENT=PLAN", required = true)]
        plans: Vec<String>,
    },
    /// Write the payoff matrix as a strategic-form `.nfg` file.
    Export(RunConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Seeded,
    Declared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieBreakArg {
    ActionFirst,
    Seeded,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Problem file.
    pub input: PathBuf,
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long = "goal-reward")]
    pub goal_reward: Option<f64>,
    /// Payoff used for profiles without a valid joint schedule.
    #[arg(long, allow_hyphen_values = true)]
    pub sentinel: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "agent-order", value_enum)]
    pub agent_order: Option<OrderArg>,
    #[arg(long = "tie-break", value_enum)]
    pub tie_break: Option<TieBreakArg>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
    /// Re-check every reported equilibrium.
    #[arg(long)]
    pub verify: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn load(run: &RunConfig) -> Result<Problem, Failure> {
    let text = std::fs::read_to_string(&run.input)
        .map_err(|e| Failure::input(format!("{}: {e}", run.input.display())))?;
    let mut problem = parse_problem(&text).map_err(|e| Failure::input(format!("{}: {e}", run.input.display())))?;
    let cfg = &mut problem.config;
    if let Some(p) = run.penalty {
        cfg.utility.delay_penalty = p;
    }
    if let Some(r) = run.goal_reward {
        cfg.utility.goal_reward = r;
    }
    if let Some(s) = run.sentinel {
        cfg.utility.infeasible_payoff = s;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(o) = run.agent_order {
        cfg.agent_order = match o {
            OrderArg::Seeded => AgentOrder::Seeded,
            OrderArg::Declared => AgentOrder::Declared,
        };
    }
    if let Some(t) = run.tie_break {
        cfg.tie_break = match t {
            TieBreakArg::ActionFirst => TieBreak::ActionFirst,
            TieBreakArg::Seeded => TieBreak::Seeded,
        };
    }
    problem
        .validate_config()
        .map_err(|e| Failure::input(format!("{}: {e}", run.input.display())))?;
    Ok(problem)
}

fn emit(run: &RunConfig, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &run.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

fn verify_report(report: &SolutionReport) -> Result<(), Failure> {
    let game = &report.matrix;
    let pure = report.pure_equilibria.iter().map(|e| StrategyProfile::Pure(e.cell.clone()));
    let mixed = report.mixed_equilibria.iter().cloned().map(StrategyProfile::Mixed);
    for profile in pure.chain(mixed) {
        if !verify_equilibrium(game, &profile, TOLERANCE) {
            return Err(Failure {
                code: EXIT_VERIFY,
                message: format!("verification failed for {profile:?}"),
            });
        }
    }
    Ok(())
}

fn cmd_solve(run: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let problem = load(run)?;
    let built = build_matrix(&problem, &problem.config.solve_options()).map_err(|e| Failure::input(e.to_string()))?;
    let report = build_report(&problem, &built);
    for w in &report.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    if run.verify {
        verify_report(&report)?;
    }
    let text = match run.format {
        OutputFormat::Text => render_report(&report),
        OutputFormat::Structured => report.to_json() + "\n",
    };
    emit(run, &text, stdout)?;
    Ok(if report.equilibrium_count() > 0 {
        EXIT_OK
    } else {
        EXIT_NO_EQUILIBRIUM
    })
}

fn cmd_matrix(run: &RunConfig, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let problem = load(run)?;
    let built = build_matrix(&problem, &problem.config.solve_options()).map_err(|e| Failure::input(e.to_string()))?;
    let text = match run.format {
        OutputFormat::Text => render_matrix(&built.game, &[]),
        OutputFormat::Structured => serde_json::to_string_pretty(&built.game).expect("games serialize") + "\n",
    };
    emit(run, &text, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_spe(run: &RunConfig, selection: &[String], stdout: &mut dyn Write) -> Result<i32, Failure> {
    let problem = load(run)?;
    let mut chosen: Vec<Option<usize>> = vec![None; problem.agents.len()];
    for item in selection {
        let (agent_name, plan_name) = item
            .split_once('=')
            .ok_or_else(|| Failure::input(format!("expected AGENT=PLAN, got `{item}`")))?;
        let (ai, agent) = problem.agent(agent_name).ok_or_else(|| {
            let names: Vec<&str> = problem.agents.iter().map(|a| a.name.as_str()).collect();
            Failure::input(format!("unknown agent `{agent_name}`; agents: {}", names.join(", ")))
        })?;
        let (pi, _) = agent.plan(plan_name).ok_or_else(|| {
            let names: Vec<&str> = agent.plans.iter().map(|p| p.name.as_str()).collect();
            Failure::input(format!(
                "unknown plan `{plan_name}` for agent `{agent_name}`; plans: {}",
                names.join(", ")
            ))
        })?;
        chosen[ai] = Some(pi);
    }
    let mut profile = Vec::with_capacity(chosen.len());
    for (agent, c) in problem.agents.iter().zip(&chosen) {
        match c {
            Some(i) => profile.push(*i),
            None => return Err(Failure::input(format!("no plan selected for agent `{}`", agent.name))),
        }
    }

    // Same per-cell seed as the matrix build, so both agree.
    let shape: Vec<usize> = problem.agents.iter().map(|a| a.plans.len()).collect();
    let index = profile.iter().zip(&shape).fold(0, |acc, (&s, &n)| acc * n + s);
    let mut opts = problem.config.solve_options();
    opts.seed = derive_seed(opts.seed, index as u64);
    let plans: Vec<_> = problem.agents.iter().zip(&profile).map(|(a, &i)| &a.plans[i]).collect();
    let result = solve_internal(&plans, &problem.init, &problem.config.utility, &opts)
        .map_err(|e| Failure::input(e.to_string()))?;

    let text = match run.format {
        OutputFormat::Structured => serde_json::to_string_pretty(&result).expect("results serialize") + "\n",
        OutputFormat::Text => {
            let names = |f: &dyn Fn(usize) -> String| {
                problem
                    .agents
                    .iter()
                    .enumerate()
                    .map(|(i, a)| format!("{}={}", a.name, f(i)))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let mut out = String::new();
            out.push_str(&format!("profile: {}\n", names(&|i| plans[i].name.clone())));
            let order: Vec<&str> = result.agent_order.iter().map(|&i| problem.agents[i].name.as_str()).collect();
            out.push_str(&format!("agent order: {}\n", order.join(", ")));
            out.push_str(&format!(
                "verdict: {}\n",
                if result.feasible() { "feasible" } else { "infeasible" }
            ));
            out.push_str(&format!("payoffs: {}\n", names(&|i| format_number(result.payoff_vector[i]))));
            if result.feasible() {
                let delays = result.profile.delays();
                out.push_str(&format!("delays: {}\n", names(&|i| delays[i].to_string())));
            }
            let s = result.tree_stats;
            out.push_str(&format!(
                "tree: {} nodes, {} terminals, {} pruned\n",
                s.nodes, s.leaves, s.pruned
            ));
            if let Ok(gantt) = render_schedule(&result.profile) {
                out.push('\n');
                out.push_str(&gantt);
            }
            out
        }
    };
    emit(run, &text, stdout)?;
    Ok(EXIT_OK)
}

fn cmd_export(run: &RunConfig) -> Result<i32, Failure> {
    let problem = load(run)?;
    let built = build_matrix(&problem, &problem.config.solve_options()).map_err(|e| Failure::input(e.to_string()))?;
    let title = format!("{} (seed {})", problem.name, problem.config.seed);
    let text = export_nfg(&built.game, &title);
    let path = run.output.clone().unwrap_or_else(|| default_nfg_path(&run.input));
    std::fs::write(&path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(EXIT_OK)
}

fn default_nfg_path(input: &Path) -> PathBuf {
    input.with_extension("nfg")
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(run) => cmd_solve(run, stdout, stderr),
        Command::Matrix(run) => cmd_matrix(run, stdout),
        Command::Spe { run, plans } => cmd_spe(run, plans, stdout),
        Command::Export(run) => cmd_export(run),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
