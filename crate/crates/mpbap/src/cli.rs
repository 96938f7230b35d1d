//! Command line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success; for `solve`, an optimal or time-limited feasible plan |
//! | 1 | I/O, format or solver error |
//! | 2 | usage error |
//! | 3 | `solve`: the instance is infeasible |
//! | 4 | `solve`: time limit reached without any feasible plan |

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mpbap_core::game::{analyze, carriers, epm, shapley, CoalitionGame, MAX_PLAYERS};
use mpbap_core::graph::VoyageGraph;
use mpbap_core::model::{generate_instance, GeneratorParams, Instance, WindowMode};
use mpbap_core::oracle::{time_root_bounds, OracleCaps};
use mpbap_core::search::{solve, CutPolicy, SolveOptions, SolveStatus};
use mpbap_core::Clock;
use serde::Serialize;

use crate::io::{self, GameReportFile, ReportFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_TIMEOUT: i32 = 4;

/// Most carriers `game` accepts when solving coalitions.
pub const MAX_GAME_CARRIERS: usize = 6;

/// Argument values clap cannot check on its own.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Seconds since construction.
#[derive(Clone, Copy, Debug)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Parser, Debug)]
#[command(name = "mpbap", version, about = "Multi-port berth allocation with speed optimization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a seeded N-B-P-TW instance.
    Gen(GenArgs),
    /// Solve an instance and write the report and berth plan.
    Solve(SolveArgs),
    /// Cost allocation among the carriers of an instance.
    Game(GameArgs),
    /// Graph size and root bound timings: column generation against the
    /// full arc-flow LP.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tw {
    Tight,
    Loose,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub ships: usize,
    /// Identical berths per port.
    #[arg(long)]
    pub berths: usize,
    #[arg(long)]
    pub ports: usize,
    #[arg(long, value_enum)]
    pub tw: Tw,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; defaults to `<descriptor>-<seed>.json`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Cuts {
    None,
    Root,
    All,
}

impl From<Cuts> for CutPolicy {
    fn from(c: Cuts) -> Self {
        match c {
            Cuts::None => CutPolicy::None,
            Cuts::Root => CutPolicy::Root,
            Cuts::All => CutPolicy::All,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Time limit in seconds.
    #[arg(long, default_value_t = 300.0)]
    pub time_limit: f64,
    #[arg(long, value_enum, default_value_t = Cuts::Root)]
    pub cuts: Cuts,
    /// Share of the time limit granted to the final restricted MIP.
    #[arg(long, default_value_t = 0.1)]
    pub final_mip: f64,
}

impl SolverArgs {
    pub fn options(&self) -> Result<SolveOptions> {
        if !(self.time_limit > 0.0) {
            return Err(usage("--time-limit must be positive"));
        }
        if !(self.final_mip > 0.0 && self.final_mip < 1.0) {
            return Err(usage("--final-mip must lie strictly between 0 and 1"));
        }
        Ok(SolveOptions {
            cut_policy: self.cuts.into(),
            time_limit: self.time_limit,
            final_mip_fraction: self.final_mip,
            ..SolveOptions::default()
        })
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Plan CSV file.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    pub timings: bool,
    #[arg(long, short)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct GameArgs {
    /// Instance whose carriers are the players.
    #[arg(required_unless_present = "game_values", conflicts_with = "game_values")]
    pub instance: Option<PathBuf>,
    /// Coalition values file; skips all scheduling.
    #[arg(long)]
    pub game_values: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Priority number per carrier in ascending carrier id; lower goes
    /// first. Defaults to 1, 2, 3, ...
    #[arg(long, value_delimiter = ',')]
    pub priority: Option<Vec<u32>>,
    /// Carrier id per ship, replacing the instance's assignment.
    #[arg(long, value_delimiter = ',')]
    pub carriers: Option<Vec<usize>>,
    /// Factor applied to every berth window length before scheduling.
    #[arg(long, default_value_t = 1.2)]
    pub window_factor: f64,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, short)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    pub instance: PathBuf,
    /// Skip the timing of the two root bounds.
    #[arg(long)]
    pub no_timing: bool,
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn generator_params(args: &GenArgs) -> GeneratorParams {
    GeneratorParams {
        ships: args.ships,
        berths_per_port: args.berths,
        ports: args.ports,
        windows: match args.tw {
            Tw::Tight => WindowMode::Tight,
            Tw::Loose => WindowMode::Loose,
        },
        seed: args.seed,
    }
}

/// Writes the instance and returns its descriptor and path.
pub fn cmd_gen(args: &GenArgs) -> Result<(String, PathBuf)> {
    let instance = generate_instance(generator_params(args)).map_err(|e| usage(e.to_string()))?;
    let path = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}-{}.json", instance.descriptor, args.seed)));
    io::write_instance(&path, &instance)?;
    Ok((instance.descriptor, path))
}

pub fn cmd_solve(args: &SolveArgs, clock: &dyn Clock) -> Result<SolveStatus> {
    let options = args.solver.options()?;
    let instance = io::read_instance(&args.instance)?;
    let out = solve(&instance, &options, clock)?;
    let r = &out.report;
    if args.verbose {
        eprintln!(
            "{}: {:?} objective {:?} bound {:.2} nodes {} columns {} cuts {}",
            instance.descriptor, r.status, r.objective, r.lower_bound, r.nodes, r.columns, r.cuts
        );
    }
    let report = ReportFile::new(&instance.descriptor, &options, r, args.timings);
    emit(args.report.as_deref(), &io::to_json(&report))?;
    if let Some(path) = &args.plan {
        let plan = out.plan.clone().unwrap_or_default();
        io::write_plan(path, &plan)?;
    }
    Ok(r.status)
}

fn default_priority(players: usize) -> Vec<u32> {
    (1..=players as u32).collect()
}

pub fn cmd_game(args: &GameArgs, clock: &dyn Clock) -> Result<GameReportFile> {
    let report = match (&args.game_values, &args.instance) {
        (Some(path), _) => {
            let (players, values) = io::read_game_values(path)?;
            let game = CoalitionGame::new(players, values.clone())?;
            let sh = shapley(&game);
            let e = epm(&game).map_err(|e| e.to_string());
            GameReportFile::from_values(&values, &sh, e.as_ref().map_err(Clone::clone), &game.superadditivity_violations(1e-6))
        }
        (None, Some(path)) => {
            let options = args.solver.options()?;
            if !(args.window_factor >= 1.0 && args.window_factor.is_finite()) {
                return Err(usage("--window-factor must be at least 1"));
            }
            let mut instance = io::read_instance(path)?;
            if let Some(c) = &args.carriers {
                if c.len() != instance.ships.len() {
                    return Err(usage(format!("--carriers lists {} ships, the instance has {}", c.len(), instance.ships.len())));
                }
                for (ship, &carrier) in instance.ships.iter_mut().zip(c) {
                    ship.carrier = carrier;
                }
            }
            let players = carriers(&instance).len();
            if players > MAX_GAME_CARRIERS.min(MAX_PLAYERS) {
                bail!("{players} carriers; at most {MAX_GAME_CARRIERS} are supported");
            }
            let priority = args.priority.clone().unwrap_or_else(|| default_priority(players));
            if priority.len() != players {
                return Err(usage(format!("--priority lists {} carriers, the instance has {players}", priority.len())));
            }
            let expanded: Instance = instance.with_expanded_windows(args.window_factor);
            let analysis = analyze(&expanded, &priority, &options, clock)?;
            if args.verbose {
                for c in &analysis.coalitions {
                    eprintln!("{}: {:?}", io::coalition_label(c.mask), c.cost);
                }
            }
            GameReportFile::from_analysis(&instance.descriptor, args.window_factor, &analysis)
        }
        (None, None) => bail!("either an instance or --game-values is required"),
    };
    emit(args.report.as_deref(), &io::to_json(&report))?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub instance: String,
    pub ships: usize,
    pub ports: usize,
    pub graph_nodes: usize,
    pub arcs_per_ship: Vec<usize>,
    pub colgen_seconds: Option<f64>,
    pub colgen_bound: Option<f64>,
    pub flow_seconds: Option<f64>,
    pub flow_bound: Option<f64>,
    /// Flow LP time over column generation time.
    pub speedup: Option<f64>,
}

pub fn cmd_stats(args: &StatsArgs, clock: &dyn Clock) -> Result<StatsReport> {
    let instance = io::read_instance(&args.instance)?;
    let graph = VoyageGraph::build(&instance)?;
    let g = graph.stats();
    let timing = if args.no_timing {
        None
    } else {
        let caps = OracleCaps { max_lp_vars: usize::MAX, ..OracleCaps::default() };
        Some(time_root_bounds(&instance, &caps, clock)?)
    };
    let report = StatsReport {
        instance: instance.descriptor.clone(),
        ships: instance.ships.len(),
        ports: instance.ports.len(),
        graph_nodes: g.nodes,
        arcs_per_ship: g.arcs_per_ship,
        colgen_seconds: timing.map(|t| t.colgen_seconds),
        colgen_bound: timing.map(|t| t.colgen_bound),
        flow_seconds: timing.map(|t| t.flow_seconds),
        flow_bound: timing.map(|t| t.flow_bound),
        speedup: timing.map(|t| t.flow_seconds / t.colgen_seconds.max(1e-9)),
    };
    print!("{}", io::to_json(&report));
    Ok(report)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let clock = WallClock::start();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a).map(|(descriptor, path)| {
            println!("{descriptor} {}", path.display());
            EXIT_OK
        }),
        Command::Solve(a) => cmd_solve(a, &clock).map(|s| match s {
            SolveStatus::Optimal | SolveStatus::Feasible => EXIT_OK,
            SolveStatus::Infeasible => EXIT_INFEASIBLE,
            SolveStatus::TimeLimit => EXIT_TIMEOUT,
        }),
        Command::Game(a) => cmd_game(a, &clock).map(|_| EXIT_OK),
        Command::Stats(a) => cmd_stats(a, &clock).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() { EXIT_USAGE } else { EXIT_ERROR }
        }
    }
}
