//! The `gossip` command line: `check`, `run`, `rate` and `example1`.
//!
//! Exit codes: 0 success, 1 negative analytic verdict, 2 input or validation
//! error, 3 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, default_window, RateReport};
use crate::config::{self, Experiment, ExperimentConfig};
use crate::error::Error;
use crate::export;
use crate::graph::{recurrent_classes, stationary_distribution, StationaryDistribution};
use crate::simulator::{run_replications, SimulationTrace};
use crate::world::IdentifiabilityReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable consulted when `--out` is not given.
pub const OUT_DIR_ENV: &str = "GOSSIP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "gossip",
    version,
    about = "Gossip-without-recall learning simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report connectivity, recurrent classes and global identifiability.
    Check(CommonArgs),
    /// Simulate and write trace CSVs plus a manifest.
    Run(CommonArgs),
    /// Compare theoretical and empirical learning rates.
    Rate(RateArgs),
    /// Run the built-in eight-agent example end to end.
    Example1(OverrideArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "traces",
        required_unless_present = "traces"
    )]
    pub config: Option<PathBuf>,
    /// Directory written by `gossip run`.
    #[arg(long, value_name = "DIR")]
    pub traces: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Args, Default)]
pub struct OverrideArgs {
    #[arg(long, value_name = "DIR", env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

impl OverrideArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.simulation.seed = seed;
        }
        if let Some(r) = self.replications {
            cfg.simulation.replications = r;
        }
        if let Some(h) = self.horizon {
            cfg.simulation.horizon = h;
            // a configured window past the new horizon would no longer validate
            if cfg.analysis.rate_window.is_some_and(|[_, t1]| t1 > h) {
                cfg.analysis.rate_window = None;
            }
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("gossip_out"))
    }
}

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_IO,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<i32, CliError>;

struct Console {
    quiet: bool,
}

impl Console {
    fn line(&self, s: impl AsRef<str>) {
        if !self.quiet {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", s.as_ref());
        }
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Check(args) => cmd_check(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Rate(args) => cmd_rate(&args),
        Command::Example1(args) => cmd_example1(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn load_config(
    path: &Path,
    overrides: &OverrideArgs,
) -> std::result::Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError {
        code: EXIT_INPUT,
        message: format!("cannot read config {}: {e}", path.display()),
    })?;
    let mut cfg = ExperimentConfig::from_json(&text)
        .map_err(|e| CliError::from(e).with_context(&path.display().to_string()))?;
    overrides.apply(&mut cfg);
    Ok(cfg)
}

impl CliError {
    fn with_context(mut self, ctx: &str) -> Self {
        self.message = format!("{ctx}: {}", self.message);
        self
    }
}

fn agent_set(nodes: &[usize]) -> String {
    let parts: Vec<String> = nodes.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// Structural and identifiability summary of an experiment.
pub struct CheckOutcome {
    pub strongly_connected: bool,
    pub classes: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
    pub stationary: Option<StationaryDistribution>,
    pub identifiability: Vec<IdentifiabilityReport>,
    pub verdict: bool,
}

pub fn check_experiment(exp: &Experiment) -> CheckOutcome {
    let structure = recurrent_classes(&exp.selection);
    let identifiability: Vec<IdentifiabilityReport> = structure
        .classes
        .iter()
        .map(|class| {
            exp.world
                .check_global_identifiability(class)
                .expect("class members are valid agents")
        })
        .collect();
    let stationary = stationary_distribution(&exp.selection).ok();
    let verdict = structure.classes.len() == 1 && identifiability[0].identifiable;
    CheckOutcome {
        strongly_connected: exp.network.is_strongly_connected(),
        transient: structure.transient(),
        classes: structure.classes,
        stationary,
        identifiability,
        verdict,
    }
}

fn print_check(console: &Console, exp: &Experiment, outcome: &CheckOutcome) {
    let states = exp.world.states();
    console.line(format!(
        "strongly connected: {}",
        if outcome.strongly_connected {
            "yes"
        } else {
            "no"
        }
    ));
    let classes: Vec<String> = outcome.classes.iter().map(|c| agent_set(c)).collect();
    console.line(format!("recurrent classes: {}", classes.join(" ")));
    console.line(format!(
        "transient agents: {}",
        agent_set(&outcome.transient)
    ));
    match &outcome.stationary {
        Some(pi) => {
            let parts: Vec<String> = pi.as_slice().iter().map(|v| format!("{v:.6}")).collect();
            console.line(format!("stationary distribution: ({})", parts.join(", ")));
        }
        None => console.line("stationary distribution: not unique (several recurrent classes)"),
    }
    console.line(format!("true state: {}", states.label(states.true_state())));
    for (class, report) in outcome.classes.iter().zip(&outcome.identifiability) {
        console.line(format!("identifiability within {}:", agent_set(class)));
        for entry in &report.entries {
            let who = if entry.witnesses.is_empty() {
                "none".to_string()
            } else {
                let names: Vec<String> = entry
                    .witnesses
                    .iter()
                    .map(|a| format!("agent {}", a + 1))
                    .collect();
                names.join(", ")
            };
            console.line(format!(
                "  state {}: {}",
                states.label(entry.check_state),
                who
            ));
        }
    }
    console.line(format!(
        "verdict: {}",
        if outcome.verdict {
            "identifiable"
        } else {
            "NOT identifiable"
        }
    ));
}

pub fn cmd_check(args: &CommonArgs) -> CliResult {
    let console = Console {
        quiet: args.overrides.quiet,
    };
    let cfg = load_config(&args.config, &args.overrides)?;
    let exp = cfg.build()?;
    let outcome = check_experiment(&exp);
    print_check(&console, &exp, &outcome);
    Ok(if outcome.verdict {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

fn simulate(exp: &Experiment) -> std::result::Result<Vec<SimulationTrace>, CliError> {
    Ok(run_replications(
        &exp.network,
        &exp.selection,
        &exp.world,
        &exp.simulation,
    )?)
}

pub fn cmd_run(args: &CommonArgs) -> CliResult {
    let console = Console {
        quiet: args.overrides.quiet,
    };
    let cfg = load_config(&args.config, &args.overrides)?;
    let exp = cfg.build()?;
    let traces = simulate(&exp)?;
    let out = args.overrides.out_dir();
    let manifest = export::write_run(&out, &cfg, &exp, &traces, traces.len())?;
    console.line(format!(
        "wrote {} replication(s) of {} rounds to {}",
        manifest.replications.len(),
        manifest.horizon,
        out.display()
    ));
    Ok(EXIT_OK)
}

fn build_rate_report(
    exp: &Experiment,
    traces: &[SimulationTrace],
) -> std::result::Result<(RateReport, StationaryDistribution), CliError> {
    let pi = stationary_distribution(&exp.selection)?;
    let horizon = traces
        .first()
        .map_or(exp.simulation.horizon, |t| t.horizon());
    let window = exp
        .analysis
        .window
        .unwrap_or_else(|| default_window(horizon));
    let report = analysis::rate_report(
        traces,
        &exp.world,
        &pi,
        &exp.analysis.check_states,
        &exp.analysis.agents,
        window,
    )?;
    Ok((report, pi))
}

fn print_rates(console: &Console, exp: &Experiment, report: &RateReport, tolerance: f64) {
    let states = exp.world.states();
    console.line(format!(
        "rates over window [{}, {}], {} replication(s), tolerance {:.0}%",
        report.window.0,
        report.window.1,
        report.replications,
        tolerance * 100.0
    ));
    for entry in &report.entries {
        console.line(format!(
            "state {}: theoretical {:.7} nats/round",
            states.label(entry.check_state),
            entry.theoretical
        ));
        for a in &entry.agents {
            let status = match a.relative_error(entry.theoretical) {
                Some(r) if r <= tolerance => format!("ok ({:.1}%)", r * 100.0),
                Some(r) => format!("FAIL ({:.1}%)", r * 100.0),
                None => "n/a".into(),
            };
            console.line(format!(
                "  agent {}: empirical {:.7} ± {:.7}  {status}",
                a.agent + 1,
                -a.empirical.mean_slope,
                a.empirical.half_width
            ));
        }
    }
}

fn write_extras(
    out: &Path,
    exp: &Experiment,
    traces: &[SimulationTrace],
    pi: &StationaryDistribution,
) -> std::result::Result<(), CliError> {
    let Some(first) = traces.first() else {
        return Ok(());
    };
    let truth = exp.world.true_state();
    if let Some((a, b)) = exp.analysis.belief_diff {
        let series = analysis::belief_difference(first, a, b, truth);
        export::write_series(&out.join("belief_diff.csv"), ["t", "value"], &series)?;
    }
    if let Some(agent) = exp.analysis.occupancy_agent {
        let occ = analysis::occupancy(first, agent, first.horizon(), Some(pi))?;
        export::write_occupancy(&out.join("occupancy.csv"), &occ)?;
    }
    Ok(())
}

pub fn cmd_rate(args: &RateArgs) -> CliResult {
    let console = Console {
        quiet: args.overrides.quiet,
    };
    let (exp, traces) = match (&args.config, &args.traces) {
        (Some(path), _) => {
            let cfg = load_config(path, &args.overrides)?;
            let exp = cfg.build()?;
            let traces = simulate(&exp)?;
            (exp, traces)
        }
        (None, Some(dir)) => {
            if !dir.join(export::MANIFEST).is_file() {
                return Err(CliError {
                    code: EXIT_INPUT,
                    message: format!(
                        "no {} in {}; run `gossip run --config ... --out {}` first",
                        export::MANIFEST,
                        dir.display(),
                        dir.display()
                    ),
                });
            }
            let (_, exp, traces) = export::load_run(dir)?;
            (exp, traces)
        }
        (None, None) => unreachable!("clap requires --config or --traces"),
    };
    let (report, pi) = build_rate_report(&exp, &traces)?;
    let out = args.overrides.out_dir();
    fs::create_dir_all(&out).map_err(|e| {
        CliError::from(Error::Io {
            path: out.display().to_string(),
            source: e,
        })
    })?;
    export::write_rate_report(&out.join("rate_report.csv"), &report, &exp.world)?;
    write_extras(&out, &exp, &traces, &pi)?;
    print_rates(&console, &exp, &report, exp.analysis.tolerance);
    if report.entries.iter().any(|e| e.theoretical == 0.0) {
        eprintln!("warning: truth not identifiable; some theoretical rates are 0");
        return Ok(EXIT_NEGATIVE);
    }
    Ok(if report.passes(exp.analysis.tolerance) {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    })
}

pub fn cmd_example1(args: &OverrideArgs) -> CliResult {
    let console = Console { quiet: args.quiet };
    let mut cfg = config::example1();
    args.apply(&mut cfg);
    let exp = cfg.build()?;
    let out = args.out_dir();

    let outcome = check_experiment(&exp);
    print_check(&console, &exp, &outcome);

    let traces = simulate(&exp)?;
    let first = &traces[0];
    // full CSVs for the first replication only; the manifest still lists every seed
    export::write_run(&out, &cfg, &exp, &traces, 1)?;

    let (report, pi) = build_rate_report(&exp, &traces)?;
    export::write_rate_report(&out.join("rate_report.csv"), &report, &exp.world)?;
    write_extras(&out, &exp, &traces, &pi)?;
    export::write_agent_beliefs(&out.join("fig2_agent2_beliefs.csv"), first, &exp.world, 1)?;
    let diff = analysis::belief_difference(first, 2, 7, exp.world.true_state());
    export::write_series(&out.join("fig3_diff_3_8.csv"), ["t", "value"], &diff)?;

    print_rates(&console, &exp, &report, exp.analysis.tolerance);
    let horizon = first.horizon();
    let learned = traces
        .iter()
        .filter(|tr| {
            (0..tr.n()).all(|i| {
                tr.log_belief(horizon, i).expect("last round")[exp.world.true_state()].exp() >= 0.99
            })
        })
        .count();
    console.line(format!(
        "replications where every agent puts >= 0.99 on the truth at t={horizon}: {learned}/{}",
        traces.len()
    ));
    console.line(format!("report written to {}", out.display()));
    Ok(EXIT_OK)
}
