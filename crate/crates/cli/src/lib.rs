//! Command-line front end: `run` one scenario, `sweep` the collision tables,
//! `show` a resolved configuration.
//!
//! Exit codes: 0 on success, 1 when the arguments or the scenario fail to
//! parse or validate, 2 when the simulation aborts or its output cannot be
//! written.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};

use safe_coverage::report::{print_summary, write_run, EmitOptions, RunSummary};
use safe_coverage::scenario::{family_scenario, resolve, Family, ScenarioConfig, ScenarioError};
use safe_coverage::sim::{run, ControlMode, SimParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ABORT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "safe-coverage", version, about = "Safe coverage of planar domains by vehicle swarms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario and write its trajectory and summary.
    Run(RunArgs),
    /// Count collision events with and without avoidance over several swarm sizes.
    Sweep(SweepArgs),
    /// Print the fully resolved configuration of a scenario as TOML.
    Show {
        /// Built-in name (square16, triangle15, arrow9, ...) or config file.
        scenario: String,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Saturated,
    Raw,
}

#[derive(clap::Args, Debug, Clone)]
struct Overrides {
    /// Enable or disable the pairwise avoidance controller.
    #[arg(long)]
    safety: Option<Switch>,
    /// Normalize coverage controls to the acceleration bound, or apply them raw.
    #[arg(long)]
    mode: Option<Mode>,
    /// Time step (s), at most 0.05.
    #[arg(long)]
    dt: Option<f64>,
    /// Final time (s).
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Jitter the initial positions reproducibly from this seed.
    #[arg(long = "seed-layout")]
    seed_layout: Option<u64>,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Built-in name (square16, triangle15, arrow9, ...) or config file.
    scenario: String,
    #[command(flatten)]
    overrides: Overrides,
    /// Also write the energy trace `energy.csv`.
    #[arg(long = "emit-energy")]
    emit_energy: bool,
    /// Also write plot snapshots at the configured times.
    #[arg(long = "emit-plots")]
    emit_plots: bool,
    /// Output directory (defaults to the scenario's).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    /// Domain families to sweep.
    #[arg(long, value_delimiter = ',', default_values = ["square", "triangle"])]
    family: Vec<String>,
    /// Swarm sizes; defaults to 9,16,25 for squares, 6,10,15 for triangles
    /// and 9 for arrows.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for `sweep.csv` and per-run summaries.
    #[arg(long, default_value = "out/sweep")]
    out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }

    fn abort(message: impl ToString) -> Self {
        Failure {
            code: EXIT_ABORT,
            message: message.to_string(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::invalid(e)
    }
}

/// Parse `args` (program name first) and execute, writing human-readable
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_INVALID;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, out),
        Command::Sweep(args) => cmd_sweep(args, out),
        Command::Show { scenario } => resolve(&scenario)
            .map_err(Failure::from)
            .and_then(|c| write!(out, "{}", c.to_toml()).map_err(Failure::abort)),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// [`run_cli_with`] on the process's standard streams.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_cli_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn apply(mut config: ScenarioConfig, o: &Overrides) -> Result<ScenarioConfig, Failure> {
    let p = config.params;
    let params = SimParams::new(
        p.v_max,
        o.dt.unwrap_or(p.dt),
        o.t_end.unwrap_or(p.t_end),
        p.coverage,
        p.safety,
        match o.mode {
            Some(Mode::Raw) => ControlMode::Raw,
            Some(Mode::Saturated) => ControlMode::Saturated,
            None => p.mode,
        },
        o.safety.map_or(p.avoidance, |s| s == Switch::On),
    )
    .map_err(Failure::invalid)?;
    config.params = params;
    if let Some(seed) = o.seed_layout {
        config = config.with_layout_jitter(seed)?;
    }
    config.validate()?;
    Ok(config)
}

fn simulate(config: &ScenarioConfig) -> Result<safe_coverage::sim::Trajectory, Failure> {
    run(&config.to_scenario()).map_err(|e| Failure::abort(format!("{}: simulation aborted: {e}", config.name)))
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let config = apply(resolve(&args.scenario)?, &args.overrides)?;
    let traj = simulate(&config)?;
    let dir = args.out.unwrap_or_else(|| PathBuf::from(&config.output.dir));
    let options = EmitOptions {
        energy: args.emit_energy,
        plots: args.emit_plots,
    };
    let files = write_run(&config, &traj, &dir, options).map_err(Failure::abort)?;
    let summary = RunSummary::new(&config, &traj);
    print_summary(&summary, &mut *out).map_err(Failure::abort)?;
    writeln!(out, "wrote {} files to {}", files.len(), dir.display()).map_err(Failure::abort)?;
    Ok(())
}

/// Collision counts of one swarm size with avoidance off and on.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub family: &'static str,
    pub n: usize,
    pub without: usize,
    pub with: usize,
}

fn default_sizes(family: Family) -> Vec<usize> {
    match family {
        Family::Square => vec![9, 16, 25],
        Family::Triangle => vec![6, 10, 15],
        Family::Arrow => vec![9],
    }
}

fn cmd_sweep(args: SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut jobs = Vec::new();
    for name in &args.family {
        let family =
            Family::parse(name).ok_or_else(|| Failure::invalid(format!("unknown family `{name}`")))?;
        let sizes = if args.n.is_empty() {
            default_sizes(family)
        } else {
            args.n.clone()
        };
        for n in sizes {
            let base = family_scenario(family, n)?;
            for safety in [Switch::Off, Switch::On] {
                let o = Overrides {
                    safety: Some(safety),
                    ..args.overrides.clone()
                };
                jobs.push((family, n, safety, apply(base.clone(), &o)?));
            }
        }
    }

    std::fs::create_dir_all(&args.out).map_err(|e| Failure::abort(format!("{}: {e}", args.out.display())))?;
    let results = run_parallel(&jobs, &args.out)?;

    let mut rows: Vec<SweepRow> = Vec::new();
    for ((family, n, safety, _), events) in jobs.iter().zip(results) {
        let row = match rows.iter_mut().find(|r| r.family == family.name() && r.n == *n) {
            Some(r) => r,
            None => {
                rows.push(SweepRow {
                    family: family.name(),
                    n: *n,
                    without: 0,
                    with: 0,
                });
                rows.last_mut().unwrap()
            }
        };
        match safety {
            Switch::Off => row.without = events,
            Switch::On => row.with = events,
        }
    }
    write_sweep_table(&rows, &args.out.join("sweep.csv"))?;
    writeln!(out, "{:<10} {:>4} {:>18} {:>15}", "family", "N", "without avoidance", "with avoidance")
        .map_err(Failure::abort)?;
    for r in &rows {
        writeln!(out, "{:<10} {:>4} {:>18} {:>15}", r.family, r.n, r.without, r.with).map_err(Failure::abort)?;
    }
    Ok(())
}

/// Run every job on a pool of scoped threads; returns collision counts in job order.
fn run_parallel(
    jobs: &[(Family, usize, Switch, ScenarioConfig)],
    dir: &Path,
) -> Result<Vec<usize>, Failure> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<usize, Failure>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = {
                    let mut guard = next.lock().unwrap();
                    let k = *guard;
                    *guard += 1;
                    k
                };
                let Some((_, _, safety, config)) = jobs.get(k) else { break };
                let outcome = simulate(config).and_then(|traj| {
                    let summary = RunSummary::new(config, &traj);
                    let tag = if *safety == Switch::On { "on" } else { "off" };
                    let path = dir.join(format!("{}_safety_{tag}.json", config.name));
                    safe_coverage::report::write_summary(&summary, &path).map_err(Failure::abort)?;
                    Ok(summary.collision_event_count)
                });
                results.lock().unwrap()[k] = Some(outcome);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

fn write_sweep_table(rows: &[SweepRow], path: &Path) -> Result<(), Failure> {
    let mut text = String::from("family,n,without_avoidance,with_avoidance\n");
    for r in rows {
        text.push_str(&format!("{},{},{},{}\n", r.family, r.n, r.without, r.with));
    }
    std::fs::write(path, text).map_err(|e| Failure::abort(format!("{}: {e}", path.display())))
}
