//! `sticky`: simulate sticky particle systems and verify the estimates
//! their trajectories satisfy.

mod checks;

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sticky_core::continuum::{converge_study, ContinuumRecipe, ConvergenceReport};
use sticky_core::generate::random_scenario;
use sticky_core::io::{read_atoms, read_event_log, write_event_log, write_trajectory_csv};
use sticky_core::transport::w1;
use sticky_core::{simulate, simulate_1d_fast, Scenario, SimulationResult};
use thiserror::Error;

use checks::{Check, SCHEMA_VERSION};

const DEFAULT_RANDOM_HORIZON: f64 = 10.0;

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] sticky_core::Error),

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("{0}")]
    Usage(String),

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use sticky_core::Error as E;
        match self {
            CliError::Core(E::ToleranceConflict { .. }) => 3,
            CliError::Core(E::Io(_) | E::QuadratureBudgetExceeded { .. }) => 1,
            CliError::Core(_) | CliError::Read { .. } | CliError::Usage(_) => 2,
            CliError::Write { .. } => 1,
            CliError::ChecksFailed { .. } => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sticky", version, about = "Sticky particle simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write its trajectories and event log.
    Simulate {
        #[command(flatten)]
        input: ScenarioArgs,
        /// Directory for trajectories.csv and events.jsonl.
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Run verification checks on a simulated scenario.
    Verify {
        #[command(flatten)]
        input: ScenarioArgs,
        /// Comma-separated subset of checks; all by default.
        #[arg(long, value_delimiter = ',', default_values_t = Check::ALL.to_vec())]
        checks: Vec<Check>,
        /// Verify the trajectories implied by this event log instead of
        /// simulating.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Seed for sampled times and test functions.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Exact W1 distance between two atom lists on the line (CSV rows
    /// `weight,point`).
    W1 { mu: PathBuf, nu: PathBuf },
    /// Quantize a continuum recipe at several sizes and measure convergence.
    Converge {
        recipe: PathBuf,
        /// Comma-separated particle counts.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Comma-separated observation times.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// Override the recipe horizon.
        #[arg(long)]
        horizon: Option<f64>,
        /// Directory for convergence.json and w1.csv.
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(required_unless_present = "random", conflicts_with = "random")]
    scenario: Option<PathBuf>,
    /// Generate a random scenario instead of reading one.
    #[arg(long, num_args = 3, value_names = ["N", "D", "SEED"])]
    random: Option<Vec<u64>>,
    /// Override the scenario horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the simultaneity window.
    #[arg(long)]
    tol_tgroup: Option<f64>,
    /// Override the contact distance used in d > 1.
    #[arg(long)]
    tol_xhit: Option<f64>,
}

impl ScenarioArgs {
    /// The scenario and an identifier for reports.
    fn load(&self) -> Result<(Scenario, String)> {
        let (mut scenario, id) = match (&self.scenario, &self.random) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                    path: path.clone(),
                    source,
                })?;
                let id = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                (Scenario::from_json(&text)?, id)
            }
            (None, Some(params)) => {
                let (n, d, seed) = (params[0] as usize, params[1] as usize, params[2]);
                let horizon = self.horizon.unwrap_or(DEFAULT_RANDOM_HORIZON);
                (random_scenario(n, d, seed, horizon)?, format!("random-{n}-{d}-{seed}"))
            }
            (None, None) => return Err(CliError::Usage("no scenario given".into())),
        };
        if let Some(h) = self.horizon {
            scenario = scenario.with_horizon(h)?;
        }
        let mut tol = *scenario.tolerances();
        if let Some(t) = self.tol_tgroup {
            tol.t_group = t;
        }
        if let Some(x) = self.tol_xhit {
            tol.x_hit = x;
        }
        Ok((scenario.with_tolerances(tol)?, id))
    }
}

fn run_engine(scenario: &Scenario) -> Result<SimulationResult> {
    let start = Instant::now();
    let result = if scenario.dim() == 1 {
        simulate_1d_fast(scenario)?
    } else {
        simulate(scenario)?
    };
    log::info!(
        "simulated {} particles: {} events, {} in {:.3?}",
        result.len(),
        result.events().len(),
        if result.is_complete() { "complete" } else { "stopped at the horizon" },
        start.elapsed()
    );
    Ok(result)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

fn cmd_simulate(input: &ScenarioArgs, out: &Path) -> Result<()> {
    let (scenario, _) = input.load()?;
    let result = run_engine(&scenario)?;
    create_dir(out)?;
    let csv = out.join("trajectories.csv");
    let mut w = create(&csv)?;
    write_trajectory_csv(&result, &mut w)?;
    finish(w, &csv)?;
    let log_path = out.join("events.jsonl");
    let mut w = create(&log_path)?;
    write_event_log(&result, &mut w)?;
    finish(w, &log_path)?;
    println!("{} events", result.events().len());
    Ok(())
}

fn cmd_verify(
    input: &ScenarioArgs,
    checks: &[Check],
    events: Option<&Path>,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let start = Instant::now();
    let (scenario, id) = input.load()?;
    let result = match events {
        Some(path) => {
            let file = File::open(path).map_err(|source| CliError::Read {
                path: path.to_owned(),
                source,
            })?;
            let records = read_event_log(BufReader::new(file))?;
            SimulationResult::replay(&scenario, &records)?
        }
        None => run_engine(&scenario)?,
    };
    let report = checks::verify(id, &result, checks, seed);
    let text = to_json(&report);
    println!("{text}");
    if let Some(path) = out {
        fs::write(path, format!("{text}\n")).map_err(|source| CliError::Write {
            path: path.to_owned(),
            source,
        })?;
    }
    for r in &report.records {
        let worst = r.worst.map_or_else(|| "n/a".to_owned(), |w| format!("{w:.3e}"));
        log::info!(
            "{} {}: worst {worst}, tolerance {:e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.tolerance
        );
    }
    log::info!("verification took {:.3?}", start.elapsed());
    let failed = report.records.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed {
            failed,
            total: report.records.len(),
        });
    }
    Ok(())
}

fn cmd_w1(mu: &Path, nu: &Path) -> Result<()> {
    let read = |path: &Path| -> Result<_> {
        let file = File::open(path).map_err(|source| CliError::Read {
            path: path.to_owned(),
            source,
        })?;
        Ok(read_atoms(BufReader::new(file))?)
    };
    println!("{}", w1(&read(mu)?, &read(nu)?)?);
    Ok(())
}

#[derive(Serialize)]
struct ConvergeOutput<'a> {
    schema_version: u32,
    recipe: &'a ContinuumRecipe,
    #[serde(flatten)]
    report: &'a ConvergenceReport,
}

fn cmd_converge(recipe_path: &Path, sizes: &[usize], times: &[f64], horizon: Option<f64>, out: &Path) -> Result<()> {
    let start = Instant::now();
    let text = fs::read_to_string(recipe_path).map_err(|source| CliError::Read {
        path: recipe_path.to_owned(),
        source,
    })?;
    let mut recipe = ContinuumRecipe::from_json(&text)?;
    if horizon.is_some() {
        recipe = ContinuumRecipe::new(recipe.density().clone(), recipe.v0().clone(), horizon)?;
    }
    let report = converge_study(&recipe, sizes, times)?;
    create_dir(out)?;
    let json_path = out.join("convergence.json");
    let output = ConvergeOutput {
        schema_version: SCHEMA_VERSION,
        recipe: &recipe,
        report: &report,
    };
    fs::write(&json_path, format!("{}\n", to_json(&output))).map_err(|source| CliError::Write {
        path: json_path.clone(),
        source,
    })?;
    let csv_path = out.join("w1.csv");
    let mut w = create(&csv_path)?;
    write_w1_table(&report, &mut w).map_err(|source| CliError::Write {
        path: csv_path.clone(),
        source,
    })?;
    finish(w, &csv_path)?;
    log::info!("convergence study took {:.3?}", start.elapsed());
    Ok(())
}

/// One row per (size pair, time) with both W1 diagnostics.
fn write_w1_table<W: Write>(report: &ConvergenceReport, w: &mut W) -> io::Result<()> {
    writeln!(w, "n,n_next,t,w1_rho,w1_push")?;
    for (k, pair) in report.sizes.windows(2).enumerate() {
        for (j, t) in report.times.iter().enumerate() {
            writeln!(
                w,
                "{},{},{t},{},{}",
                pair[0], pair[1], report.w1_rho[k][j], report.w1_push[k][j]
            )?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize infallibly")
}

fn configure_threads() {
    let Ok(raw) = std::env::var("STICKY_THREADS") else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("cannot size the thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring STICKY_THREADS={raw:?}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    configure_threads();
    let outcome = match &cli.command {
        Command::Simulate { input, out } => cmd_simulate(input, out),
        Command::Verify {
            input,
            checks,
            events,
            seed,
            out,
        } => cmd_verify(input, checks, events.as_deref(), *seed, out.as_deref()),
        Command::W1 { mu, nu } => cmd_w1(mu, nu),
        Command::Converge {
            recipe,
            sizes,
            times,
            horizon,
            out,
        } => cmd_converge(recipe, sizes, times, *horizon, out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
