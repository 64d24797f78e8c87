//! JSON-in, JSON-out operations behind the browser bindings. Kept free of
//! JavaScript types so they run and test natively.

use serde::Serialize;
use sticky_core::continuum::{converge_study, ContinuumRecipe, ConvergenceReport};
use sticky_core::generate;
use sticky_core::io::read_atoms;
use sticky_core::transport::{pushforward_variation, w1 as exact_w1};
use sticky_core::variation::variation_report;
use sticky_core::{simulate as run, simulate_1d_fast, EventRecord, Result, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct SimulationView {
    pub schema_version: u32,
    pub dimension: usize,
    pub horizon: f64,
    pub complete: bool,
    /// Per particle, the (t, first coordinate) vertices of its path on
    /// `[0, horizon]`.
    pub paths: Vec<Vec<[f64; 2]>>,
    pub events: Vec<EventRecord>,
    pub per_particle_variation: Vec<f64>,
    pub mass_average_variation: f64,
    pub bound: f64,
    /// Variation of the velocity pushforward curve, on the line only.
    pub pushforward_variation: Option<f64>,
}

pub fn simulate(scenario_json: &str) -> Result<SimulationView> {
    let scenario = Scenario::from_json(scenario_json)?;
    let result = if scenario.dim() == 1 {
        simulate_1d_fast(&scenario)?
    } else {
        run(&scenario)?
    };
    let horizon = result.horizon();
    let paths = result
        .trajectories()
        .iter()
        .map(|traj| {
            let mut vertices: Vec<[f64; 2]> = traj
                .breakpoints
                .iter()
                .filter(|b| b.time <= horizon)
                .map(|b| [b.time, b.position[0]])
                .collect();
            vertices.push([horizon, traj.position(horizon)[0]]);
            vertices
        })
        .collect();
    let report = variation_report(&result);
    let push = if result.dim() == 1 {
        Some(pushforward_variation(&result)?)
    } else {
        None
    };
    Ok(SimulationView {
        schema_version: SCHEMA_VERSION,
        dimension: result.dim(),
        horizon,
        complete: result.is_complete(),
        paths,
        events: result.event_records(),
        per_particle_variation: report.per_particle,
        mass_average_variation: report.mass_average,
        bound: report.bound,
        pushforward_variation: push,
    })
}

pub fn random_scenario(n: usize, d: usize, seed: u64, horizon: f64) -> Result<String> {
    generate::random_scenario(n, d, seed, horizon)?.to_json()
}

/// W1 between two atom lists in `weight,point` CSV form.
pub fn w1(mu_csv: &str, nu_csv: &str) -> Result<f64> {
    exact_w1(&read_atoms(mu_csv.as_bytes())?, &read_atoms(nu_csv.as_bytes())?)
}

#[derive(Debug, Serialize)]
pub struct ConvergenceView {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: ConvergenceReport,
    /// Per size pair, the largest W1(ρ) over the requested times.
    pub max_w1_rho: Vec<f64>,
}

pub fn converge(recipe_json: &str, sizes: &[usize], times: &[f64]) -> Result<ConvergenceView> {
    let recipe = ContinuumRecipe::from_json(recipe_json)?;
    let report = converge_study(&recipe, sizes, times)?;
    let max_w1_rho = report
        .w1_rho
        .iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .collect();
    Ok(ConvergenceView {
        schema_version: SCHEMA_VERSION,
        report,
        max_w1_rho,
    })
}
