//! The verification suite behind `sticky verify`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sticky_core::eulerian::{
    check_averaging, check_convex_monotone, check_entropy_1d, check_qspp_1d, event_grid,
    momentum_drift, random_test_functions, weak_residuals, ConvexFunction, VectorField,
};
use sticky_core::transport::pushforward_variation;
use sticky_core::variation::{variation_report, BOUND_SLACK};
use sticky_core::SimulationResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Tolerance for the pointwise identities and inequalities.
const CHECK_TOL: f64 = 1e-9;
const AVERAGING_PAIRS: usize = 20;
const TEST_FUNCTIONS: usize = 20;
const GRID_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    Variation,
    Averaging,
    Convex,
    Weak,
    Entropy,
    Qspp,
    Transport,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Variation,
        Check::Averaging,
        Check::Convex,
        Check::Weak,
        Check::Entropy,
        Check::Qspp,
        Check::Transport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Variation => "variation",
            Check::Averaging => "averaging",
            Check::Convex => "convex",
            Check::Weak => "weak",
            Check::Entropy => "entropy",
            Check::Qspp => "qspp",
            Check::Transport => "transport",
        }
    }

    /// Checks that only make sense on the line.
    pub fn line_only(self) -> bool {
        matches!(self, Check::Entropy | Check::Qspp | Check::Transport)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Check::ALL.iter().map(|c| c.name()).collect();
                format!("unknown check `{s}`, expected one of {}", names.join(", "))
            })
    }
}

/// One check outcome. `worst` is the largest violation found, so the check
/// passes iff `worst <= tolerance`; it is null when evaluation failed.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: &'static str,
    pub worst: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: Value,
}

impl CheckRecord {
    fn new(check: Check, worst: f64, tolerance: f64, detail: Value) -> Self {
        Self {
            name: check.name(),
            worst: Some(worst),
            tolerance,
            pass: worst <= tolerance,
            detail,
        }
    }

    fn failed(check: Check, tolerance: f64, error: String) -> Self {
        Self {
            name: check.name(),
            worst: None,
            tolerance,
            pass: false,
            detail: json!({ "error": error }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub scenario_id: String,
    pub particles: usize,
    pub dimension: usize,
    pub event_count: usize,
    pub complete: bool,
    pub seed: u64,
    pub pass: bool,
    pub records: Vec<CheckRecord>,
    pub skipped: Vec<&'static str>,
}

/// Runs the requested checks in parallel; records keep the order of
/// [`Check::ALL`].
pub fn verify(scenario_id: String, result: &SimulationResult, checks: &[Check], seed: u64) -> VerificationReport {
    let mut checks = checks.to_vec();
    checks.sort();
    checks.dedup();
    let (skipped, run): (Vec<Check>, Vec<Check>) =
        checks.into_iter().partition(|c| c.line_only() && result.dim() != 1);
    for c in &skipped {
        log::warn!("skipping {c}: it needs d = 1, the scenario has d = {}", result.dim());
    }
    let records: Vec<CheckRecord> = run.par_iter().map(|&c| run_check(c, result, seed)).collect();
    VerificationReport {
        schema_version: SCHEMA_VERSION,
        scenario_id,
        particles: result.len(),
        dimension: result.dim(),
        event_count: result.events().len(),
        complete: result.is_complete(),
        seed,
        pass: records.iter().all(|r| r.pass),
        records,
        skipped: skipped.iter().map(|c| c.name()).collect(),
    }
}

fn run_check(check: Check, r: &SimulationResult, seed: u64) -> CheckRecord {
    // every check draws from its own stream so subsets reproduce the full run
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (check as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    match check {
        Check::Variation => {
            let report = variation_report(r);
            CheckRecord::new(
                check,
                report.mass_average - report.bound,
                BOUND_SLACK,
                json!({
                    "mass_average": report.mass_average,
                    "bound": report.bound,
                    "per_particle": report.per_particle,
                }),
            )
        }
        Check::Averaging => {
            let maps = VectorField::standard_family(r.dim());
            let pairs = averaging_pairs(r, &mut rng);
            let mut worst: f64 = 0.0;
            for &(s, t) in &pairs {
                for g in &maps {
                    match check_averaging(r, s, t, g) {
                        Ok(v) => worst = worst.max(v),
                        Err(e) => return CheckRecord::failed(check, CHECK_TOL, e.to_string()),
                    }
                }
            }
            CheckRecord::new(check, worst, CHECK_TOL, json!({ "maps": maps.len(), "pairs": pairs }))
        }
        Check::Convex => {
            let grid = event_grid(r, GRID_SAMPLES);
            let c: Vec<f64> = (0..r.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let family = ConvexFunction::standard_family(c);
            let mut per_function = serde_json::Map::new();
            let mut worst: f64 = 0.0;
            for f in &family {
                let increase = check_convex_monotone(r, f, &grid);
                per_function.insert(f.name().to_owned(), json!(increase));
                worst = worst.max(increase);
            }
            let drift = momentum_drift(r);
            CheckRecord::new(
                check,
                worst.max(drift),
                CHECK_TOL,
                json!({ "increase": per_function, "momentum_drift": drift, "grid_times": grid.len() }),
            )
        }
        Check::Weak => {
            let tolerance = r.tolerances().residual_quad;
            let tests = random_test_functions(r, TEST_FUNCTIONS, &mut rng);
            match weak_residuals(r, &tests) {
                Ok(res) => {
                    let mass = res.iter().map(|w| w.mass.abs()).fold(0.0, f64::max);
                    let momentum = res.iter().map(|w| w.momentum.abs()).fold(0.0, f64::max);
                    CheckRecord::new(
                        check,
                        mass.max(momentum),
                        tolerance,
                        json!({ "test_functions": tests.len(), "mass": mass, "momentum": momentum }),
                    )
                }
                Err(e) => CheckRecord::failed(check, tolerance, e.to_string()),
            }
        }
        Check::Entropy => {
            let grid: Vec<f64> = event_grid(r, GRID_SAMPLES).into_iter().filter(|&t| t > 0.0).collect();
            match check_entropy_1d(r, &grid) {
                Ok(v) => CheckRecord::new(check, v, CHECK_TOL, json!({ "grid_times": grid.len() })),
                Err(e) => CheckRecord::failed(check, CHECK_TOL, e.to_string()),
            }
        }
        Check::Qspp => {
            let grid: Vec<f64> = event_grid(r, GRID_SAMPLES).into_iter().filter(|&t| t > 0.0).collect();
            let mut pairs: Vec<(f64, f64)> = grid.windows(2).map(|w| (w[0], w[1])).collect();
            let hi = r.horizon();
            if hi > 0.0 {
                for _ in 0..50 {
                    let a = rng.random_range(0.0..hi).max(f64::MIN_POSITIVE);
                    let b = rng.random_range(0.0..hi).max(f64::MIN_POSITIVE);
                    pairs.push((a.min(b), a.max(b)));
                }
            }
            let mut worst: f64 = 0.0;
            for &(s, t) in &pairs {
                match check_qspp_1d(r, s, t) {
                    Ok(v) => worst = worst.max(v),
                    Err(e) => return CheckRecord::failed(check, CHECK_TOL, e.to_string()),
                }
            }
            CheckRecord::new(check, worst, CHECK_TOL, json!({ "pairs": pairs.len() }))
        }
        Check::Transport => {
            let report = variation_report(r);
            match pushforward_variation(r) {
                Ok(v) => CheckRecord::new(
                    check,
                    (v - report.mass_average).max(v - report.bound),
                    CHECK_TOL,
                    json!({
                        "pushforward_variation": v,
                        "mass_average": report.mass_average,
                        "bound": report.bound,
                    }),
                ),
                Err(e) => CheckRecord::failed(check, CHECK_TOL, e.to_string()),
            }
        }
    }
}

/// Pairs `s <= t` inside `[0, min(horizon, 10)]`: straddling and touching
/// the first events, the rest uniform.
fn averaging_pairs(r: &SimulationResult, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let hi = r.horizon().min(10.0);
    let mut pairs = Vec::with_capacity(AVERAGING_PAIRS);
    for e in r.event_times().into_iter().filter(|&e| e + 1e-7 <= hi).take(AVERAGING_PAIRS / 4) {
        pairs.push(((e - 1e-7).max(0.0), e + 1e-7));
        pairs.push((0.0, e));
    }
    while pairs.len() < AVERAGING_PAIRS {
        let a = rng.random_range(0.0..=hi);
        let b = rng.random_range(0.0..=hi);
        pairs.push((a.min(b), a.max(b)));
    }
    pairs
}
