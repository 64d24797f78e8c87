//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sticky_core::generate::random_scenario;
use sticky_core::{
    simulate, simulate_1d_fast, AtomicMeasure, EngineTolerances, ParticleInit, Result, Scenario,
    SimulationResult,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scenario_1d(m: &[f64], x: &[f64], v: &[f64], horizon: f64) -> Scenario {
    let particles = m
        .iter()
        .zip(x)
        .zip(v)
        .map(|((&m, &x), &v)| ParticleInit::new_1d(m, x, v))
        .collect();
    Scenario::new(particles, horizon, EngineTolerances::default()).unwrap()
}

/// Fast engine in one dimension, general engine otherwise.
pub fn run(scenario: &Scenario) -> Result<SimulationResult> {
    if scenario.dim() == 1 {
        simulate_1d_fast(scenario)
    } else {
        simulate(scenario)
    }
}

/// Scenario `k` of the main corpus: N in 2..=200, d cycling through 1, 2, 3.
pub fn corpus_scenario(k: u64, horizon: f64) -> Scenario {
    let mut r = rng(0x5EED_0000 + k);
    let n = r.random_range(2..=200);
    let d = 1 + (k % 3) as usize;
    random_scenario(n, d, k, horizon).unwrap()
}

/// One-dimensional corpus, N in 2..=200.
pub fn corpus_1d(k: u64, horizon: f64) -> Scenario {
    let mut r = rng(0x1D00_0000 + k);
    let n = r.random_range(2..=200);
    random_scenario(n, 1, 1_000_000 + k, horizon).unwrap()
}

/// Fixed-timestep integrator: every cluster moves by `dt · v` per step;
/// at the end of a step, any two clusters whose straight paths over the
/// step came within `tol` of each other while approaching are merged at
/// their centre of mass with the mass-averaged velocity, repeating until
/// no pair qualifies. Calls `visit(t, positions)` every `every` steps.
pub fn brute_force<F: FnMut(f64, &[Vec<f64>])>(
    scenario: &Scenario,
    dt: f64,
    t_end: f64,
    tol: f64,
    every: usize,
    mut visit: F,
) {
    let d = scenario.dim();
    let mut mass: Vec<f64> = scenario.particles().iter().map(|p| p.mass).collect();
    let mut pos: Vec<Vec<f64>> = scenario.particles().iter().map(|p| p.position.clone()).collect();
    let mut vel: Vec<Vec<f64>> = scenario.particles().iter().map(|p| p.velocity.clone()).collect();
    let mut alive = vec![true; mass.len()];
    let mut owner: Vec<usize> = (0..mass.len()).collect();
    let steps = (t_end / dt).round() as usize;
    let mut particle_pos = vec![vec![0.0; d]; mass.len()];
    for step in 1..=steps {
        for c in 0..mass.len() {
            if alive[c] {
                for k in 0..d {
                    pos[c][k] += dt * vel[c][k];
                }
            }
        }
        'merge: loop {
            for a in 0..mass.len() {
                if !alive[a] {
                    continue;
                }
                for b in a + 1..mass.len() {
                    if !alive[b] {
                        continue;
                    }
                    // relative motion over the step, reconstructed backwards
                    let mut dx = vec![0.0; d];
                    let mut dv = vec![0.0; d];
                    for k in 0..d {
                        dv[k] = vel[b][k] - vel[a][k];
                        dx[k] = (pos[b][k] - dt * vel[b][k]) - (pos[a][k] - dt * vel[a][k]);
                    }
                    let dv2: f64 = dv.iter().map(|x| x * x).sum();
                    let dxdv: f64 = dx.iter().zip(&dv).map(|(x, y)| x * y).sum();
                    if dv2 == 0.0 || dxdv >= 0.0 {
                        continue;
                    }
                    let tau = (-dxdv / dv2).min(dt);
                    let closest: f64 = dx
                        .iter()
                        .zip(&dv)
                        .map(|(x, y)| (x + tau * y).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if closest > tol {
                        continue;
                    }
                    let m = mass[a] + mass[b];
                    for k in 0..d {
                        pos[a][k] = (mass[a] * pos[a][k] + mass[b] * pos[b][k]) / m;
                        vel[a][k] = (mass[a] * vel[a][k] + mass[b] * vel[b][k]) / m;
                    }
                    mass[a] = m;
                    alive[b] = false;
                    for o in owner.iter_mut().filter(|o| **o == b) {
                        *o = a;
                    }
                    continue 'merge;
                }
            }
            break;
        }
        if step % every == 0 {
            for (i, p) in particle_pos.iter_mut().enumerate() {
                p.clone_from(&pos[owner[i]]);
            }
            visit(step as f64 * dt, &particle_pos);
        }
    }
}

/// Largest distance between the brute-force and event-driven positions
/// over `[0, t_end]`, sampled every `every` steps.
pub fn oracle_gap(scenario: &Scenario, result: &SimulationResult, dt: f64, t_end: f64, every: usize) -> f64 {
    let mut worst: f64 = 0.0;
    brute_force(scenario, dt, t_end, 1e-7, every, |t, positions| {
        for (i, p) in positions.iter().enumerate() {
            let exact = result.position(i, t);
            let gap = p
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(gap);
        }
    });
    worst
}

/// W₁ by solving the transport linear program directly.
pub fn w1_lp(mu: &AtomicMeasure, nu: &AtomicMeasure) -> f64 {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let (n, m) = (mu.len(), nu.len());
    let mut vars = vec![Vec::with_capacity(m); n];
    for i in 0..n {
        for j in 0..m {
            let cost = (mu.point(i)[0] - nu.point(j)[0]).abs();
            vars[i].push(problem.add_var(cost, (0.0, f64::INFINITY)));
        }
    }
    for i in 0..n {
        let mut row = LinearExpr::empty();
        for j in 0..m {
            row.add(vars[i][j], 1.0);
        }
        problem.add_constraint(row, ComparisonOp::Eq, mu.weights()[i]);
    }
    // the last column constraint is implied by the others
    for j in 0..m - 1 {
        let mut col = LinearExpr::empty();
        for row in &vars {
            col.add(row[j], 1.0);
        }
        problem.add_constraint(col, ComparisonOp::Eq, nu.weights()[j]);
    }
    problem.solve().expect("transport problem is feasible").objective()
}

/// Random measure on the line with 1..=max_atoms atoms.
pub fn random_measure<R: Rng>(rng: &mut R, max_atoms: usize) -> AtomicMeasure {
    let n = rng.random_range(1..=max_atoms);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let pairs: Vec<(f64, f64)> = raw
        .iter()
        .map(|w| (w / total, rng.random_range(-3.0..3.0)))
        .collect();
    AtomicMeasure::from_pairs(&pairs).unwrap()
}
