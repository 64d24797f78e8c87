//! Seeded random scenarios for tests and the command line.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::types::{EngineTolerances, ParticleInit, Scenario};

fn random_masses<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|m| m / total).collect()
}

fn random_vector<R: Rng>(d: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}

/// `n` particles with random masses and velocities in `[−1, 1]^d`.
///
/// In one dimension positions are uniform in `[0, 1]`. In higher
/// dimensions independent positions essentially never collide, so the
/// particles are dealt into groups of two or three aimed at a common
/// point they reach at a random time in `[0.05, 1]`; merged clusters may
/// go on to hit others.
pub fn random_scenario(n: usize, d: usize, seed: u64, horizon: f64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses = random_masses(n, &mut rng);
    let mut particles: Vec<ParticleInit> = Vec::with_capacity(n);
    if d == 1 {
        for &m in &masses {
            let v = rng.random_range(-1.0..1.0);
            particles.push(ParticleInit::new_1d(m, rng.random_range(0.0..1.0), v));
        }
    } else {
        let mut k = 0;
        while k < n {
            let size = if n - k == 1 { 1 } else { rng.random_range(2..=3).min(n - k) };
            let target = random_vector(d, 0.0, 1.0, &mut rng);
            let tau = rng.random_range(0.05..1.0);
            for &m in &masses[k..k + size] {
                let v = random_vector(d, -1.0, 1.0, &mut rng);
                let x = target.iter().zip(&v).map(|(p, vk)| p - tau * vk).collect();
                particles.push(ParticleInit::new(m, x, v));
            }
            k += size;
        }
        particles.shuffle(&mut rng);
    }
    Scenario::new(particles, horizon, EngineTolerances::default())
}

/// `n` particles in d = 1 with positions uniform in `[0, n]` and velocities
/// uniform in `[−1, 1]`, the large-N workload.
pub fn random_line(n: usize, seed: u64, horizon: f64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses = random_masses(n, &mut rng);
    let scale = n as f64;
    let particles = masses
        .into_iter()
        .map(|m| {
            let x = rng.random_range(0.0..scale);
            ParticleInit::new_1d(m, x, rng.random_range(-1.0..1.0))
        })
        .collect();
    Scenario::new(particles, horizon, EngineTolerances::default())
}
