//! Total variation of the velocity paths t ↦ γ̇_i(t) and the mass-averaged
//! variation bound.

use serde::Serialize;

use crate::engine::{ClusterId, SimulationResult};
use crate::error::{Error, Result};
use crate::numeric::distance;
use crate::types::Trajectory;

/// Jumps smaller than this (Euclidean norm) are merge residue and dropped.
pub const JUMP_FLOOR: f64 = 1e-13;

/// Right-continuous step function on (0, ∞): `values[0]` before the first
/// jump, `values[k]` on `[jump_times[k-1], jump_times[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityPath {
    jump_times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl VelocityPath {
    pub fn new(jump_times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != jump_times.len() + 1 {
            return Err(Error::Domain(format!(
                "{} jumps need {} values, got {}",
                jump_times.len(),
                jump_times.len() + 1,
                values.len()
            )));
        }
        if jump_times.first().is_some_and(|&t| t <= 0.0)
            || jump_times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Domain(
                "jump times must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self { jump_times, values })
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self {
            jump_times: Vec::new(),
            values: vec![value],
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        &self.values[self.jump_times.partition_point(|&s| s <= t)]
    }
}

/// The step function t ↦ γ̇(t) of a trajectory, without jumps below
/// [`JUMP_FLOOR`].
pub fn velocity_path(traj: &Trajectory) -> VelocityPath {
    let mut jump_times = Vec::new();
    let mut values = vec![traj.breakpoints[0].velocity.clone()];
    for b in &traj.breakpoints[1..] {
        let last = values.last().unwrap();
        if distance(last, &b.velocity) > JUMP_FLOOR {
            jump_times.push(b.time);
            values.push(b.velocity.clone());
        }
    }
    VelocityPath { jump_times, values }
}

/// Sum of jump magnitudes.
pub fn total_variation(path: &VelocityPath) -> f64 {
    path.values.windows(2).map(|w| distance(&w[0], &w[1])).sum()
}

/// Σ |ξ(t_k) − ξ(t_{k−1})| over the given increasing partition: the
/// quantity whose supremum defines the variation.
pub fn partition_variation(path: &VelocityPath, partition: &[f64]) -> f64 {
    partition
        .windows(2)
        .map(|w| distance(path.value_at(w[0]), path.value_at(w[1])))
        .sum()
}

/// Variation of particle `i`'s velocity, walking its cluster chain.
fn particle_variation(result: &SimulationResult, i: usize) -> f64 {
    let mut total = 0.0;
    let mut kept: ClusterId = i;
    let mut c = i;
    while let Some(p) = result.cluster_parent(c) {
        let jump = distance(result.cluster_velocity(kept), result.cluster_velocity(p));
        if jump > JUMP_FLOOR {
            total += jump;
            kept = p;
        }
        c = p;
    }
    total
}

pub fn particle_variations(result: &SimulationResult) -> Vec<f64> {
    (0..result.len())
        .map(|i| particle_variation(result, i))
        .collect()
}

/// Σ m_i V(γ̇_i).
pub fn mass_avg_variation(result: &SimulationResult, masses: &[f64]) -> f64 {
    assert_eq!(masses.len(), result.len(), "one mass per particle");
    masses
        .iter()
        .enumerate()
        .map(|(i, m)| m * particle_variation(result, i))
        .sum()
}

/// Same quantity regrouped by cluster: every non-final cluster contributes
/// its mass times the velocity jump into its parent. Linear in the number
/// of clusters, independent of chain depth.
pub fn mass_avg_variation_by_cluster(result: &SimulationResult) -> f64 {
    (0..result.cluster_count())
        .filter_map(|c| {
            result.cluster_parent(c).map(|p| {
                result.cluster_mass(c)
                    * distance(result.cluster_velocity(c), result.cluster_velocity(p))
            })
        })
        .sum()
}

/// 2 · max_{i,j} |v_i(0) − v_j(0)|.
pub fn variation_bound(result: &SimulationResult) -> f64 {
    2.0 * result.initial_velocity_spread()
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationReport {
    pub per_particle: Vec<f64>,
    pub mass_average: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Slack allowed on top of the bound for rounding.
pub const BOUND_SLACK: f64 = 1e-9;

pub fn variation_report(result: &SimulationResult) -> VariationReport {
    let per_particle = particle_variations(result);
    let mass_average = result
        .masses()
        .iter()
        .zip(&per_particle)
        .map(|(m, v)| m * v)
        .sum();
    let bound = variation_bound(result);
    VariationReport {
        pass: mass_average <= bound + BOUND_SLACK,
        per_particle,
        mass_average,
        bound,
    }
}
