//! One-dimensional optimal transport: exact W₁ between atomic measures and
//! the velocity pushforward curve t ↦ v(·, t)_#ρ_t of a 1D solution.

use crate::engine::SimulationResult;
use crate::error::{Error, Result};
use crate::numeric::ExactSum;
use crate::types::AtomicMeasure;

/// ∫ |F(x)| dx where F is the cumulative sum of the signed point masses.
/// The signed weights must sum to zero.
fn signed_cdf_l1(atoms: &mut [(f64, f64)]) -> f64 {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf = ExactSum::new();
    let mut total = ExactSum::new();
    for w in atoms.windows(2) {
        cdf.add(w[0].1);
        let gap = w[1].0 - w[0].0;
        if gap > 0.0 {
            total.add(cdf.value().abs() * gap);
        }
    }
    total.value()
}

fn require_line(measure: &AtomicMeasure) -> Result<()> {
    if measure.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: measure.dim(),
        });
    }
    Ok(())
}

/// W₁(μ, ν) = ∫ |F_μ − F_ν| dx, by a sorted sweep over all atoms.
pub fn w1(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<f64> {
    require_line(mu)?;
    require_line(nu)?;
    let mut atoms: Vec<(f64, f64)> = mu
        .atoms()
        .map(|(w, p)| (p[0], w))
        .chain(nu.atoms().map(|(w, p)| (p[0], -w)))
        .collect();
    Ok(signed_cdf_l1(&mut atoms))
}

/// Right-continuous step curve of velocity distributions: `measures[k]` is
/// in force on `[event_times[k], event_times[k + 1])`, the last one forever.
#[derive(Debug, Clone, PartialEq)]
pub struct PushforwardCurve {
    pub event_times: Vec<f64>,
    pub measures: Vec<AtomicMeasure>,
}

impl PushforwardCurve {
    pub fn at(&self, t: f64) -> &AtomicMeasure {
        let k = self.event_times.partition_point(|&s| s <= t);
        &self.measures[k.saturating_sub(1)]
    }
}

/// v(·, t)_#ρ_t: atoms (cluster mass, cluster velocity) over the clusters
/// alive at `t`.
pub fn velocity_pushforward(result: &SimulationResult, t: f64) -> Result<AtomicMeasure> {
    if result.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: result.dim(),
        });
    }
    let clusters = result.alive_at(t);
    let weights = clusters.iter().map(|&c| result.cluster_mass(c)).collect();
    let points = clusters.iter().map(|&c| result.cluster_velocity(c)[0]).collect();
    Ok(AtomicMeasure::from_parts_unchecked(1, weights, points))
}

/// The whole curve, one measure per inter-event interval. Memory is
/// O(events × clusters); use [`pushforward_variation`] for large systems.
pub fn pushforward_curve(result: &SimulationResult) -> Result<PushforwardCurve> {
    let mut event_times = vec![0.0];
    event_times.extend(result.event_times());
    let measures = event_times
        .iter()
        .map(|&t| velocity_pushforward(result, t))
        .collect::<Result<_>>()?;
    Ok(PushforwardCurve {
        event_times,
        measures,
    })
}

/// Σ_k W₁(measure_k, measure_{k−1}), the variation of a step curve.
pub fn curve_variation(curve: &PushforwardCurve) -> Result<f64> {
    let mut total = 0.0;
    for w in curve.measures.windows(2) {
        total += w1(&w[1], &w[0])?;
    }
    Ok(total)
}

/// Variation of the pushforward curve computed event by event. Atoms not
/// involved in an event cancel in F_after − F_before, so each jump only
/// needs the colliding clusters and their merged replacements.
pub fn pushforward_variation(result: &SimulationResult) -> Result<f64> {
    if result.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: result.dim(),
        });
    }
    let mut total = 0.0;
    let mut atoms = Vec::new();
    for e in result.events() {
        atoms.clear();
        for g in &e.groups {
            for &c in &g.clusters {
                atoms.push((result.cluster_velocity(c)[0], -result.cluster_mass(c)));
            }
            atoms.push((g.post_velocity[0], result.cluster_mass(g.merged)));
        }
        total += signed_cdf_l1(&mut atoms);
    }
    Ok(total)
}
