//! Domain vocabulary: initial particles, scenarios, clusters, trajectories
//! and finitely supported probability measures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{advance, exact_sum};

/// Total mass of a scenario may differ from 1 by at most this much.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Grid used by [`AtomicMeasure::canonicalize`] to decide point equality.
pub const CANONICAL_GRID: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleInit {
    #[serde(rename = "m")]
    pub mass: f64,
    #[serde(rename = "x")]
    pub position: Vec<f64>,
    #[serde(rename = "v")]
    pub velocity: Vec<f64>,
}

impl ParticleInit {
    pub fn new(mass: f64, position: Vec<f64>, velocity: Vec<f64>) -> Self {
        Self {
            mass,
            position,
            velocity,
        }
    }

    pub fn new_1d(mass: f64, position: f64, velocity: f64) -> Self {
        Self::new(mass, vec![position], vec![velocity])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineTolerances {
    /// Collision predictions within this window of the earliest pending one
    /// are processed as a single event.
    pub t_group: f64,
    /// Two clusters closer than this at closest approach collide (d > 1).
    pub x_hit: f64,
    /// Absolute error budget for weak-form residual quadrature.
    pub residual_quad: f64,
}

impl Default for EngineTolerances {
    fn default() -> Self {
        Self {
            t_group: 1e-9,
            x_hit: 1e-9,
            residual_quad: 1e-8,
        }
    }
}

impl EngineTolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_group", self.t_group),
            ("x_hit", self.x_hit),
            ("residual_quad", self.residual_quad),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "tolerance {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawScenario {
    particles: Vec<ParticleInit>,
    horizon: f64,
    #[serde(default)]
    tolerances: EngineTolerances,
}

/// Validated initial data: masses summing to one, distinct positions, one
/// common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenario")]
pub struct Scenario {
    particles: Vec<ParticleInit>,
    horizon: f64,
    tolerances: EngineTolerances,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;

    fn try_from(raw: RawScenario) -> Result<Self> {
        Scenario::new(raw.particles, raw.horizon, raw.tolerances)
    }
}

impl Scenario {
    pub fn new(
        particles: Vec<ParticleInit>,
        horizon: f64,
        tolerances: EngineTolerances,
    ) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidScenario("no particles".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        tolerances.validate()?;
        let dim = particles[0].position.len();
        if dim == 0 {
            return Err(Error::InvalidScenario("zero-dimensional particles".into()));
        }
        for (i, p) in particles.iter().enumerate() {
            if p.position.len() != dim || p.velocity.len() != dim {
                return Err(Error::InvalidScenario(format!(
                    "particle {i} has dimension {}/{} but the scenario is {dim}-dimensional",
                    p.position.len(),
                    p.velocity.len()
                )));
            }
            if !(p.mass > 0.0 && p.mass.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "particle {i} has non-positive mass {}",
                    p.mass
                )));
            }
            if p.position.iter().chain(&p.velocity).any(|c| !c.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "particle {i} has a non-finite coordinate"
                )));
            }
        }
        let total = exact_sum(particles.iter().map(|p| p.mass));
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidScenario(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        check_distinct(&particles)?;
        Ok(Self {
            particles,
            horizon,
            tolerances,
        })
    }

    pub fn particles(&self) -> &[ParticleInit] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].position.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn tolerances(&self) -> &EngineTolerances {
        &self.tolerances
    }

    pub fn masses(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.mass).collect()
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tolerances: EngineTolerances) -> Result<Self> {
        tolerances.validate()?;
        self.tolerances = tolerances;
        Ok(self)
    }

    /// Largest pairwise distance between initial velocities.
    pub fn velocity_spread(&self) -> f64 {
        if self.dim() == 1 {
            let (lo, hi) = self
                .particles
                .iter()
                .map(|p| p.velocity[0])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            return hi - lo;
        }
        let mut best: f64 = 0.0;
        for (i, a) in self.particles.iter().enumerate() {
            for b in &self.particles[i + 1..] {
                best = best.max(crate::numeric::distance(&a.velocity, &b.velocity));
            }
        }
        best
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn check_distinct(particles: &[ParticleInit]) -> Result<()> {
    let mut order: Vec<usize> = (0..particles.len()).collect();
    order.sort_by(|&a, &b| {
        let pa = &particles[a].position;
        let pb = &particles[b].position;
        pa.iter()
            .zip(pb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for w in order.windows(2) {
        if particles[w[0]].position == particles[w[1]].position {
            let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(Error::DegenerateInput {
                first,
                second,
                position: particles[first].position.clone(),
            });
        }
    }
    Ok(())
}

/// A merged group of original particles moving along one affine path.
/// `position` is the location at `born_at`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<usize>,
    pub mass: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub born_at: f64,
}

impl Cluster {
    pub fn position_at(&self, t: f64) -> Vec<f64> {
        advance(&self.position, &self.velocity, t - self.born_at)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoint {
    pub time: f64,
    pub position: Vec<f64>,
    /// Right velocity, in force on `[time, next breakpoint)`.
    pub velocity: Vec<f64>,
}

/// Piecewise-affine path of one original particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub breakpoints: Vec<Breakpoint>,
}

impl Trajectory {
    pub fn new(breakpoints: Vec<Breakpoint>) -> Self {
        debug_assert!(!breakpoints.is_empty());
        Self { breakpoints }
    }

    pub fn dim(&self) -> usize {
        self.breakpoints[0].position.len()
    }

    fn segment_index(&self, t: f64) -> usize {
        self.breakpoints
            .partition_point(|b| b.time <= t)
            .saturating_sub(1)
    }

    /// Position and right velocity at `t`. Exactly at a breakpoint the later
    /// segment's velocity is returned.
    pub fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let b = &self.breakpoints[self.segment_index(t)];
        (
            advance(&b.position, &b.velocity, t - b.time),
            b.velocity.clone(),
        )
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        self.eval(t).0
    }

    pub fn velocity(&self, t: f64) -> &[f64] {
        &self.breakpoints[self.segment_index(t)].velocity
    }
}

/// Free-function form of [`Trajectory::eval`].
pub fn eval_trajectory(traj: &Trajectory, t: f64) -> (Vec<f64>, Vec<f64>) {
    traj.eval(t)
}

/// Finitely many weighted points in R^dim; weights are positive and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    weights: Vec<f64>,
    points: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(dim: usize, weights: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != dim * weights.len() {
            return Err(Error::Domain(format!(
                "{} coordinates do not describe {} atoms in dimension {dim}",
                points.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::Domain("a probability measure needs an atom".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Domain(format!("non-positive atom weight {w}")));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("non-finite atom location".into()));
        }
        let total = exact_sum(weights.iter().copied());
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Domain(format!("atom weights sum to {total}, expected 1")));
        }
        Ok(Self {
            dim,
            weights,
            points,
        })
    }

    /// One-dimensional measure from `(weight, point)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            1,
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        Self {
            dim: point.len(),
            weights: vec![1.0],
            points: point,
        }
    }

    pub(crate) fn from_parts_unchecked(dim: usize, weights: Vec<f64>, points: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), dim * weights.len());
        Self {
            dim,
            weights,
            points,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flat coordinates, `dim` per atom.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights
            .iter()
            .copied()
            .zip(self.points.chunks_exact(self.dim))
    }

    pub fn total_weight(&self) -> f64 {
        exact_sum(self.weights.iter().copied())
    }

    /// Merge atoms whose points agree after rounding to [`CANONICAL_GRID`].
    /// Atoms come back sorted by point; the first point of each merged
    /// group is kept.
    pub fn canonicalize(&self) -> AtomicMeasure {
        let mut groups: BTreeMap<Vec<OrdKey>, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (w, p) in self.atoms() {
            let key: Vec<OrdKey> = p
                .iter()
                .map(|c| OrdKey((c / CANONICAL_GRID).round() + 0.0))
                .collect();
            groups
                .entry(key)
                .or_insert_with(|| (p.to_vec(), Vec::new()))
                .1
                .push(w);
        }
        let mut weights = Vec::with_capacity(groups.len());
        let mut points = Vec::with_capacity(groups.len() * self.dim);
        for (_, (p, ws)) in groups {
            weights.push(exact_sum(ws));
            points.extend(p);
        }
        AtomicMeasure::from_parts_unchecked(self.dim, weights, points)
    }
}

pub fn canonicalize(measure: &AtomicMeasure) -> AtomicMeasure {
    measure.canonicalize()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdKey(f64);

impl Eq for OrdKey {}

impl PartialOrd for OrdKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn measure(pairs: &[(f64, f64)]) -> AtomicMeasure {
        AtomicMeasure::from_pairs(pairs).unwrap()
    }

    fn pairs(m: &AtomicMeasure) -> Vec<(f64, f64)> {
        m.atoms().map(|(w, p)| (w, p[0])).collect()
    }

    #[test]
    fn canonicalize_merges_coincident_atoms() {
        assert_eq!(pairs(&measure(&[(0.5, 0.0), (0.5, 0.0)]).canonicalize()), [(1.0, 0.0)]);
        assert_eq!(
            pairs(&measure(&[(0.3, 1.0), (0.7, 2.0)]).canonicalize()),
            [(0.3, 1.0), (0.7, 2.0)]
        );
        assert_eq!(
            pairs(&measure(&[(0.25, 1.0), (0.25, 1.0), (0.5, -1.0)]).canonicalize()),
            [(0.5, -1.0), (0.5, 1.0)]
        );
    }

    #[test]
    fn measure_rejects_bad_weights() {
        assert!(AtomicMeasure::from_pairs(&[(0.5, 0.0)]).is_err());
        assert!(AtomicMeasure::from_pairs(&[(1.5, 0.0), (-0.5, 1.0)]).is_err());
        assert!(AtomicMeasure::from_pairs(&[]).is_err());
    }

    #[test]
    fn scenario_validation() {
        let tol = EngineTolerances::default();
        let ok = Scenario::new(
            vec![
                ParticleInit::new_1d(0.5, 0.0, 1.0),
                ParticleInit::new_1d(0.5, 1.0, -1.0),
            ],
            1.0,
            tol,
        );
        assert!(ok.is_ok());
        let dup = Scenario::new(
            vec![
                ParticleInit::new_1d(0.25, 0.0, 1.0),
                ParticleInit::new_1d(0.25, 3.0, 1.0),
                ParticleInit::new_1d(0.5, 0.0, -1.0),
            ],
            1.0,
            tol,
        );
        match dup {
            Err(Error::DegenerateInput { first, second, .. }) => {
                assert_eq!((first, second), (0, 2))
            }
            other => panic!("expected DegenerateInput, got {other:?}"),
        }
        let heavy = Scenario::new(vec![ParticleInit::new_1d(0.9, 0.0, 0.0)], 1.0, tol);
        assert!(matches!(heavy, Err(Error::InvalidScenario(_))));
        let mixed = Scenario::new(
            vec![
                ParticleInit::new_1d(0.5, 0.0, 0.0),
                ParticleInit::new(0.5, vec![1.0, 0.0], vec![0.0, 0.0]),
            ],
            1.0,
            tol,
        );
        assert!(mixed.is_err());
        let bad_tol = EngineTolerances {
            t_group: 0.0,
            ..tol
        };
        assert!(Scenario::new(vec![ParticleInit::new_1d(1.0, 0.0, 0.0)], 1.0, bad_tol).is_err());
        assert!(Scenario::new(vec![ParticleInit::new_1d(1.0, 0.0, 0.0)], -1.0, tol).is_err());
    }

    #[test]
    fn scenario_json_layout() {
        let text = r#"{"particles":[{"m":0.5,"x":[0.0],"v":[1.0]},{"m":0.5,"x":[1.0],"v":[-1.0]}],"horizon":2.0}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.tolerances(), &EngineTolerances::default());
        let dup = r#"{"particles":[{"m":0.5,"x":[0.0],"v":[1.0]},{"m":0.5,"x":[0.0],"v":[-1.0]}],"horizon":2.0}"#;
        assert!(Scenario::from_json(dup).is_err());
    }

    #[test]
    fn trajectory_eval_is_right_continuous() {
        let traj = Trajectory::new(vec![
            Breakpoint {
                time: 0.0,
                position: vec![0.0],
                velocity: vec![1.0],
            },
            Breakpoint {
                time: 0.5,
                position: vec![0.5],
                velocity: vec![0.0],
            },
        ]);
        assert_eq!(traj.eval(0.25), (vec![0.25], vec![1.0]));
        assert_eq!(traj.eval(0.5), (vec![0.5], vec![0.0]));
        assert_eq!(traj.eval(2.0), (vec![0.5], vec![0.0]));
        let single = Trajectory::new(vec![Breakpoint {
            time: 0.0,
            position: vec![0.0],
            velocity: vec![1.0],
        }]);
        assert_eq!(eval_trajectory(&single, 2.0), (vec![2.0], vec![1.0]));
    }

    fn scenario_strategy() -> impl Strategy<Value = Scenario> {
        (1usize..6, 1usize..4)
            .prop_flat_map(|(n, d)| {
                (
                    prop::collection::vec(0.01f64..1.0, n),
                    prop::collection::vec(-1e3f64..1e3, n * d),
                    prop::collection::vec(-10.0f64..10.0, n * d),
                    0.1f64..100.0,
                    Just(d),
                )
            })
            .prop_filter_map("degenerate", |(w, x, v, horizon, d)| {
                let total: f64 = w.iter().sum();
                let mut masses: Vec<f64> = w.iter().map(|w| w / total).collect();
                let rest = 1.0 - masses[1..].iter().sum::<f64>();
                masses[0] = rest;
                let particles = masses
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| {
                        ParticleInit::new(
                            m,
                            x[i * d..(i + 1) * d].to_vec(),
                            v[i * d..(i + 1) * d].to_vec(),
                        )
                    })
                    .collect();
                Scenario::new(particles, horizon, EngineTolerances::default()).ok()
            })
    }

    proptest! {
        #[test]
        fn scenario_json_round_trip_is_bit_exact(s in scenario_strategy()) {
            let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
            for (a, b) in s.particles().iter().zip(back.particles()) {
                prop_assert_eq!(a.mass.to_bits(), b.mass.to_bits());
                for (x, y) in a.position.iter().chain(&a.velocity).zip(b.position.iter().chain(&b.velocity)) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(s.horizon().to_bits(), back.horizon().to_bits());
            prop_assert_eq!(s, back);
        }

        #[test]
        fn canonicalize_idempotent_and_weight_preserving(
            raw in prop::collection::vec((1u32..64, -4i32..4), 1..12)
        ) {
            // dyadic weights keep every partial sum exact
            let total: u32 = raw.iter().map(|r| r.0).sum();
            let scale = (total + 1).next_power_of_two();
            let mut pairs: Vec<(f64, f64)> = raw.iter().map(|&(w, p)| (w as f64 / scale as f64, p as f64 * 0.5)).collect();
            let used: f64 = pairs.iter().map(|p| p.0).sum();
            pairs.push((1.0 - used, 10.0));
            let m = AtomicMeasure::from_pairs(&pairs).unwrap();
            let once = m.canonicalize();
            prop_assert_eq!(once.total_weight(), m.total_weight());
            prop_assert_eq!(once.canonicalize(), once);
        }
    }
}
