//! Construction of sticky particle trajectories.
//!
//! Clusters are immutable records: a merge retires its inputs and creates a
//! new record, so every particle's trajectory is the chain of clusters from
//! its leaf record up through successive parents. Storage is linear in the
//! number of particles plus events regardless of how deep the chains get.

mod fast1d;
mod general;
mod predict;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{advance_into, distance, ExactSum};
use crate::types::{Breakpoint, Cluster, EngineTolerances, Scenario, Trajectory};

pub use fast1d::simulate_1d_fast;
pub use general::simulate;
pub use predict::pair_collision_time;
pub(crate) use predict::{predict, Prediction};

pub type ClusterId = usize;

const NO_PARENT: usize = usize::MAX;

/// One sub-collection of clusters meeting at a common point.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionGroup {
    pub clusters: Vec<ClusterId>,
    pub location: Vec<f64>,
    pub pre_velocities: Vec<Vec<f64>>,
    pub post_velocity: Vec<f64>,
    pub merged: ClusterId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub groups: Vec<CollisionGroup>,
}

/// Serialized form of a [`CollisionEvent`]: each group lists the smallest
/// particle index of every colliding cluster, `post_v` the merged velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub groups: Vec<Vec<usize>>,
    pub post_v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct ClusterHistory {
    dim: usize,
    born_at: Vec<f64>,
    died_at: Vec<f64>,
    parent: Vec<usize>,
    mass: Vec<ExactSum>,
    position: Vec<f64>,
    velocity: Vec<f64>,
    children: Vec<Vec<ClusterId>>,
    representative: Vec<usize>,
}

impl ClusterHistory {
    fn from_scenario(scenario: &Scenario) -> Self {
        let n = scenario.len();
        let dim = scenario.dim();
        let mut h = ClusterHistory {
            dim,
            born_at: Vec::with_capacity(2 * n),
            died_at: Vec::with_capacity(2 * n),
            parent: Vec::with_capacity(2 * n),
            mass: Vec::with_capacity(2 * n),
            position: Vec::with_capacity(2 * n * dim),
            velocity: Vec::with_capacity(2 * n * dim),
            children: Vec::with_capacity(2 * n),
            representative: Vec::with_capacity(2 * n),
        };
        for (i, p) in scenario.particles().iter().enumerate() {
            h.push(0.0, ExactSum::from_value(p.mass), &p.position, &p.velocity, Vec::new(), i);
        }
        h
    }

    fn push(
        &mut self,
        born_at: f64,
        mass: ExactSum,
        position: &[f64],
        velocity: &[f64],
        children: Vec<ClusterId>,
        representative: usize,
    ) -> ClusterId {
        let id = self.born_at.len();
        self.born_at.push(born_at);
        self.died_at.push(f64::INFINITY);
        self.parent.push(NO_PARENT);
        self.mass.push(mass);
        self.position.extend_from_slice(position);
        self.velocity.extend_from_slice(velocity);
        self.children.push(children);
        self.representative.push(representative);
        id
    }

    fn len(&self) -> usize {
        self.born_at.len()
    }

    fn position(&self, c: ClusterId) -> &[f64] {
        &self.position[c * self.dim..(c + 1) * self.dim]
    }

    fn velocity(&self, c: ClusterId) -> &[f64] {
        &self.velocity[c * self.dim..(c + 1) * self.dim]
    }

    fn mass(&self, c: ClusterId) -> f64 {
        self.mass[c].value()
    }

    fn position_at_into(&self, c: ClusterId, t: f64, out: &mut [f64]) {
        advance_into(self.position(c), self.velocity(c), t - self.born_at[c], out);
    }

    fn position_at(&self, c: ClusterId, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.position_at_into(c, t, &mut out);
        out
    }

    fn position_1d(&self, c: ClusterId, t: f64) -> f64 {
        self.position[c] + (t - self.born_at[c]) * self.velocity[c]
    }
}

/// Merged state of a prospective group at time `t`.
#[derive(Debug, Clone)]
pub(crate) struct MergedState {
    mass: ExactSum,
    position: Vec<f64>,
    velocity: Vec<f64>,
    /// Largest distance of a constituent from `position` at `t`.
    spread: f64,
    /// Largest change of a constituent's velocity in the merge.
    velocity_jump: f64,
}

fn merged_state(h: &ClusterHistory, group: &[ClusterId], t: f64) -> MergedState {
    let dim = h.dim;
    let mut mass = ExactSum::new();
    for &c in group {
        mass.merge(&h.mass[c]);
    }
    let total = mass.value();
    let mut momentum = vec![0.0; dim];
    let mut moment = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    for &c in group {
        let m = h.mass(c);
        h.position_at_into(c, t, &mut scratch);
        for k in 0..dim {
            momentum[k] += m * h.velocity(c)[k];
            moment[k] += m * scratch[k];
        }
    }
    let velocity: Vec<f64> = momentum.iter().map(|p| p / total).collect();
    let position: Vec<f64> = moment.iter().map(|p| p / total).collect();
    let mut spread: f64 = 0.0;
    let mut velocity_jump: f64 = 0.0;
    for &c in group {
        h.position_at_into(c, t, &mut scratch);
        spread = spread.max(distance(&scratch, &position));
        velocity_jump = velocity_jump.max(distance(h.velocity(c), &velocity));
    }
    MergedState {
        mass,
        position,
        velocity,
        spread,
        velocity_jump,
    }
}

/// Queue entry for a predicted collision between two clusters.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pending {
    pub time: f64,
    pub a: ClusterId,
    pub b: ClusterId,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

pub(crate) type EventQueue = std::collections::BinaryHeap<std::cmp::Reverse<Pending>>;

/// Time of the earliest prediction whose clusters are both still alive;
/// stale entries are dropped on the way.
pub(crate) fn next_valid(queue: &mut EventQueue, alive: &[bool]) -> Option<f64> {
    while let Some(std::cmp::Reverse(p)) = queue.peek() {
        if alive[p.a] && alive[p.b] {
            return Some(p.time);
        }
        queue.pop();
    }
    None
}

/// Shared bookkeeping for both engines: owns the history and the event log.
pub(crate) struct Builder {
    tolerances: EngineTolerances,
    history: ClusterHistory,
    events: Vec<CollisionEvent>,
    warnings: Vec<String>,
    masses: Vec<f64>,
    horizon: f64,
}

impl Builder {
    fn new(scenario: &Scenario) -> Self {
        Self {
            tolerances: *scenario.tolerances(),
            history: ClusterHistory::from_scenario(scenario),
            events: Vec::new(),
            warnings: Vec::new(),
            masses: scenario.masses(),
            horizon: scenario.horizon(),
        }
    }

    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    /// Merge every group at time `t` and record one event. Groups must be
    /// disjoint sets of live clusters with at least two entries each.
    fn commit(&mut self, t: f64, groups: Vec<Vec<ClusterId>>) -> Result<Vec<ClusterId>> {
        self.commit_with(t, groups, true)
    }

    fn commit_with(
        &mut self,
        t: f64,
        mut groups: Vec<Vec<ClusterId>>,
        check_spread: bool,
    ) -> Result<Vec<ClusterId>> {
        // sorted so both engines sum momenta in the same order
        for group in &mut groups {
            group.sort_unstable();
        }
        let mut states = Vec::with_capacity(groups.len());
        for group in &groups {
            debug_assert!(group.len() >= 2);
            let state = merged_state(&self.history, group, t);
            let allowed = group.len() as f64 * self.tolerances.x_hit
                + 2.0 * self.tolerances.t_group * state.velocity_jump;
            if check_spread && state.spread > allowed {
                return Err(Error::ToleranceConflict {
                    time: t,
                    spread: state.spread,
                    allowed,
                });
            }
            states.push(state);
        }
        let mut records = Vec::with_capacity(groups.len());
        let mut created = Vec::with_capacity(groups.len());
        for (group, state) in groups.into_iter().zip(states) {
            let representative = group
                .iter()
                .map(|&c| self.history.representative[c])
                .min()
                .unwrap_or(usize::MAX);
            let id = self.history.push(
                t,
                state.mass,
                &state.position,
                &state.velocity,
                group.clone(),
                representative,
            );
            let pre_velocities = group
                .iter()
                .map(|&c| self.history.velocity(c).to_vec())
                .collect();
            for &c in &group {
                self.history.parent[c] = id;
                self.history.died_at[c] = t;
            }
            created.push(id);
            records.push(CollisionGroup {
                clusters: group,
                location: state.position,
                pre_velocities,
                post_velocity: state.velocity,
                merged: id,
            });
        }
        self.events.push(CollisionEvent {
            time: t,
            groups: records,
        });
        Ok(created)
    }

    fn finish(self, complete: bool) -> SimulationResult {
        SimulationResult {
            dim: self.history.dim,
            masses: self.masses,
            horizon: self.horizon,
            history: self.history,
            events: self.events,
            complete,
            warnings: self.warnings,
            tolerances: self.tolerances,
        }
    }
}

/// Output of a simulation: the cluster history from which every
/// trajectory is read, plus the event log.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    dim: usize,
    masses: Vec<f64>,
    horizon: f64,
    history: ClusterHistory,
    events: Vec<CollisionEvent>,
    complete: bool,
    warnings: Vec<String>,
    tolerances: EngineTolerances,
}

impl SimulationResult {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[CollisionEvent] {
        &self.events
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    /// True when no collision is pending after the horizon, i.e. the final
    /// clusters move affinely forever.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn tolerances(&self) -> &EngineTolerances {
        &self.tolerances
    }

    pub fn initial_position(&self, i: usize) -> &[f64] {
        self.history.position(i)
    }

    pub fn initial_velocity(&self, i: usize) -> &[f64] {
        self.history.velocity(i)
    }

    /// Largest distance between two initial velocities.
    pub fn initial_velocity_spread(&self) -> f64 {
        let n = self.len();
        if self.dim == 1 {
            let v = &self.history.velocity[..n];
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            return hi - lo;
        }
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(distance(self.initial_velocity(i), self.initial_velocity(j)));
            }
        }
        best
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn cluster_count(&self) -> usize {
        self.history.len()
    }

    pub fn cluster_born_at(&self, c: ClusterId) -> f64 {
        self.history.born_at[c]
    }

    pub fn cluster_died_at(&self, c: ClusterId) -> f64 {
        self.history.died_at[c]
    }

    pub fn cluster_parent(&self, c: ClusterId) -> Option<ClusterId> {
        let p = self.history.parent[c];
        (p != NO_PARENT).then_some(p)
    }

    pub fn cluster_children(&self, c: ClusterId) -> &[ClusterId] {
        &self.history.children[c]
    }

    pub fn cluster_mass(&self, c: ClusterId) -> f64 {
        self.history.mass(c)
    }

    pub fn cluster_velocity(&self, c: ClusterId) -> &[f64] {
        self.history.velocity(c)
    }

    /// Position at `born_at`.
    pub fn cluster_origin(&self, c: ClusterId) -> &[f64] {
        self.history.position(c)
    }

    pub fn cluster_position_at(&self, c: ClusterId, t: f64) -> Vec<f64> {
        self.history.position_at(c, t)
    }

    /// Smallest original particle index in the cluster.
    pub fn cluster_representative(&self, c: ClusterId) -> usize {
        self.history.representative[c]
    }

    pub fn cluster_members(&self, c: ClusterId) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![c];
        while let Some(k) = stack.pop() {
            let children = &self.history.children[k];
            if children.is_empty() {
                out.push(k);
            } else {
                stack.extend_from_slice(children);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn cluster(&self, c: ClusterId) -> Cluster {
        Cluster {
            members: self.cluster_members(c),
            mass: self.cluster_mass(c),
            position: self.history.position(c).to_vec(),
            velocity: self.history.velocity(c).to_vec(),
            born_at: self.history.born_at[c],
        }
    }

    /// Clusters alive after the last processed event.
    pub fn final_clusters(&self) -> Vec<Cluster> {
        (0..self.history.len())
            .filter(|&c| self.history.parent[c] == NO_PARENT)
            .map(|c| self.cluster(c))
            .collect()
    }

    /// Cluster carrying particle `i` at time `t` (the newer one at an event).
    pub fn cluster_of(&self, i: usize, t: f64) -> ClusterId {
        let mut c = i;
        loop {
            let p = self.history.parent[c];
            if p == NO_PARENT || self.history.born_at[p] > t {
                return c;
            }
            c = p;
        }
    }

    /// Cluster ids alive at `t`, in creation order.
    pub fn alive_at(&self, t: f64) -> Vec<ClusterId> {
        (0..self.history.len())
            .filter(|&c| self.history.born_at[c] <= t && t < self.history.died_at[c])
            .collect()
    }

    pub fn position(&self, i: usize, t: f64) -> Vec<f64> {
        self.history.position_at(self.cluster_of(i, t), t)
    }

    pub fn velocity(&self, i: usize, t: f64) -> &[f64] {
        self.history.velocity(self.cluster_of(i, t))
    }

    pub fn trajectory(&self, i: usize) -> Trajectory {
        let mut breakpoints = Vec::new();
        let mut c = i;
        loop {
            breakpoints.push(Breakpoint {
                time: self.history.born_at[c],
                position: self.history.position(c).to_vec(),
                velocity: self.history.velocity(c).to_vec(),
            });
            match self.history.parent[c] {
                NO_PARENT => break,
                p => c = p,
            }
        }
        Trajectory::new(breakpoints)
    }

    pub fn trajectories(&self) -> Vec<Trajectory> {
        (0..self.len()).map(|i| self.trajectory(i)).collect()
    }

    /// Σ m_i γ̇_i(t), summed over live clusters.
    pub fn momentum_at(&self, t: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for c in self.alive_at(t) {
            let m = self.cluster_mass(c);
            for (pk, vk) in p.iter_mut().zip(self.history.velocity(c)) {
                *pk += m * vk;
            }
        }
        p
    }

    pub fn kinetic_energy_at(&self, t: f64) -> f64 {
        self.alive_at(t)
            .into_iter()
            .map(|c| {
                let v = self.history.velocity(c);
                0.5 * self.cluster_mass(c) * crate::numeric::dot(v, v)
            })
            .sum()
    }

    pub fn event_records(&self) -> Vec<EventRecord> {
        self.events
            .iter()
            .map(|e| EventRecord {
                t: e.time,
                groups: e
                    .groups
                    .iter()
                    .map(|g| {
                        let mut reps: Vec<usize> = g
                            .clusters
                            .iter()
                            .map(|&c| self.history.representative[c])
                            .collect();
                        reps.sort_unstable();
                        reps
                    })
                    .collect(),
                post_v: e.groups.iter().map(|g| g.post_velocity.clone()).collect(),
            })
            .collect()
    }

    /// Rebuild a result from a scenario and a recorded event log, taking the
    /// logged merged velocities at face value. Used to audit logs produced
    /// elsewhere.
    pub fn replay(scenario: &Scenario, records: &[EventRecord]) -> Result<SimulationResult> {
        let mut builder = Builder::new(scenario);
        let n = scenario.len();
        let dim = scenario.dim();
        let mut current: Vec<ClusterId> = (0..n).collect();
        let mut last = 0.0;
        for (k, rec) in records.iter().enumerate() {
            if !(rec.t > last) || !rec.t.is_finite() {
                return Err(Error::InvalidEventLog(format!(
                    "event {k} at t = {} does not follow t = {last}",
                    rec.t
                )));
            }
            if rec.groups.len() != rec.post_v.len() {
                return Err(Error::InvalidEventLog(format!(
                    "event {k} has {} groups but {} velocities",
                    rec.groups.len(),
                    rec.post_v.len()
                )));
            }
            let mut groups = Vec::with_capacity(rec.groups.len());
            let mut seen = std::collections::HashSet::new();
            for g in &rec.groups {
                let mut clusters = Vec::with_capacity(g.len());
                for &i in g {
                    if i >= n {
                        return Err(Error::InvalidEventLog(format!(
                            "event {k} names particle {i}, scenario has {n}"
                        )));
                    }
                    let c = find_current(&builder.history, &mut current, i);
                    if !seen.insert(c) {
                        return Err(Error::InvalidEventLog(format!(
                            "event {k} names the cluster of particle {i} twice"
                        )));
                    }
                    clusters.push(c);
                }
                if clusters.len() < 2 {
                    return Err(Error::InvalidEventLog(format!(
                        "event {k} has a group with fewer than two clusters"
                    )));
                }
                groups.push(clusters);
            }
            for v in &rec.post_v {
                if v.len() != dim {
                    return Err(Error::InvalidEventLog(format!(
                        "event {k} velocity has dimension {}",
                        v.len()
                    )));
                }
            }
            // a replayed log is audited by the checkers, not here
            let created = builder.commit_with(rec.t, groups, false)?;
            for (&id, v) in created.iter().zip(&rec.post_v) {
                let range = id * dim..(id + 1) * dim;
                builder.history.velocity[range].copy_from_slice(v);
                if let Some(ev) = builder.events.last_mut() {
                    for g in ev.groups.iter_mut().filter(|g| g.merged == id) {
                        g.post_velocity = v.clone();
                    }
                }
            }
            last = rec.t;
        }
        Ok(builder.finish(true))
    }
}

fn find_current(h: &ClusterHistory, current: &mut [ClusterId], i: usize) -> ClusterId {
    let mut c = current[i];
    while h.parent[c] != NO_PARENT {
        c = h.parent[c];
    }
    current[i] = c;
    c
}
