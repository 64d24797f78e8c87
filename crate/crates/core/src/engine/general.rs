//! Engine for any dimension: all pairs are predicted up front, and after
//! each event only pairs involving the new clusters are re-predicted.

use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

use super::{
    merged_state, next_valid, predict, Builder, ClusterId, EventQueue, Pending, Prediction,
    SimulationResult,
};
use crate::error::Result;
use crate::types::Scenario;

/// Disjoint-set forest over the sparse set of cluster ids touched by one event.
#[derive(Debug, Default)]
pub(crate) struct Dsu {
    parent: HashMap<ClusterId, ClusterId>,
}

impl Dsu {
    pub(crate) fn find(&mut self, x: ClusterId) -> ClusterId {
        let p = *self.parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let root = self.find(p);
        self.parent.insert(x, root);
        root
    }

    pub(crate) fn union(&mut self, a: ClusterId, b: ClusterId) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent.insert(hi, lo);
        }
    }

    /// Components with at least two members, each sorted, ordered by their
    /// smallest element.
    pub(crate) fn groups(&mut self) -> Vec<Vec<ClusterId>> {
        let keys: Vec<ClusterId> = self.parent.keys().copied().collect();
        let mut by_root: BTreeMap<ClusterId, Vec<ClusterId>> = BTreeMap::new();
        for k in keys {
            let r = self.find(k);
            by_root.entry(r).or_default().push(k);
        }
        let mut out: Vec<Vec<ClusterId>> = by_root
            .into_values()
            .filter(|g| g.len() >= 2)
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect();
        out.sort_by_key(|g| g[0]);
        out
    }
}

fn schedule(b: &mut Builder, queue: &mut EventQueue, a: ClusterId, c: ClusterId, now: f64) {
    let h = &b.history;
    let xa = h.position_at(a, now);
    let xc = h.position_at(c, now);
    match predict(&xa, h.velocity(a), &xc, h.velocity(c), now, b.tolerances.x_hit) {
        Prediction::Hit(time) => queue.push(Reverse(Pending {
            time,
            a: a.min(c),
            b: a.max(c),
        })),
        Prediction::Grazing { time, distance } => b.warn(format!(
            "near miss between clusters {a} and {c} at t = {time}: closest approach {distance:e} exceeds x_hit"
        )),
        Prediction::Never => {}
    }
}

/// Build the sticky trajectories of `scenario` up to its horizon.
pub fn simulate(scenario: &Scenario) -> Result<SimulationResult> {
    let tol = *scenario.tolerances();
    let horizon = scenario.horizon();
    let n = scenario.len();
    let mut b = Builder::new(scenario);
    let mut alive = vec![true; n];
    let mut live: Vec<ClusterId> = (0..n).collect();
    let mut queue = EventQueue::new();
    for i in 0..n {
        for j in i + 1..n {
            schedule(&mut b, &mut queue, i, j, 0.0);
        }
    }

    let complete = loop {
        let Some(t0) = next_valid(&mut queue, &alive) else {
            break true;
        };
        if t0 > horizon {
            break false;
        }
        let window = t0 + tol.t_group;
        let mut dsu = Dsu::default();
        while let Some(Reverse(p)) = queue.peek().copied() {
            if p.time > window {
                break;
            }
            queue.pop();
            if alive[p.a] && alive[p.b] {
                dsu.union(p.a, p.b);
            }
        }

        // A merged group may itself meet another cluster inside the window;
        // such meetings belong to this event.
        loop {
            let groups = dsu.groups();
            let states: Vec<_> = groups
                .iter()
                .map(|g| merged_state(&b.history, g, t0))
                .collect();
            let group_of: HashMap<ClusterId, usize> = groups
                .iter()
                .enumerate()
                .flat_map(|(gi, g)| g.iter().map(move |&c| (c, gi)))
                .collect();
            let mut joins = Vec::new();
            for (gi, g) in groups.iter().enumerate() {
                for &k in &live {
                    let (xk, vk) = match group_of.get(&k) {
                        Some(&gk) if gk <= gi => continue,
                        Some(&gk) => (states[gk].position.clone(), states[gk].velocity.clone()),
                        None => (b.history.position_at(k, t0), b.history.velocity(k).to_vec()),
                    };
                    let s = &states[gi];
                    if let Prediction::Hit(t) =
                        predict(&s.position, &s.velocity, &xk, &vk, t0, tol.x_hit)
                    {
                        if t <= window {
                            joins.push((g[0], k));
                        }
                    }
                }
            }
            if joins.is_empty() {
                break;
            }
            for (a, k) in joins {
                dsu.union(a, k);
            }
        }

        let groups = dsu.groups();
        let created = b.commit(t0, groups.clone())?;
        for g in &groups {
            for &c in g {
                alive[c] = false;
            }
        }
        alive.resize(b.history.len(), true);
        live.retain(|&c| alive[c]);
        for (idx, &c) in created.iter().enumerate() {
            for k in live.clone() {
                schedule(&mut b, &mut queue, c, k, t0);
            }
            for &other in &created[idx + 1..] {
                schedule(&mut b, &mut queue, c, other, t0);
            }
        }
        live.extend(created);
    };
    Ok(b.finish(complete))
}
