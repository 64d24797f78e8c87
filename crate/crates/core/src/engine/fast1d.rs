//! One-dimensional engine. Trajectories never cross, so clusters stay in a
//! spatially ordered linked list and only neighbours can collide next.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use super::{
    merged_state, next_valid, Builder, ClusterId, EventQueue, MergedState, Pending,
    SimulationResult,
};
use crate::engine::predict::collision_time_1d;
use crate::error::{Error, Result};
use crate::types::Scenario;

const NONE: usize = usize::MAX;

struct Chain {
    prev: Vec<ClusterId>,
    next: Vec<ClusterId>,
}

impl Chain {
    fn grow(&mut self, len: usize) {
        self.prev.resize(len, NONE);
        self.next.resize(len, NONE);
    }
}

fn schedule(b: &Builder, queue: &mut EventQueue, left: ClusterId, right: ClusterId, now: f64) {
    let h = &b.history;
    let xl = h.position_1d(left, now);
    let xr = h.position_1d(right, now);
    if let Some(time) = collision_time_1d(xl, h.velocity[left], xr, h.velocity[right], now) {
        queue.push(Reverse(Pending {
            time,
            a: left,
            b: right,
        }));
    }
}

/// Maximal runs of clusters joined by `links` (a link on `c` joins `c` to
/// its right neighbour), each listed left to right.
fn runs(links: &BTreeSet<ClusterId>, chain: &Chain) -> Vec<Vec<ClusterId>> {
    let mut out = Vec::new();
    for &c in links {
        let p = chain.prev[c];
        if p != NONE && links.contains(&p) {
            continue;
        }
        let mut run = vec![c];
        let mut cur = c;
        while links.contains(&cur) {
            cur = chain.next[cur];
            run.push(cur);
        }
        out.push(run);
    }
    out
}

fn sorted_state(b: &Builder, run: &[ClusterId], t: f64) -> MergedState {
    let mut sorted = run.to_vec();
    sorted.sort_unstable();
    merged_state(&b.history, &sorted, t)
}

/// Same contract as [`super::simulate`] for one-dimensional scenarios, in
/// O(N log N) time.
pub fn simulate_1d_fast(scenario: &Scenario) -> Result<SimulationResult> {
    if scenario.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: scenario.dim(),
        });
    }
    let tol = *scenario.tolerances();
    let horizon = scenario.horizon();
    let n = scenario.len();
    let mut b = Builder::new(scenario);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b.history.position[i].total_cmp(&b.history.position[j]));
    let mut chain = Chain {
        prev: vec![NONE; n],
        next: vec![NONE; n],
    };
    for w in order.windows(2) {
        chain.next[w[0]] = w[1];
        chain.prev[w[1]] = w[0];
    }
    let mut alive = vec![true; n];
    let mut queue = EventQueue::with_capacity(n);
    for w in order.windows(2) {
        schedule(&b, &mut queue, w[0], w[1], 0.0);
    }

    let complete = loop {
        let Some(t0) = next_valid(&mut queue, &alive) else {
            break true;
        };
        if t0 > horizon {
            break false;
        }
        let window = t0 + tol.t_group;
        let mut links = BTreeSet::new();
        while let Some(Reverse(p)) = queue.peek().copied() {
            if p.time > window {
                break;
            }
            queue.pop();
            if alive[p.a] && alive[p.b] {
                links.insert(p.a);
            }
        }

        // extend runs whose merged state reaches a neighbour inside the window
        let groups = loop {
            let groups = runs(&links, &chain);
            let states: Vec<MergedState> = groups.iter().map(|g| sorted_state(&b, g, t0)).collect();
            let run_ending_at: HashMap<ClusterId, usize> = groups
                .iter()
                .enumerate()
                .map(|(i, g)| (*g.last().unwrap(), i))
                .collect();
            let run_starting_at: HashMap<ClusterId, usize> = groups
                .iter()
                .enumerate()
                .map(|(i, g)| (g[0], i))
                .collect();
            let mut grew = false;
            for (gi, g) in groups.iter().enumerate() {
                let s = &states[gi];
                let (x, v) = (s.position[0], s.velocity[0]);
                let left = chain.prev[g[0]];
                if left != NONE {
                    let (xl, vl) = match run_ending_at.get(&left) {
                        Some(&k) => (states[k].position[0], states[k].velocity[0]),
                        None => (b.history.position_1d(left, t0), b.history.velocity[left]),
                    };
                    if collision_time_1d(xl, vl, x, v, t0).is_some_and(|t| t <= window) {
                        grew |= links.insert(left);
                    }
                }
                let last = *g.last().unwrap();
                let right = chain.next[last];
                if right != NONE && !run_starting_at.contains_key(&right) {
                    let (xr, vr) = (b.history.position_1d(right, t0), b.history.velocity[right]);
                    if collision_time_1d(x, v, xr, vr, t0).is_some_and(|t| t <= window) {
                        grew |= links.insert(last);
                    }
                }
            }
            if !grew {
                break groups;
            }
        };

        let first_new = b.history.len();
        let created = b.commit(t0, groups.clone())?;
        chain.grow(b.history.len());
        alive.resize(b.history.len(), true);
        for (g, &id) in groups.iter().zip(&created) {
            for &c in g {
                alive[c] = false;
            }
            let l = chain.prev[g[0]];
            let r = chain.next[*g.last().unwrap()];
            chain.prev[id] = l;
            chain.next[id] = r;
            if l != NONE {
                chain.next[l] = id;
            }
            if r != NONE {
                chain.prev[r] = id;
            }
        }
        for &id in &created {
            let r = chain.next[id];
            if r != NONE {
                schedule(&b, &mut queue, id, r, t0);
            }
            let l = chain.prev[id];
            if l != NONE && l < first_new {
                schedule(&b, &mut queue, l, id, t0);
            }
        }
    };
    Ok(b.finish(complete))
}
