//! Collision-time prediction for two clusters in free flight.

use crate::types::Cluster;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Prediction {
    Never,
    Hit(f64),
    /// Closest approach within `(x_hit, 2 x_hit]`: reported, never merged.
    Grazing { time: f64, distance: f64 },
}

/// Prediction from positions `xa`, `xb` at time `now` and constant velocities.
pub(crate) fn predict(xa: &[f64], va: &[f64], xb: &[f64], vb: &[f64], now: f64, x_hit: f64) -> Prediction {
    if xa.len() == 1 {
        return match collision_time_1d(xa[0], va[0], xb[0], vb[0], now) {
            Some(t) => Prediction::Hit(t),
            None => Prediction::Never,
        };
    }
    let rel = |k: usize| (xb[k] - xa[k], vb[k] - va[k]);
    let (mut dv2, mut gap2, mut dxdv) = (0.0, 0.0, 0.0);
    for k in 0..xa.len() {
        let (dx, dv) = rel(k);
        dv2 += dv * dv;
        gap2 += dx * dx;
        dxdv += dx * dv;
    }
    let gap = gap2.sqrt();
    if dv2 == 0.0 {
        return if gap <= x_hit {
            Prediction::Hit(now)
        } else {
            Prediction::Never
        };
    }
    let tau = -dxdv / dv2;
    if tau <= 0.0 {
        return if gap <= x_hit {
            Prediction::Hit(now)
        } else {
            Prediction::Never
        };
    }
    // evaluated componentwise; |dx|² - (dx·dv)²/|dv|² cancels catastrophically
    let closest = (0..xa.len())
        .map(|k| {
            let (dx, dv) = rel(k);
            let c = dx + tau * dv;
            c * c
        })
        .sum::<f64>()
        .sqrt();
    if closest <= x_hit {
        Prediction::Hit(now + tau)
    } else if closest <= 2.0 * x_hit {
        Prediction::Grazing {
            time: now + tau,
            distance: closest,
        }
    } else {
        Prediction::Never
    }
}

/// First meeting time of `xl + (t-now) vl` and `xr + (t-now) vr`; `None`
/// unless the pair is approaching.
#[inline]
pub(crate) fn collision_time_1d(xa: f64, va: f64, xb: f64, vb: f64, now: f64) -> Option<f64> {
    let gap = xb - xa;
    if gap == 0.0 {
        return if va != vb { Some(now) } else { None };
    }
    // approaching iff the gap shrinks; equal velocities never collide
    let closing = if gap > 0.0 { va > vb } else { vb > va };
    if !closing {
        return None;
    }
    Some(now + gap / (va - vb))
}

/// Earliest time after `now` at which the free paths of `a` and `b` meet.
/// In one dimension the meeting time is exact; for `d > 1` a pair counts
/// as meeting when its closest approach is within `x_hit`, and the time of
/// closest approach is returned.
pub fn pair_collision_time(a: &Cluster, b: &Cluster, now: f64, x_hit: f64) -> Option<f64> {
    let xa = a.position_at(now);
    let xb = b.position_at(now);
    match predict(&xa, &a.velocity, &xb, &b.velocity, now, x_hit) {
        Prediction::Hit(t) => Some(t),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster(x: Vec<f64>, v: Vec<f64>) -> Cluster {
        Cluster {
            members: vec![0],
            mass: 0.5,
            position: x,
            velocity: v,
            born_at: 0.0,
        }
    }

    #[test]
    fn head_on_1d() {
        let a = cluster(vec![0.0], vec![1.0]);
        let b = cluster(vec![1.0], vec![-1.0]);
        assert_eq!(pair_collision_time(&a, &b, 0.0, 1e-9), Some(0.5));
        assert_eq!(pair_collision_time(&b, &a, 0.0, 1e-9), Some(0.5));
    }

    #[test]
    fn diverging_1d() {
        let a = cluster(vec![0.0], vec![1.0]);
        let b = cluster(vec![1.0], vec![2.0]);
        assert_eq!(pair_collision_time(&a, &b, 0.0, 1e-9), None);
        let same = cluster(vec![1.0], vec![1.0]);
        assert_eq!(pair_collision_time(&a, &same, 0.0, 1e-9), None);
    }

    #[test]
    fn chase_in_2d() {
        let a = cluster(vec![0.0, 0.0], vec![1.0, 1.0]);
        let b = cluster(vec![2.0, 2.0], vec![0.0, 0.0]);
        assert_eq!(pair_collision_time(&a, &b, 0.0, 1e-9), Some(2.0));
    }

    #[test]
    fn chase_in_2d_matches_closest_approach_scan() {
        // brute-force scan of |Δx(t)| on a fine grid
        let (mut best_t, mut best_d) = (0.0, f64::INFINITY);
        for k in 0..=400_000 {
            let t = k as f64 * 1e-5;
            let d = ((2.0 - t).powi(2) * 2.0).sqrt();
            if d < best_d {
                best_d = d;
                best_t = t;
            }
        }
        assert!(best_d < 1e-9);
        assert!((best_t - 2.0).abs() < 1e-5);
    }

    #[test]
    fn near_miss_is_grazing_not_hit() {
        let p = predict(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 1.5e-9], &[0.0, 0.0], 0.0, 1e-9);
        assert!(matches!(p, Prediction::Grazing { .. }));
        let p = predict(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 5e-9], &[0.0, 0.0], 0.0, 1e-9);
        assert_eq!(p, Prediction::Never);
        let p = predict(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 5e-10], &[0.0, 0.0], 0.0, 1e-9);
        assert_eq!(p, Prediction::Hit(2.0));
    }

    #[test]
    fn prediction_respects_now() {
        let mut a = cluster(vec![0.0], vec![1.0]);
        a.born_at = 1.0;
        let b = cluster(vec![3.0], vec![-1.0]);
        // at now = 1: a at 0, b at 2
        assert_eq!(pair_collision_time(&a, &b, 1.0, 1e-9), Some(2.0));
    }
}
