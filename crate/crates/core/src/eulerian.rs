//! Eulerian description of a particle solution: the density ρ_t = Σ m_i
//! δ_{γ_i(t)}, the velocity field on its support, and checkers for the
//! identities and inequalities the pair satisfies.

use rand::Rng;
use serde::Serialize;

use crate::engine::{ClusterId, SimulationResult};
use crate::error::{Error, Result};
use crate::numeric::{adaptive_gauss10, dot, norm, ExactSum};
use crate::types::AtomicMeasure;

/// Offset of the extra grid points placed on both sides of every event.
pub const EVENT_OFFSET: f64 = 1e-7;

/// ρ_t and v(·, t) at one instant. Atom `k` of `rho` is cluster
/// `clusters[k]` and moves with `velocities[k]`.
#[derive(Debug, Clone)]
pub struct EulerianSlice {
    pub time: f64,
    pub rho: AtomicMeasure,
    pub velocities: Vec<Vec<f64>>,
    pub clusters: Vec<ClusterId>,
}

impl EulerianSlice {
    /// v(x, t) for `x` in the support; `None` off the support.
    pub fn velocity_at(&self, x: &[f64]) -> Option<&[f64]> {
        (0..self.rho.len())
            .find(|&k| self.rho.point(k) == x)
            .map(|k| self.velocities[k].as_slice())
    }
}

pub fn slice(result: &SimulationResult, t: f64) -> EulerianSlice {
    let dim = result.dim();
    let clusters = result.alive_at(t);
    let mut weights = Vec::with_capacity(clusters.len());
    let mut points = Vec::with_capacity(clusters.len() * dim);
    let mut velocities = Vec::with_capacity(clusters.len());
    for &c in &clusters {
        weights.push(result.cluster_mass(c));
        points.extend(result.cluster_position_at(c, t));
        velocities.push(result.cluster_velocity(c).to_vec());
    }
    EulerianSlice {
        time: t,
        rho: AtomicMeasure::from_parts_unchecked(dim, weights, points),
        velocities,
        clusters,
    }
}

/// Sorted sampling grid on `[0, horizon]`: `samples` uniform points plus
/// every event time and the times [`EVENT_OFFSET`] before and after it.
pub fn event_grid(result: &SimulationResult, samples: usize) -> Vec<f64> {
    let horizon = result.horizon();
    let mut grid: Vec<f64> = (0..=samples)
        .map(|k| horizon * k as f64 / samples.max(1) as f64)
        .collect();
    for t in result.event_times() {
        grid.extend([t - EVENT_OFFSET, t, t + EVENT_OFFSET]);
    }
    grid.retain(|&t| (0.0..=horizon).contains(&t));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Vector maps g: R^d → R^d used to probe the averaging property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum VectorField {
    Constant(Vec<f64>),
    Identity,
    /// Componentwise x_k².
    Square,
    /// Componentwise sin(ω x_k).
    Sine(f64),
    /// Componentwise cos(ω x_k).
    Cosine(f64),
    Tanh,
    /// exp(−|x − c|² / w²) times the all-ones vector.
    Gaussian { center: Vec<f64>, width: f64 },
    /// Componentwise x_k³ − x_k.
    Cubic,
    /// Cyclic coordinate shift (x_2, …, x_d, x_1), a rotation-like map.
    Shift,
    /// Componentwise x_k |x_k|.
    SignedSquare,
}

impl VectorField {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        match self {
            VectorField::Constant(c) => c.clone(),
            VectorField::Identity => x.to_vec(),
            VectorField::Square => x.iter().map(|a| a * a).collect(),
            VectorField::Sine(w) => x.iter().map(|a| (w * a).sin()).collect(),
            VectorField::Cosine(w) => x.iter().map(|a| (w * a).cos()).collect(),
            VectorField::Tanh => x.iter().map(|a| a.tanh()).collect(),
            VectorField::Gaussian { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                vec![(-r2 / (width * width)).exp(); d]
            }
            VectorField::Cubic => x.iter().map(|a| a * a * a - a).collect(),
            VectorField::Shift => (0..d).map(|k| x[(k + 1) % d]).collect(),
            VectorField::SignedSquare => x.iter().map(|a| a * a.abs()).collect(),
        }
    }

    /// The ten maps used by the harness.
    pub fn standard_family(dim: usize) -> Vec<VectorField> {
        vec![
            VectorField::Constant((0..dim).map(|k| 1.0 - 0.5 * k as f64).collect()),
            VectorField::Identity,
            VectorField::Square,
            VectorField::Sine(3.0),
            VectorField::Cosine(1.7),
            VectorField::Tanh,
            VectorField::Gaussian {
                center: vec![0.5; dim],
                width: 0.7,
            },
            VectorField::Cubic,
            VectorField::Shift,
            VectorField::SignedSquare,
        ]
    }
}

/// |Σ m_i g(γ_i(t))·γ̇_i(t) − Σ m_i g(γ_i(t))·γ̇_i(s)| for `0 ≤ s ≤ t`.
pub fn check_averaging(result: &SimulationResult, s: f64, t: f64, g: &VectorField) -> Result<f64> {
    if !(0.0 <= s && s <= t) {
        return Err(Error::Domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
    }
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for i in 0..result.len() {
        let m = result.masses()[i];
        let ct = result.cluster_of(i, t);
        let gx = g.eval(&result.cluster_position_at(ct, t));
        lhs += m * dot(&gx, result.cluster_velocity(ct));
        rhs += m * dot(&gx, result.velocity(i, s));
    }
    Ok((lhs - rhs).abs())
}

/// Convex maps F: R^d → R for the monotonicity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConvexFunction {
    /// |y|² / 2, the kinetic energy density.
    HalfSquaredNorm,
    Norm,
    MaxComponent,
    /// Σ_k exp(y_k).
    ExpSum,
    DistanceTo(Vec<f64>),
    /// a·y, convex and concave.
    Linear(Vec<f64>),
}

impl ConvexFunction {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            ConvexFunction::HalfSquaredNorm => 0.5 * dot(y, y),
            ConvexFunction::Norm => norm(y),
            ConvexFunction::MaxComponent => y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ConvexFunction::ExpSum => y.iter().map(|a| a.exp()).sum(),
            ConvexFunction::DistanceTo(c) => crate::numeric::distance(y, c),
            ConvexFunction::Linear(a) => dot(a, y),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConvexFunction::HalfSquaredNorm => "half_squared_norm",
            ConvexFunction::Norm => "norm",
            ConvexFunction::MaxComponent => "max_component",
            ConvexFunction::ExpSum => "exp_sum",
            ConvexFunction::DistanceTo(_) => "distance_to",
            ConvexFunction::Linear(_) => "linear",
        }
    }

    /// The five maps used by the harness, with `c` the reference point of
    /// the distance function.
    pub fn standard_family(c: Vec<f64>) -> Vec<ConvexFunction> {
        vec![
            ConvexFunction::HalfSquaredNorm,
            ConvexFunction::Norm,
            ConvexFunction::MaxComponent,
            ConvexFunction::ExpSum,
            ConvexFunction::DistanceTo(c),
        ]
    }
}

/// Change of the step function t ↦ Σ_i m_i F(γ̇_i(t)) at every event.
fn functional_increments(result: &SimulationResult, f: &ConvexFunction) -> Vec<f64> {
    result
        .events()
        .iter()
        .map(|e| {
            e.groups
                .iter()
                .map(|g| {
                    let before: f64 = g
                        .clusters
                        .iter()
                        .map(|&c| result.cluster_mass(c) * f.eval(result.cluster_velocity(c)))
                        .sum();
                    result.cluster_mass(g.merged) * f.eval(&g.post_velocity) - before
                })
                .sum()
        })
        .collect()
}

/// Largest increase of Σ m_i F(γ̇_i(·)) between consecutive times of the
/// sorted grid `times`; 0 when it never increases.
pub fn check_convex_monotone(result: &SimulationResult, f: &ConvexFunction, times: &[f64]) -> f64 {
    let increments = functional_increments(result, f);
    let event_times = result.event_times();
    let mut worst: f64 = 0.0;
    for w in times.windows(2) {
        // events in (s, t] change the right-continuous value
        let from = event_times.partition_point(|&e| e <= w[0]);
        let to = event_times.partition_point(|&e| e <= w[1]);
        let change: f64 = increments[from..to].iter().sum();
        worst = worst.max(change);
    }
    // normalises a -0.0 from an all-negative scan
    worst + 0.0
}

/// Σ m_i F(γ̇_i(t)) evaluated directly over the live clusters.
pub fn convex_functional(result: &SimulationResult, f: &ConvexFunction, t: f64) -> f64 {
    result
        .alive_at(t)
        .into_iter()
        .map(|c| result.cluster_mass(c) * f.eval(result.cluster_velocity(c)))
        .sum()
}

/// Largest deviation of Σ m_i γ̇_i(t) from its initial value over all event
/// times. Live-cluster momenta are tracked with compensated sums.
pub fn momentum_drift(result: &SimulationResult) -> f64 {
    let dim = result.dim();
    let mut running = vec![ExactSum::new(); dim];
    for i in 0..result.len() {
        for (k, acc) in running.iter_mut().enumerate() {
            acc.add(result.masses()[i] * result.initial_velocity(i)[k]);
        }
    }
    let initial: Vec<f64> = running.iter().map(ExactSum::value).collect();
    let mut worst: f64 = 0.0;
    for e in result.events() {
        for g in &e.groups {
            for (k, acc) in running.iter_mut().enumerate() {
                for &c in &g.clusters {
                    acc.add(-result.cluster_mass(c) * result.cluster_velocity(c)[k]);
                }
                acc.add(result.cluster_mass(g.merged) * g.post_velocity[k]);
            }
        }
        let now: Vec<f64> = running.iter().map(ExactSum::value).collect();
        worst = worst.max(crate::numeric::distance(&now, &initial));
    }
    worst
}

/// Quartic bump (1 − s²)⁴ on |s| ≤ 1 and its derivative.
fn bump(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let u = 1.0 - s * s;
    let u3 = u * u * u;
    (u3 * u, -8.0 * s * u3)
}

/// Smooth compactly supported test function on R^d × [0, ∞): a tensor
/// product of quartic bumps, one per spatial axis and one in time. The
/// vector-valued version used in the momentum equation is
/// `direction · ψ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
    pub t_center: f64,
    pub t_radius: f64,
    pub direction: Vec<f64>,
}

impl TestFunction {
    pub fn new(
        center: Vec<f64>,
        radius: Vec<f64>,
        t_center: f64,
        t_radius: f64,
        direction: Vec<f64>,
    ) -> Result<Self> {
        if center.len() != radius.len() || center.len() != direction.len() || center.is_empty() {
            return Err(Error::Domain("test function axes disagree in length".into()));
        }
        if radius.iter().chain([&t_radius]).any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Domain("test function radii must be positive".into()));
        }
        Ok(Self {
            center,
            radius,
            t_center,
            t_radius,
            direction,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Time interval outside which the function vanishes.
    pub fn time_support(&self) -> (f64, f64) {
        (self.t_center - self.t_radius, self.t_center + self.t_radius)
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let mut v = bump((t - self.t_center) / self.t_radius).0;
        for k in 0..self.dim() {
            v *= bump((x[k] - self.center[k]) / self.radius[k]).0;
        }
        v
    }

    /// d/dt ψ(x + (t − t₀)v, t) = ∂_tψ + ∇ψ·v at `(x, t)`.
    pub fn derivative_along(&self, x: &[f64], t: f64, v: &[f64]) -> f64 {
        let d = self.dim();
        let (bt, dbt) = bump((t - self.t_center) / self.t_radius);
        let mut values = Vec::with_capacity(d);
        let mut slopes = Vec::with_capacity(d);
        for k in 0..d {
            let (b, db) = bump((x[k] - self.center[k]) / self.radius[k]);
            values.push(b);
            slopes.push(db / self.radius[k]);
        }
        let space: f64 = values.iter().product();
        let mut total = dbt / self.t_radius * space;
        for k in 0..d {
            let others: f64 = (0..d).filter(|&j| j != k).map(|j| values[j]).product();
            total += bt * slopes[k] * others * v[k];
        }
        total
    }

    /// Times in `[lo, hi]` at which `x + (t − t₀)v` lies in the support box.
    fn clip(&self, x0: &[f64], t0: f64, v: &[f64], lo: f64, hi: f64) -> Option<(f64, f64)> {
        let (ts, te) = self.time_support();
        let (mut a, mut b) = (lo.max(ts), hi.min(te));
        for k in 0..self.dim() {
            let (l, r) = (self.center[k] - self.radius[k], self.center[k] + self.radius[k]);
            if v[k] == 0.0 {
                if x0[k] <= l || x0[k] >= r {
                    return None;
                }
                continue;
            }
            let t1 = t0 + (l - x0[k]) / v[k];
            let t2 = t0 + (r - x0[k]) / v[k];
            a = a.max(t1.min(t2));
            b = b.min(t1.max(t2));
        }
        (a < b).then_some((a, b))
    }
}

/// Residuals of the weak mass and momentum equations for one test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakResidual {
    pub mass: f64,
    pub momentum: f64,
}

const QUADRATURE_DEPTH: u32 = 30;

/// Weak-form residuals for every test function, integrating along each
/// cluster segment with adaptive 10-point Gauss quadrature.
///
/// Mass: ∫∫(∂_tψ + ∇ψ·v) dρ_t dt + ∫ψ(·,0) dρ₀.
/// Momentum, with φ = e ψ: ∫∫(∂_tφ·v + ∇φ v·v) dρ_t dt + ∫φ(·,0)·v₀ dρ₀.
pub fn weak_residuals(result: &SimulationResult, tests: &[TestFunction]) -> Result<Vec<WeakResidual>> {
    let budget = result.tolerances().residual_quad;
    tests
        .iter()
        .map(|test| weak_residual(result, test, budget))
        .collect()
}

fn weak_residual(result: &SimulationResult, test: &TestFunction, budget: f64) -> Result<WeakResidual> {
    if test.dim() != result.dim() {
        return Err(Error::Dimension {
            expected: result.dim(),
            found: test.dim(),
        });
    }
    let (_, t_end) = test.time_support();
    if t_end > result.horizon() && !result.is_complete() {
        return Err(Error::Domain(format!(
            "test function support reaches t = {t_end}, past the simulated horizon {}",
            result.horizon()
        )));
    }
    let mut pieces = Vec::new();
    for c in 0..result.cluster_count() {
        let born = result.cluster_born_at(c);
        let died = result.cluster_died_at(c);
        let x0 = result.cluster_origin(c);
        let v = result.cluster_velocity(c);
        if let Some(window) = test.clip(x0, born, v, born, died) {
            pieces.push((c, window));
        }
    }
    let per_piece = budget / (4.0 * pieces.len().max(1) as f64);
    let mut mass = 0.0;
    let mut momentum = 0.0;
    for i in 0..result.len() {
        let psi0 = test.value(result.initial_position(i), 0.0);
        mass += result.masses()[i] * psi0;
        momentum += result.masses()[i] * psi0 * dot(&test.direction, result.initial_velocity(i));
    }
    let mut scratch = vec![0.0; result.dim()];
    for (c, (a, b)) in pieces {
        let born = result.cluster_born_at(c);
        let x0 = result.cluster_origin(c);
        let v = result.cluster_velocity(c);
        let mut integrand = |t: f64| {
            crate::numeric::advance_into(x0, v, t - born, &mut scratch);
            test.derivative_along(&scratch, t, v)
        };
        let Some((integral, _)) = adaptive_gauss10(a, b, per_piece, QUADRATURE_DEPTH, &mut integrand)
        else {
            return Err(Error::QuadratureBudgetExceeded {
                budget,
                estimate: f64::NAN,
            });
        };
        let m = result.cluster_mass(c);
        mass += m * integral;
        // ∂_tφ·v + ∇φ v·v = (e·v)(∂_tψ + ∇ψ·v) along a segment of velocity v
        momentum += m * dot(&test.direction, v) * integral;
    }
    Ok(WeakResidual { mass, momentum })
}

/// Random bump test functions centred on points of the trajectories, with
/// time supports inside `[0, horizon)`; about a third of them touch t = 0.
pub fn random_test_functions<R: Rng>(result: &SimulationResult, count: usize, rng: &mut R) -> Vec<TestFunction> {
    let horizon = result.horizon();
    let dim = result.dim();
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..result.len());
            let t = rng.random_range(0.0..0.8 * horizon);
            let mut center = result.position(i, t);
            for c in &mut center {
                *c += rng.random_range(-0.1..0.1);
            }
            let radius = (0..dim).map(|_| rng.random_range(0.05..1.0)).collect();
            let (t_center, t_radius) = if rng.random_bool(1.0 / 3.0) {
                (rng.random_range(0.0..0.3 * horizon), rng.random_range(0.3..0.6) * horizon)
            } else {
                let room = (horizon - t).min(t).max(1e-3 * horizon);
                (t, rng.random_range(0.2..0.99) * room)
            };
            let mut direction: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let len = norm(&direction).max(1e-3);
            direction.iter_mut().for_each(|e| *e /= len);
            TestFunction::new(center, radius, t_center, t_radius, direction)
                .expect("radii drawn positive")
        })
        .collect()
}

fn require_1d(result: &SimulationResult) -> Result<()> {
    if result.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: result.dim(),
        });
    }
    Ok(())
}

/// Positions and velocities of the live clusters at `t`, sorted by position.
fn ordered_atoms(result: &SimulationResult, t: f64) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = result
        .alive_at(t)
        .into_iter()
        .map(|c| (result.cluster_position_at(c, t)[0], result.cluster_velocity(c)[0]))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    atoms
}

/// Largest value of (v(x) − v(y))(x − y) − (x − y)²/t over atom pairs of
/// ρ_t and grid times t > 0 (times ≤ 0 are skipped). Quadratic in the
/// number of live clusters per time.
pub fn check_entropy_1d(result: &SimulationResult, times: &[f64]) -> Result<f64> {
    require_1d(result)?;
    let mut worst: f64 = 0.0;
    for &t in times.iter().filter(|&&t| t > 0.0) {
        let atoms = ordered_atoms(result, t);
        for (k, &(xa, va)) in atoms.iter().enumerate() {
            for &(xb, vb) in &atoms[k + 1..] {
                let dx = xb - xa;
                worst = worst.max((vb - va) * dx - dx * dx / t);
            }
        }
    }
    Ok(worst)
}

/// Largest value of |γ_i(t) − γ_j(t)|/t − |γ_i(s) − γ_j(s)|/s over pairs,
/// for `0 < s ≤ t`.
pub fn check_qspp_1d(result: &SimulationResult, s: f64, t: f64) -> Result<f64> {
    require_1d(result)?;
    if !(s > 0.0) {
        return Err(Error::Domain(format!("need s > 0, got {s}")));
    }
    if s > t {
        return Err(Error::Domain(format!("need s <= t, got s = {s}, t = {t}")));
    }
    // particles sharing a cluster at s share it at t, so cluster pairs suffice
    let at_s = result.alive_at(s);
    let pos: Vec<(f64, f64)> = at_s
        .iter()
        .map(|&c| {
            let i = result.cluster_representative(c);
            (result.cluster_position_at(c, s)[0], result.position(i, t)[0])
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (k, &(xs_a, xt_a)) in pos.iter().enumerate() {
        for &(xs_b, xt_b) in &pos[k + 1..] {
            worst = worst.max((xt_b - xt_a).abs() / t - (xs_b - xs_a).abs() / s);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::types::{EngineTolerances, ParticleInit, Scenario};
    use rand::SeedableRng;

    fn run(particles: Vec<ParticleInit>, horizon: f64) -> SimulationResult {
        simulate(&Scenario::new(particles, horizon, EngineTolerances::default()).unwrap()).unwrap()
    }

    fn head_on() -> SimulationResult {
        run(
            vec![ParticleInit::new_1d(0.5, 0.0, 1.0), ParticleInit::new_1d(0.5, 1.0, -1.0)],
            2.0,
        )
    }

    fn three() -> SimulationResult {
        run(
            vec![
                ParticleInit::new_1d(0.2, 0.0, 0.5),
                ParticleInit::new_1d(0.3, 1.0, 1.0),
                ParticleInit::new_1d(0.5, 2.0, -1.0),
            ],
            10.0,
        )
    }

    #[test]
    fn slices() {
        let r = three();
        let s0 = slice(&r, 0.0);
        assert_eq!(s0.rho.weights(), &[0.2, 0.3, 0.5]);
        let h = head_on();
        let s1 = slice(&h, 1.0);
        assert_eq!(s1.rho.len(), 1);
        assert_eq!(s1.rho.weights(), &[1.0]);
        assert_eq!(s1.velocity_at(&[0.5]), Some(&[0.0][..]));
        assert_eq!(s1.velocity_at(&[0.6]), None);
    }

    #[test]
    fn averaging_trivial_cases() {
        let r = three();
        let g = VectorField::Constant(vec![1.0]);
        assert!(check_averaging(&r, 0.0, 5.0, &g).unwrap() < 1e-15);
        assert_eq!(check_averaging(&r, 1.0, 1.0, &VectorField::Sine(2.0)).unwrap(), 0.0);
        let last = *r.event_times().last().unwrap();
        assert!(check_averaging(&r, 0.0, last + 1.0, &VectorField::Identity).unwrap() <= 1e-9);
        assert!(check_averaging(&r, 2.0, 1.0, &VectorField::Identity).is_err());
    }

    #[test]
    fn energy_drops_at_head_on_event() {
        let r = head_on();
        let f = ConvexFunction::HalfSquaredNorm;
        assert_eq!(convex_functional(&r, &f, 0.0), 0.5);
        assert_eq!(convex_functional(&r, &f, 0.5), 0.0);
        let grid = event_grid(&r, 10);
        assert_eq!(check_convex_monotone(&r, &f, &grid), 0.0);
        let lin = ConvexFunction::Linear(vec![2.0]);
        assert!(check_convex_monotone(&r, &lin, &grid) <= 1e-12);
        assert!(momentum_drift(&r) <= 1e-15);
    }

    #[test]
    fn grid_contains_event_neighbourhood() {
        let r = head_on();
        let grid = event_grid(&r, 4);
        for t in [0.0, 0.5 - EVENT_OFFSET, 0.5, 0.5 + EVENT_OFFSET, 2.0] {
            assert!(grid.contains(&t), "{t} missing");
        }
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bump_derivative_matches_difference_quotient() {
        let f = TestFunction::new(vec![0.1, -0.2], vec![0.7, 0.9], 0.5, 0.4, vec![1.0, 0.0]).unwrap();
        let x = [0.3, 0.1];
        let v = [0.4, -0.7];
        let t = 0.6;
        let h = 1e-6;
        let path = |s: f64| f.value(&[x[0] + (s - t) * v[0], x[1] + (s - t) * v[1]], s);
        let fd = (path(t + h) - path(t - h)) / (2.0 * h);
        assert!((fd - f.derivative_along(&x, t, &v)).abs() < 1e-8);
    }

    #[test]
    fn residual_zero_off_support_and_small_on_free_particle() {
        let r = head_on();
        let far = TestFunction::new(vec![10.0], vec![0.5], 1.0, 0.5, vec![1.0]).unwrap();
        let res = weak_residuals(&r, &[far]).unwrap()[0];
        assert_eq!(res, WeakResidual { mass: 0.0, momentum: 0.0 });

        let single = run(vec![ParticleInit::new_1d(1.0, 0.0, 0.3)], 3.0);
        let f = TestFunction::new(vec![0.1], vec![0.6], 0.2, 1.0, vec![1.0]).unwrap();
        let res = weak_residuals(&single, &[f]).unwrap()[0];
        assert!(res.mass.abs() <= 1e-10 && res.momentum.abs() <= 1e-10, "{res:?}");
    }

    #[test]
    fn residuals_on_colliding_scenario() {
        let r = three();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let tests = random_test_functions(&r, 20, &mut rng);
        for res in weak_residuals(&r, &tests).unwrap() {
            assert!(res.mass.abs() <= 1e-8 && res.momentum.abs() <= 1e-8, "{res:?}");
        }
    }

    #[test]
    fn residual_detects_wrong_velocity() {
        // replay the head-on collision with a merged velocity that breaks
        // momentum conservation
        let s = Scenario::new(
            vec![ParticleInit::new_1d(0.5, 0.0, 1.0), ParticleInit::new_1d(0.5, 1.0, -1.0)],
            2.0,
            EngineTolerances::default(),
        )
        .unwrap();
        let mut log = simulate(&s).unwrap().event_records();
        log[0].post_v = vec![vec![0.4]];
        let bad = SimulationResult::replay(&s, &log).unwrap();
        let f = TestFunction::new(vec![0.6], vec![0.5], 0.8, 0.6, vec![1.0]).unwrap();
        let res = weak_residuals(&bad, &[f]).unwrap()[0];
        assert!(res.momentum.abs() > 1e-3, "{res:?}");
    }

    #[test]
    fn entropy_and_qspp() {
        let r = head_on();
        assert_eq!(check_entropy_1d(&r, &[1.0]).unwrap(), 0.0);
        assert!(check_qspp_1d(&r, 0.6, 1.0).unwrap() <= 0.0);
        assert_eq!(check_qspp_1d(&r, 0.3, 0.3).unwrap(), 0.0);
        assert!(check_qspp_1d(&r, 0.0, 1.0).is_err());

        // diverging pair: (w_i − w_j)(a_i − a_j + t(w_i − w_j)) vs (1/t)(…)²
        let free = run(
            vec![ParticleInit::new_1d(0.5, 0.0, -1.0), ParticleInit::new_1d(0.5, 1.0, 1.0)],
            5.0,
        );
        for t in [0.01, 0.1, 1.0, 4.0] {
            let dx = 1.0 + 2.0 * t;
            let expected = 2.0 * dx - dx * dx / t;
            let got = check_entropy_1d(&free, &[t]).unwrap();
            assert!((got - expected.max(0.0)).abs() < 1e-12);
            assert!(expected < 0.0);
        }

        let plane = run(vec![ParticleInit::new(1.0, vec![0.0, 0.0], vec![0.0, 0.0])], 1.0);
        assert!(matches!(check_entropy_1d(&plane, &[0.5]), Err(Error::Dimension { .. })));
    }
}
