//! Small numerical kernels shared across modules: compensated sums,
//! Gauss–Legendre rules and a few slice-vector helpers.

use std::sync::OnceLock;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Double-double accumulator. Sums of a few million doubles are carried with
/// roughly 106 bits, so `value()` is the correctly rounded sum in practice.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExactSum {
    hi: f64,
    lo: f64,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_value(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let lo = self.lo + e;
        let (hi, lo) = two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }

    pub fn merge(&mut self, other: &ExactSum) {
        self.add(other.hi);
        self.add(other.lo);
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = ExactSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<ExactSum>().value()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `base + dt * vel`, written into `out`.
#[inline]
pub fn advance_into(base: &[f64], vel: &[f64], dt: f64, out: &mut [f64]) {
    for ((o, x), v) in out.iter_mut().zip(base).zip(vel) {
        *o = x + dt * v;
    }
}

pub fn advance(base: &[f64], vel: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; base.len()];
    advance_into(base, vel, dt, &mut out);
    out
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The 10-point rule used by the weak-form quadrature.
pub fn gauss10() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

/// Integrate `f` over `[a, b]` with the 10-point Gauss rule.
pub fn gauss10_integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let (nodes, weights) = gauss10();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive bisection on top of [`gauss10_integrate`]. Returns the integral
/// and the accumulated error estimate; `None` if `max_depth` is exhausted
/// before every piece meets its share of `tol`.
pub fn adaptive_gauss10<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
    f: &mut F,
) -> Option<(f64, f64)> {
    let whole = gauss10_integrate(a, b, &mut *f);
    adaptive_step(a, b, whole, tol, max_depth, f)
}

fn adaptive_step<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    f: &mut F,
) -> Option<(f64, f64)> {
    let mid = 0.5 * (a + b);
    let left = gauss10_integrate(a, mid, &mut *f);
    let right = gauss10_integrate(mid, b, &mut *f);
    let err = (left + right - whole).abs();
    if err <= tol {
        return Some((left + right, err));
    }
    if depth == 0 {
        return None;
    }
    let (l, el) = adaptive_step(a, mid, left, 0.5 * tol, depth - 1, f)?;
    let (r, er) = adaptive_step(mid, b, right, 0.5 * tol, depth - 1, f)?;
    Some((l + r, el + er))
}
