//! Continuum initial data (ρ₀, v₀), its quantization into equal-mass atoms
//! and the convergence study of the resulting particle solutions as the
//! number of atoms grows.

mod expr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

pub use expr::Expr;

use crate::engine::{simulate_1d_fast, SimulationResult};
use crate::error::{Error, Result};
use crate::numeric::gauss10_integrate;
use crate::transport::{pushforward_variation, velocity_pushforward, w1};
use crate::types::{AtomicMeasure, EngineTolerances, ParticleInit, Scenario};

/// Tolerance on ∫ρ₀ = 1 for piecewise densities.
pub const DENSITY_TOLERANCE: f64 = 1e-9;

/// Points used to estimate sup and inf of v₀ over the support.
const RANGE_SAMPLES: usize = 10_000;

/// Initial density on a bounded interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Uniform {
        a: Option<f64>,
        b: Option<f64>,
    },
    /// Normal(mean, sd²) conditioned on `[a, b]`.
    GaussianTruncated {
        mean: f64,
        sd: f64,
        a: Option<f64>,
        b: Option<f64>,
    },
    /// Constant `values[k]` on `[knots[k], knots[k + 1])`.
    PiecewiseDensity { knots: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRecipe {
    rho0: Density,
    v0: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
}

/// Continuum initial data: a density and a velocity given as an
/// expression in `x`, optionally with the simulation horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawRecipe", into = "RawRecipe")]
pub struct ContinuumRecipe {
    rho0: Density,
    v0: Expr,
    horizon: Option<f64>,
    support: (f64, f64),
    /// Cumulative mass at each knot of a piecewise density.
    cumulative: Vec<f64>,
    truncation: Option<(Normal, f64, f64)>,
}

impl TryFrom<RawRecipe> for ContinuumRecipe {
    type Error = Error;

    fn try_from(raw: RawRecipe) -> Result<Self> {
        let v0 = Expr::parse(&raw.v0)?;
        ContinuumRecipe::new(raw.rho0, v0, raw.horizon)
    }
}

impl From<ContinuumRecipe> for RawRecipe {
    fn from(r: ContinuumRecipe) -> Self {
        RawRecipe {
            rho0: r.rho0,
            v0: r.v0.source().to_string(),
            horizon: r.horizon,
        }
    }
}

fn bounded(a: Option<f64>, b: Option<f64>) -> Result<(f64, f64)> {
    match (a, b) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => {
            if a < b {
                Ok((a, b))
            } else {
                Err(Error::InvalidRecipe(format!("empty support [{a}, {b}]")))
            }
        }
        _ => Err(Error::UnboundedSupport),
    }
}

impl ContinuumRecipe {
    pub fn new(rho0: Density, v0: Expr, horizon: Option<f64>) -> Result<Self> {
        if let Some(h) = horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidRecipe(format!("horizon must be positive, got {h}")));
            }
        }
        let mut cumulative = Vec::new();
        let mut truncation = None;
        let support = match &rho0 {
            Density::Uniform { a, b } => bounded(*a, *b)?,
            Density::GaussianTruncated { mean, sd, a, b } => {
                let (a, b) = bounded(*a, *b)?;
                let normal = Normal::new(*mean, *sd)
                    .map_err(|e| Error::InvalidRecipe(format!("gaussian parameters: {e}")))?;
                let (pa, pb) = (normal.cdf(a), normal.cdf(b));
                if !(pb > pa) {
                    return Err(Error::InvalidRecipe(
                        "truncation interval carries no gaussian mass".into(),
                    ));
                }
                truncation = Some((normal, pa, pb));
                (a, b)
            }
            Density::PiecewiseDensity { knots, values } => {
                if knots.len() < 2 || values.len() + 1 != knots.len() {
                    return Err(Error::InvalidRecipe(format!(
                        "{} knots need {} values, got {}",
                        knots.len(),
                        knots.len().saturating_sub(1),
                        values.len()
                    )));
                }
                if knots.iter().any(|k| !k.is_finite()) {
                    return Err(Error::UnboundedSupport);
                }
                if knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidRecipe("knots must be strictly increasing".into()));
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::InvalidRecipe("density values must be non-negative".into()));
                }
                cumulative.push(0.0);
                for (w, v) in knots.windows(2).zip(values) {
                    let last = *cumulative.last().unwrap();
                    cumulative.push(last + v * (w[1] - w[0]));
                }
                let total = *cumulative.last().unwrap();
                if (total - 1.0).abs() > DENSITY_TOLERANCE {
                    return Err(Error::InvalidRecipe(format!("density integrates to {total}, expected 1")));
                }
                // the outermost pieces must carry mass so the support is [first, last]
                if values[0] == 0.0 || values[values.len() - 1] == 0.0 {
                    return Err(Error::InvalidRecipe(
                        "first and last pieces must have positive density".into(),
                    ));
                }
                (knots[0], knots[knots.len() - 1])
            }
        };
        let recipe = Self {
            rho0,
            v0,
            horizon,
            support,
            cumulative,
            truncation,
        };
        let (lo, hi) = recipe.velocity_range();
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidRecipe(format!(
                "v0 = `{}` is not bounded on the support",
                recipe.v0.source()
            )));
        }
        Ok(recipe)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawRecipe = serde_json::from_str(text)?;
        Self::try_from(raw)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn density(&self) -> &Density {
        &self.rho0
    }

    pub fn v0(&self) -> &Expr {
        &self.v0
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// F(x) = ρ₀((−∞, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = self.support;
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        match &self.rho0 {
            Density::Uniform { .. } => (x - a) / (b - a),
            Density::GaussianTruncated { .. } => {
                let (normal, pa, pb) = self.truncation.as_ref().unwrap();
                (normal.cdf(x) - pa) / (pb - pa)
            }
            Density::PiecewiseDensity { knots, values } => {
                let k = knots.partition_point(|&s| s <= x) - 1;
                self.cumulative[k] + values[k] * (x - knots[k])
            }
        }
    }

    /// F⁻¹(u) for `u` in `[0, 1]`: the smallest x with F(x) ≥ u.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = self.support;
        let x = match &self.rho0 {
            Density::Uniform { .. } => a + u * (b - a),
            Density::GaussianTruncated { .. } => {
                let (normal, pa, pb) = self.truncation.as_ref().unwrap();
                let p = pa + u * (pb - pa);
                let mut x = normal.inverse_cdf(p);
                // the library inverse is good to about 1e-11; Newton polishes it
                for _ in 0..2 {
                    let density = normal.pdf(x);
                    if density > 0.0 {
                        x -= (normal.cdf(x) - p) / density;
                    }
                }
                x
            }
            Density::PiecewiseDensity { knots, values } => {
                // first piece whose cumulative mass reaches u with positive density
                let mut k = self.cumulative.partition_point(|&c| c < u).saturating_sub(1);
                k = k.min(values.len() - 1);
                while values[k] == 0.0 && k + 1 < values.len() {
                    k += 1;
                }
                knots[k] + (u - self.cumulative[k]) / values[k]
            }
        };
        x.clamp(a, b)
    }

    /// Estimated (inf, sup) of v₀ over the support, from a uniform grid.
    pub fn velocity_range(&self) -> (f64, f64) {
        let (a, b) = self.support;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=RANGE_SAMPLES {
            let v = self.v0.eval(a + (b - a) * k as f64 / RANGE_SAMPLES as f64);
            if v.is_nan() {
                return (f64::NAN, f64::NAN);
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Equal masses 1/n at the quantile midpoints F⁻¹((j − ½)/n), moving
    /// with v₀ evaluated there.
    pub fn quantize(&self, n: usize) -> Result<Vec<ParticleInit>> {
        if n == 0 {
            return Err(Error::Domain("cannot quantize into zero atoms".into()));
        }
        let m = 1.0 / n as f64;
        let mut out: Vec<ParticleInit> = Vec::with_capacity(n);
        for j in 0..n {
            let x = self.quantile((j as f64 + 0.5) / n as f64);
            if out.last().is_some_and(|p| p.position[0] >= x) {
                return Err(Error::Domain(format!(
                    "quantile midpoints {} and {} are not distinct in floating point",
                    j - 1,
                    j
                )));
            }
            let v = self.v0.eval(x);
            out.push(ParticleInit::new_1d(m, x, v));
        }
        Ok(out)
    }
}

pub fn quantize(recipe: &ContinuumRecipe, n: usize) -> Result<Vec<ParticleInit>> {
    recipe.quantize(n)
}

/// W₁ between the atoms `(weights, sorted points)` and ρ₀, integrating
/// |F_n − F| piece by piece between atoms, quantile levels and knots.
pub fn w1_to_density(recipe: &ContinuumRecipe, measure: &AtomicMeasure) -> Result<f64> {
    if measure.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: measure.dim(),
        });
    }
    let mut atoms: Vec<(f64, f64)> = measure.atoms().map(|(w, p)| (p[0], w)).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (a, b) = recipe.support();
    let mut cuts = vec![a, b];
    let mut level = 0.0;
    for &(x, w) in &atoms {
        cuts.push(x);
        level += w;
        if level < 1.0 {
            cuts.push(recipe.quantile(level));
        }
    }
    if let Density::PiecewiseDensity { knots, .. } = recipe.density() {
        cuts.extend_from_slice(knots);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let positions: Vec<f64> = atoms.iter().map(|p| p.0).collect();
    let mut prefix = Vec::with_capacity(atoms.len() + 1);
    prefix.push(0.0);
    for &(_, w) in &atoms {
        prefix.push(prefix.last().unwrap() + w);
    }
    let empirical = |x: f64| prefix[positions.partition_point(|&p| p <= x)];
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let f_n = empirical(0.5 * (w[0] + w[1]));
        total += gauss10_integrate(w[0], w[1], |x| (f_n - recipe.cdf(x)).abs());
    }
    Ok(total)
}

/// Diagnostics of the particle solutions for a sequence of atom counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub sizes: Vec<usize>,
    pub times: Vec<f64>,
    pub horizon: f64,
    /// `w1_rho[k][j]` = W₁(ρ^{sizes[k]}_{t_j}, ρ^{sizes[k+1]}_{t_j}).
    pub w1_rho: Vec<Vec<f64>>,
    /// Same for the velocity pushforwards.
    pub w1_push: Vec<Vec<f64>>,
    /// Pushforward curve variation on `[0, horizon]` per size.
    pub variation_bounds: Vec<f64>,
    /// 2 (sup v₀ − inf v₀) over the support.
    pub variation_limit: f64,
    /// W₁(ρ₀ⁿ, ρ₀) per size.
    pub w1_initial: Vec<f64>,
    pub event_counts: Vec<usize>,
    /// Whether every collision of each run happened within the horizon.
    pub complete: Vec<bool>,
    /// Largest excursion of any cluster velocity outside the range of the
    /// quantized initial velocities.
    pub max_principle_violation: f64,
}

impl ConvergenceReport {
    /// `ratios[k][j] = w1[k][j] / w1[k + 1][j]`.
    pub fn ratios(w1: &[Vec<f64>]) -> Vec<Vec<f64>> {
        w1.windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a / b).collect())
            .collect()
    }

    /// Ratio of consecutive maxima over the time grid.
    pub fn max_ratios(w1: &[Vec<f64>]) -> Vec<f64> {
        let maxima: Vec<f64> = w1
            .iter()
            .map(|row| row.iter().copied().fold(0.0, f64::max))
            .collect();
        maxima.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

struct Run {
    result: SimulationResult,
    rho: Vec<AtomicMeasure>,
    push: Vec<AtomicMeasure>,
    w1_initial: f64,
    variation: f64,
    excursion: f64,
}

fn run_size(recipe: &ContinuumRecipe, n: usize, horizon: f64, times: &[f64]) -> Result<Run> {
    let particles = recipe.quantize(n)?;
    let (lo, hi) = particles
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.velocity[0]), hi.max(p.velocity[0]))
        });
    let scenario = Scenario::new(particles, horizon, EngineTolerances::default())?;
    let result = simulate_1d_fast(&scenario)?;
    let initial = crate::eulerian::slice(&result, 0.0).rho;
    let w1_initial = w1_to_density(recipe, &initial)?;
    let mut rho = Vec::with_capacity(times.len());
    let mut push = Vec::with_capacity(times.len());
    for &t in times {
        rho.push(crate::eulerian::slice(&result, t).rho);
        push.push(velocity_pushforward(&result, t)?);
    }
    let excursion = (0..result.cluster_count())
        .map(|c| {
            let v = result.cluster_velocity(c)[0];
            (lo - v).max(v - hi).max(0.0)
        })
        .fold(0.0, f64::max);
    Ok(Run {
        variation: pushforward_variation(&result)?,
        result,
        rho,
        push,
        w1_initial,
        excursion,
    })
}

/// Quantize `recipe` at every size, simulate (in parallel), and compare
/// consecutive sizes at every time. The horizon is the recipe's, or the
/// largest time if the recipe has none.
pub fn converge_study(recipe: &ContinuumRecipe, sizes: &[usize], times: &[f64]) -> Result<ConvergenceReport> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[1] <= w[0]) || sizes[0] == 0 {
        return Err(Error::Domain("sizes must be positive and strictly increasing".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::Domain("times must be finite and non-negative".into()));
    }
    let latest = times.iter().copied().fold(0.0, f64::max);
    let horizon = match recipe.horizon() {
        Some(h) if h < latest => {
            return Err(Error::Domain(format!("time {latest} lies past the horizon {h}")));
        }
        Some(h) => h,
        None if latest > 0.0 => latest,
        None => 1.0,
    };
    let runs: Vec<Run> = sizes
        .par_iter()
        .map(|&n| run_size(recipe, n, horizon, times))
        .collect::<Result<_>>()?;
    let mut w1_rho = Vec::with_capacity(runs.len().saturating_sub(1));
    let mut w1_push = Vec::with_capacity(runs.len().saturating_sub(1));
    for pair in runs.windows(2) {
        let mut rho_row = Vec::with_capacity(times.len());
        let mut push_row = Vec::with_capacity(times.len());
        for j in 0..times.len() {
            rho_row.push(w1(&pair[0].rho[j], &pair[1].rho[j])?);
            push_row.push(w1(&pair[0].push[j], &pair[1].push[j])?);
        }
        w1_rho.push(rho_row);
        w1_push.push(push_row);
    }
    let (lo, hi) = recipe.velocity_range();
    Ok(ConvergenceReport {
        sizes: sizes.to_vec(),
        times: times.to_vec(),
        horizon,
        w1_rho,
        w1_push,
        variation_bounds: runs.iter().map(|r| r.variation).collect(),
        variation_limit: 2.0 * (hi - lo),
        w1_initial: runs.iter().map(|r| r.w1_initial).collect(),
        event_counts: runs.iter().map(|r| r.result.events().len()).collect(),
        complete: runs.iter().map(|r| r.result.is_complete()).collect(),
        max_principle_violation: runs.iter().map(|r| r.excursion).fold(0.0, f64::max),
    })
}
