//! Exact event-driven simulation of the sticky particle system together
//! with checkers for the quantitative estimates its trajectories satisfy.
//!
//! Point masses move freely until they meet; colliding masses stick and
//! continue with their mass-averaged velocity. The [`engine`] builds the
//! resulting piecewise-linear trajectories, [`variation`], [`eulerian`] and
//! [`transport`] verify the estimates on them, and [`continuum`] studies
//! how finite-particle solutions behave as the number of particles grows.

pub mod continuum;
pub mod engine;
pub mod error;
pub mod eulerian;
pub mod generate;
pub mod io;
pub mod numeric;
pub mod transport;
pub mod types;
pub mod variation;

pub use engine::{
    pair_collision_time, simulate, simulate_1d_fast, ClusterId, CollisionEvent, CollisionGroup,
    EventRecord, SimulationResult,
};
pub use error::{Error, Result};
pub use types::{
    canonicalize, eval_trajectory, AtomicMeasure, Breakpoint, Cluster, EngineTolerances,
    ParticleInit, Scenario, Trajectory,
};
