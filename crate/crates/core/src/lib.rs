//! Interference-aware beam allocation for mmWave highway coverage.
//!
//! * [`geometry`]: sector containment, trajectories and departure distances.
//! * [`analytic`]: service-distance CDFs by quadrature, plus a Monte-Carlo oracle.
//! * [`channel`]: link budget, SINR and goodput.
//! * [`mobility`]: constant-population highway traffic.
//! * [`agents`]: the context-learning bandit agent and the baseline selectors.
//! * [`simulator`]: the fixed-step event loop and its metrics.

pub mod agents;
pub mod analytic;
pub mod channel;
pub mod geometry;
pub mod mobility;
pub mod simulator;

pub use geometry::{BeamSector, PolarPoint};
