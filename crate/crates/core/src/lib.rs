//! Reduced-density-matrix dynamics on a periodic 1D grid.
//!
//! The integrator in [`evolve`] advances `ρ(x,y)` by a unitary split step plus
//! an elementwise gain `exp(Λ(x,y,t)·dt)` supplied by an [`influence`] model,
//! then renormalizes the trace. [`composite`] provides the exact two-particle
//! closed-system dynamics used as a reference, and [`measurement`] runs
//! ensembles of detector registrations.

pub mod composite;
pub mod error;
pub mod evolve;
mod fft;
pub mod grid;
pub mod influence;
pub mod measurement;
pub mod propagator;

pub use error::{Error, Result};
pub use grid::{
    diagnostics, partial_trace, pure_density, to_momentum, to_position, DensityMatrix,
    DiagnosticsRecord, Particle, Representation, SpatialGrid, TwoParticleState, WaveFunction,
};
pub use influence::{DetectorArray, DetectorElement, InfluenceModel};
pub use propagator::PotentialSpec;
