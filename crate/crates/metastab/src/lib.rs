//! Numerical toolkit for finite continuous-time Markov chains with
//! metastable structure: chain reductions (trace, reflected,
//! gamma-enlarged, projected), potential theory (capacities, equilibrium
//! potentials, spectral gaps, mixing times, hitting-time bounds),
//! condition checkers for well/separating-set partitions, generators for
//! four condensing/landscape/bottleneck model families, and reproducible
//! event-driven Monte Carlo.
//!
//! Start from [`chain::build_chain`] or one of the [`models`] generators;
//! the `examples/` directory walks through each capability.

pub mod chain;
pub mod error;
pub mod linalg;
pub mod metastability;
pub mod models;
pub mod numeric;
pub mod oracle;
pub mod potential;
pub mod reductions;
pub mod report;
pub mod simulate;

pub use chain::{build_chain, tv_distance, Chain, Measure, StateKey, Trajectory, Visit};
pub use error::{Error, Result};
pub use metastability::{Partition, StartPolicy};
pub use report::{ConditionId, ConditionReport, Verdict};
