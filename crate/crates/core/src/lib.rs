//! Stochastic stability analysis for continuous-time switched linear systems
//! whose switching signal holds each mode `i` for a fixed time `d_i` and then
//! for an exponentially distributed time before jumping.
//!
//! * [`stability`] decides stability exactly through coupled Lyapunov
//!   equations and produces checkable certificates.
//! * [`sim`] samples switching paths, propagates states exactly, and
//!   estimates the expected quadratic cost by Monte Carlo.
//! * [`region`] sweeps two dwell times and renders stability regions.
//! * [`lemmas`] holds two scalar identities used in cost bounds.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod fixtures;
pub mod lemmas;
pub mod matlib;
pub mod model;
pub mod region;
pub mod sim;
pub mod stability;

pub use matlib::{Matrix, SymmetricMatrix};
pub use model::{load_system, save_system, SwitchedLinearSystem, ValidatedSystem};
pub use region::{sweep, RegionGrid, SweepConfig};
pub use sim::{estimate_cost, estimate_cost_batch, CostEstimate};
pub use stability::{check_stochastic_stability, verify_certificate, StabilityCertificate, StabilityVerdict};
