//! Whittle-index solver for restless bandits whose transitions may be
//! instantaneous (impulse) jumps, evaluated under the time-average cost
//! criterion.
//!
//! The crate is layered:
//! - [`model`], [`policy`], [`chain`]: single-bandit model, stationary
//!   policies, impulse collapsing and steady-state functionals.
//! - [`index`]: indexability checks and Whittle-index computation.
//! - [`apps`]: machine repairman, TCP congestion control and CDN clearing.
//! - [`sim`]: event-driven simulation of multi-bandit instances and the
//!   Lagrangian lower bound.

pub mod apps;
pub mod chain;
pub mod config;
pub mod error;
pub mod index;
pub mod model;
pub mod policy;
pub mod sim;

pub use chain::{collapse_impulses, crossing_subsidy, steady_state, EffectiveChain, SteadyState};
pub use config::Tolerances;
pub use error::{Error, Result};
pub use model::{validate_model, Action, BanditModel, ConstraintMode, Jump, ValidationReport};
pub use policy::{PassiveSetPolicy, ThresholdKind, ThresholdPolicy};
