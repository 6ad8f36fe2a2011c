//! Numerical tolerances shared by every module.

use serde::{Deserialize, Serialize};

/// Centralised tolerance record. Every comparison of real functionals goes
/// through one of these fields so a model file can override them together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tolerance for equality of E(T), E(f) and line intercepts.
    pub functional_eq: f64,
    /// Allowed deviation of Σπ from one.
    pub normalization: f64,
    /// Slack for numerical monotonicity checks of index sequences.
    pub monotone: f64,
    /// Allowed deviation of impulse jump probabilities from summing to one.
    pub prob_sum: f64,
    /// Stationary mass on the top two states above which truncation is flagged.
    pub tail_warn: f64,
    /// Negative stationary entries above this magnitude are a numerical failure.
    pub clamp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            functional_eq: 1e-12,
            normalization: 1e-10,
            monotone: 1e-9,
            prob_sum: 1e-12,
            tail_warn: 1e-6,
            clamp: 1e-14,
        }
    }
}

impl Tolerances {
    /// Equality of two reals at `functional_eq`, scaled by magnitude so that
    /// large cost scales do not turn rounding noise into spurious differences.
    pub fn eq(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.functional_eq * (1.0 + a.abs().max(b.abs()))
    }
}
