//! Stationary deterministic single-bandit policies.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Action;

/// Passive on the states in the set, active everywhere else.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PassiveSetPolicy {
    passive: Vec<bool>,
}

impl PassiveSetPolicy {
    pub fn from_mask(passive: Vec<bool>) -> Self {
        Self { passive }
    }

    pub fn from_states(n_states: usize, passive: &[usize]) -> Self {
        let mut mask = vec![false; n_states];
        for &s in passive {
            mask[s] = true;
        }
        Self { passive: mask }
    }

    /// Subset encoded by the low `n_states` bits of `bits`.
    pub fn from_bits(n_states: usize, bits: u64) -> Self {
        Self { passive: (0..n_states).map(|i| bits >> i & 1 == 1).collect() }
    }

    pub fn all_active(n_states: usize) -> Self {
        Self { passive: vec![false; n_states] }
    }

    pub fn all_passive(n_states: usize) -> Self {
        Self { passive: vec![true; n_states] }
    }

    pub fn n_states(&self) -> usize {
        self.passive.len()
    }

    pub fn is_passive(&self, n: usize) -> bool {
        self.passive[n]
    }

    pub fn action(&self, n: usize) -> Action {
        if self.passive[n] {
            Action::Passive
        } else {
            Action::Active
        }
    }

    pub fn actions(&self) -> Vec<Action> {
        (0..self.passive.len()).map(|n| self.action(n)).collect()
    }

    pub fn mask(&self) -> &[bool] {
        &self.passive
    }

    pub fn passive_states(&self) -> Vec<usize> {
        (0..self.passive.len()).filter(|&n| self.passive[n]).collect()
    }
}

impl fmt::Display for PassiveSetPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = self.passive_states().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{{{list}}}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// Passive at or below the threshold, active above.
    ZeroOne,
    /// Active at or below the threshold, passive above.
    OneZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    /// −1 denotes the empty lower set.
    pub threshold: isize,
    pub kind: ThresholdKind,
}

impl ThresholdPolicy {
    pub fn new(threshold: isize, kind: ThresholdKind) -> Self {
        Self { threshold, kind }
    }

    pub fn action(&self, n: usize) -> Action {
        let low = (n as isize) <= self.threshold;
        match (self.kind, low) {
            (ThresholdKind::ZeroOne, true) | (ThresholdKind::OneZero, false) => Action::Passive,
            _ => Action::Active,
        }
    }

    pub fn to_passive_set(&self, n_states: usize) -> PassiveSetPolicy {
        PassiveSetPolicy::from_mask((0..n_states).map(|n| self.action(n) == Action::Passive).collect())
    }
}
