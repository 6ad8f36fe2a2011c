//! Lagrangian lower bound on the optimal average cost of an instance.
//!
//! Relaxing the per-instant budget Σ u_k ≤ M to its time average and pricing
//! it at μ ≥ 0 decouples the bandits:
//! bound(μ) = Σ_k min_X [E_T,k(X) + μ E_u,k(X)] − μM.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::steady_state;
use crate::error::{Error, Result};
use crate::index::detect_threshold_structure;
use crate::index::threshold::threshold_range;
use crate::model::BanditModel;
use crate::policy::{PassiveSetPolicy, ThresholdPolicy};

use super::RmabpInstance;

/// Largest state count for which all passive sets are enumerated.
const MAX_ENUMERATED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// Maximising price on the grid.
    pub w_star: f64,
    pub bound: f64,
}

/// `steps` evenly spaced prices on [0, wmax]; a single step is the grid {0}.
pub fn uniform_grid(wmax: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..steps).map(|i| wmax * i as f64 / (steps - 1) as f64).collect(),
    }
}

/// (E_T, E_u) over a policy class that contains an optimum of every
/// single-bandit relaxation: threshold policies when the rate structure
/// guarantees them, otherwise every passive set.
fn lines(model: &BanditModel) -> Result<Vec<(f64, f64)>> {
    let n = model.n_states();
    let policies: Vec<PassiveSetPolicy> = match detect_threshold_structure(model).kind() {
        Some(kind) => threshold_range(model).into_iter().map(|t| ThresholdPolicy::new(t, kind).to_passive_set(n)).collect(),
        None if n <= MAX_ENUMERATED => (0..1u64 << n).map(|b| PassiveSetPolicy::from_bits(n, b)).collect(),
        None => return Err(Error::TooManyStates { states: n, max: MAX_ENUMERATED }),
    };
    let evaluated: Vec<Result<Option<(f64, f64)>>> = policies
        .par_iter()
        .map(|p| match steady_state(model, p) {
            Ok(ss) => Ok(Some((ss.e_cost, ss.e_usage))),
            Err(Error::NotUnichain(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let out: Vec<(f64, f64)> = evaluated.into_iter().filter_map(|r| r.transpose()).collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::AllPoliciesNonErgodic);
    }
    Ok(out)
}

/// Maximum of the Lagrangian dual over the non-negative prices in `grid`.
pub fn lagrangian_bound(inst: &RmabpInstance, grid: &[f64]) -> Result<BoundResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty price grid".into()));
    }
    if let Some(w) = grid.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidParams(format!("price {w} must be finite and non-negative")));
    }
    let per_bandit: Vec<Vec<(f64, f64)>> = inst.bandits.iter().map(lines).collect::<Result<_>>()?;
    let mut best = BoundResult { w_star: f64::NAN, bound: f64::NEG_INFINITY };
    for &w in grid {
        let bound = if w > 0.0 && inst.budget == f64::INFINITY {
            f64::NEG_INFINITY
        } else {
            let relaxed: f64 = per_bandit
                .iter()
                .map(|ls| ls.iter().map(|&(et, eu)| et + w * eu).fold(f64::INFINITY, f64::min))
                .sum();
            let priced = if w == 0.0 { 0.0 } else { w * inst.budget };
            relaxed - priced
        };
        if bound > best.bound || best.w_star.is_nan() {
            best = BoundResult { w_star: w, bound };
        }
    }
    Ok(best)
}
