//! Threshold-structure detection, the monotone-E(f) indexability certificate
//! and the two-threshold difference quotient for the index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{steady_state_with, SteadyState};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{Action, BanditModel};
use crate::policy::{ThresholdKind, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    I,
    Ii,
    Iii,
    Iv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdDetection {
    ZeroOne(Condition),
    OneZero(Condition),
    NoneDetected,
}

impl ThresholdDetection {
    pub fn kind(&self) -> Option<ThresholdKind> {
        match self {
            ThresholdDetection::ZeroOne(_) => Some(ThresholdKind::ZeroOne),
            ThresholdDetection::OneZero(_) => Some(ThresholdKind::OneZero),
            ThresholdDetection::NoneDetected => None,
        }
    }
}

/// Rate/jump pattern shared by the four conditions: in direction `up`,
/// `strict` may not move at all, `loose` may move by at most one step, and
/// impulses under either action may not move.
fn pattern_holds(model: &BanditModel, up: bool, strict: Action, loose: Action) -> bool {
    let n = model.n_states();
    let offset = |s: usize, to: usize| -> isize {
        let d = to as isize - s as isize;
        if up {
            d
        } else {
            -d
        }
    };
    (0..n).filter(|&s| !model.actions_identical(s)).all(|s| {
        Action::BOTH.iter().all(|&a| {
            let spec = model.spec(s, a);
            if spec.impulse {
                return spec.jumps.iter().all(|j| j.prob <= 0.0 || offset(s, j.to) < 1);
            }
            let max_step = if a == strict { 0 } else if a == loose { 1 } else { unreachable!() };
            // Overflow leaves the top state one step upwards.
            let overflow_ok = !up || spec.overflow <= 0.0 || max_step >= 1;
            overflow_ok && spec.rates.iter().all(|&(to, q)| q <= 0.0 || offset(s, to) <= max_step)
        })
    })
}

/// Returns the first matching condition in the order (i), (ii), (iii), (iv).
/// States in which both actions are identical are skipped: their action
/// cannot affect any policy.
pub fn detect_threshold_structure(model: &BanditModel) -> ThresholdDetection {
    use Action::{Active, Passive};
    if pattern_holds(model, true, Active, Passive) {
        ThresholdDetection::ZeroOne(Condition::I)
    } else if pattern_holds(model, false, Passive, Active) {
        ThresholdDetection::ZeroOne(Condition::Ii)
    } else if pattern_holds(model, false, Active, Passive) {
        ThresholdDetection::OneZero(Condition::Iii)
    } else if pattern_holds(model, true, Passive, Active) {
        ThresholdDetection::OneZero(Condition::Iv)
    } else {
        ThresholdDetection::NoneDetected
    }
}

/// Thresholds from the model's floor up to N−1.
pub fn threshold_range(model: &BanditModel) -> Vec<isize> {
    (model.threshold_floor..model.n_states() as isize).collect()
}

pub fn threshold_steady_state(model: &BanditModel, policy: ThresholdPolicy, tol: &Tolerances) -> Result<SteadyState> {
    steady_state_with(model, &policy.to_passive_set(model.n_states()), tol)
}

/// Steady states for every threshold in `thresholds`, evaluated in parallel
/// and returned in input order.
pub fn threshold_states(
    model: &BanditModel,
    kind: ThresholdKind,
    thresholds: &[isize],
    tol: &Tolerances,
) -> Result<Vec<SteadyState>> {
    thresholds
        .par_iter()
        .map(|&t| threshold_steady_state(model, ThresholdPolicy::new(t, kind), tol))
        .collect()
}

/// Certificate: E(f) strictly increasing along the threshold sequence.
///
/// E(f) is only required to increase. Shifting f by a constant moves every
/// relaxed-cost line by the same amount at each W, so the sign of E(f) plays
/// no role in which policies are optimal.
pub fn indexable_by_monotone_ef(model: &BanditModel, kind: ThresholdKind) -> Result<bool> {
    indexable_by_monotone_ef_with(model, kind, &Tolerances::default())
}

pub fn indexable_by_monotone_ef_with(model: &BanditModel, kind: ThresholdKind, tol: &Tolerances) -> Result<bool> {
    let states = threshold_states(model, kind, &threshold_range(model), tol)?;
    Ok(states.windows(2).all(|w| w[1].e_f - w[0].e_f > tol.functional_eq))
}

/// [E_T(n) − E_T(n−1)] / [E_f(n) − E_f(n−1)] over thresholds n and n−1.
pub fn closed_form_index(model: &BanditModel, kind: ThresholdKind, n: usize) -> Result<f64> {
    closed_form_index_with(model, kind, n, &Tolerances::default())
}

pub fn closed_form_index_with(model: &BanditModel, kind: ThresholdKind, n: usize, tol: &Tolerances) -> Result<f64> {
    let hi = threshold_steady_state(model, ThresholdPolicy::new(n as isize, kind), tol)?;
    let lo = threshold_steady_state(model, ThresholdPolicy::new(n as isize - 1, kind), tol)?;
    difference_quotient(&lo, &hi, tol)
}

pub(crate) fn difference_quotient(lo: &SteadyState, hi: &SteadyState, tol: &Tolerances) -> Result<f64> {
    let df = hi.e_f - lo.e_f;
    if df.abs() < tol.functional_eq {
        return Err(Error::DegenerateDenominator(df));
    }
    Ok((hi.e_cost - lo.e_cost) / df)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Jump;

    #[test]
    fn jumps_two_steps_both_ways_detect_nothing() {
        let mut m = BanditModel::new(5);
        m.add_rate(1, Action::Passive, 3, 1.0).add_rate(3, Action::Active, 1, 1.0);
        assert_eq!(detect_threshold_structure(&m), ThresholdDetection::NoneDetected);
    }

    #[test]
    fn upward_impulse_breaks_condition_one() {
        let mut m = BanditModel::new(3);
        m.add_rate(0, Action::Passive, 1, 1.0);
        m.set_impulse(1, Action::Active, vec![Jump { to: 2, prob: 1.0, lump: 0.0 }]);
        m.add_rate(2, Action::Active, 0, 1.0);
        assert_ne!(detect_threshold_structure(&m), ThresholdDetection::ZeroOne(Condition::I));
    }

    #[test]
    fn constant_f_is_not_certified() {
        let mut m = BanditModel::new(3);
        for s in 0..3 {
            for a in Action::BOTH {
                m.set_f(s, a, 1.0);
            }
        }
        m.add_rate(0, Action::Passive, 1, 1.0).add_rate(1, Action::Passive, 2, 1.0);
        m.add_rate(1, Action::Active, 0, 1.0).add_rate(2, Action::Active, 0, 1.0);
        m.add_rate(2, Action::Passive, 0, 0.5);
        assert!(!indexable_by_monotone_ef(&m, ThresholdKind::ZeroOne).unwrap());
    }

    #[test]
    fn unchanged_step_gives_zero_numerator() {
        // Passive in state 1 never changes cost; only f moves.
        let mut m = BanditModel::new(3);
        m.add_rate(0, Action::Passive, 1, 1.0).add_rate(1, Action::Passive, 2, 1.0);
        m.add_rate(0, Action::Active, 1, 1.0).add_rate(1, Action::Active, 2, 1.0);
        m.add_rate(2, Action::Active, 0, 1.0).add_rate(2, Action::Passive, 0, 1.0);
        m.set_f(1, Action::Passive, 1.0);
        let w = closed_form_index(&m, ThresholdKind::ZeroOne, 1).unwrap();
        assert_eq!(w, 0.0);
    }
}
