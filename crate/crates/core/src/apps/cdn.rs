//! Content delivery network: requests accumulate at a server and abandon at
//! rate θ(n); activation clears every waiting request instantly at a set-up
//! cost. Clearing an empty queue does nothing, so both actions coincide in
//! state 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, BanditModel, ConstraintMode, Jump};
use crate::policy::{ThresholdKind, ThresholdPolicy};

use super::{check_nonneg, check_same_len};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdnParams {
    /// Arrival rate in state n.
    pub lambda: Vec<f64>,
    /// Total abandonment rate in state n; θ(0) = 0.
    pub theta: Vec<f64>,
    /// Holding cost rate per waiting request.
    pub ch: Vec<f64>,
    /// Lump penalty per abandonment.
    pub la: Vec<f64>,
    /// Set-up cost of clearing from state n.
    pub ls: Vec<f64>,
}

impl CdnParams {
    pub fn uniform(n: usize, lambda: f64, theta: f64, ch: f64, la: f64, ls: f64) -> Self {
        let mut th = vec![theta; n];
        th[0] = 0.0;
        Self { lambda: vec![lambda; n], theta: th, ch: vec![ch; n], la: vec![la; n], ls: vec![ls; n] }
    }

    pub fn n_states(&self) -> usize {
        self.lambda.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        if n < 2 {
            return Err(Error::InvalidParams("need at least 2 states".into()));
        }
        check_same_len(n, &[("theta", &self.theta), ("ch", &self.ch), ("la", &self.la), ("ls", &self.ls)])?;
        check_nonneg(&[("lambda", &self.lambda), ("theta", &self.theta)])?;
        for (name, v) in [("ch", &self.ch), ("la", &self.la), ("ls", &self.ls)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.theta[0] != 0.0 {
            return Err(Error::InvalidParams("theta(0) must be 0".into()));
        }
        if let Some(i) = (0..n - 1).find(|&i| self.lambda[i] <= 0.0) {
            return Err(Error::InvalidParams(format!("lambda({i}) must be positive below the top state")));
        }
        Ok(())
    }

    pub fn lambda_nondecreasing(&self) -> bool {
        self.lambda.windows(2).all(|w| w[1] >= w[0])
    }

    /// Holding plus abandonment-penalty cost rate in state n.
    pub fn cost_rate(&self, n: usize) -> f64 {
        n as f64 * self.ch[n] + self.theta[n] * self.la[n]
    }
}

pub fn build_cdn(p: &CdnParams) -> Result<BanditModel> {
    p.validate()?;
    let n = p.n_states();
    let mut m = BanditModel::new(n).with_constraint(ConstraintMode::PolicyBoundary).with_floor(0);
    for s in 0..n {
        if s + 1 < n {
            m.add_rate(s, Action::Passive, s + 1, p.lambda[s]);
        } else if p.lambda[s] > 0.0 {
            m.set_overflow(s, Action::Passive, p.lambda[s]);
        }
        if s > 0 && p.theta[s] > 0.0 {
            m.add_rate(s, Action::Passive, s - 1, p.theta[s]);
        }
        m.set_cost(s, Action::Passive, p.cost_rate(s));
        m.set_usage(s, Action::Passive, 0.0);
        if s == 0 {
            m.states[0][Action::Active.index()] = m.states[0][Action::Passive.index()].clone();
        } else {
            m.set_impulse(s, Action::Active, vec![Jump { to: 0, prob: 1.0, lump: p.ls[s] }]);
            m.set_usage(s, Action::Active, 0.0);
        }
    }
    Ok(m)
}

/// Π_{j=a..=b} θ(j)/λ(j), empty product 1.
fn ratio_product(p: &CdnParams, a: usize, b: usize) -> f64 {
    (a..=b).map(|j| p.theta[j] / p.lambda[j]).product()
}

/// Stationary distribution under the 0-1 threshold n (clear on reaching
/// n+1), for 0 ≤ n ≤ N−2.
pub fn cdn_stationary(p: &CdnParams, n: usize) -> Result<Vec<f64>> {
    p.validate()?;
    if n + 2 > p.n_states() {
        return Err(Error::InvalidParams(format!("threshold {n} outside 0..={}", p.n_states() - 2)));
    }
    // Relative mass of state m against state n.
    let weight = |m: usize| -> f64 {
        let tail: f64 = (1..=n - m).map(|i| ratio_product(p, m + 1, m + i)).sum();
        p.lambda[n] / p.lambda[m] * (1.0 + tail)
    };
    let mut pi = vec![0.0; p.n_states()];
    let z: f64 = 1.0 + (0..n).map(weight).sum::<f64>();
    pi[n] = 1.0 / z;
    for m in 0..n {
        pi[m] = weight(m) / z;
    }
    Ok(pi)
}

/// Index of state n (1 ≤ n ≤ N−2):
/// [Σ_{i<n} C̃(i)(π^n(i) − π^{n−1}(i)) + (C̃(n) + λ(n)L_s(n+1)) π^n(n) − λ(n−1)L_s(n) π^{n−1}(n−1)]
/// / (π^{n−1}(n−1) − π^n(n)).
pub fn cdn_whittle(p: &CdnParams, n: usize) -> Result<f64> {
    let (num, den) = cdn_terms(p, n)?;
    if den.abs() <= 1e-12 {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(num / den)
}

fn cdn_terms(p: &CdnParams, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParams("the index is defined from state 1".into()));
    }
    let hi = cdn_stationary(p, n)?;
    let lo = cdn_stationary(p, n - 1)?;
    let held: f64 = (1..n).map(|i| p.cost_rate(i) * (hi[i] - lo[i])).sum();
    let num = held + p.cost_rate(n) * hi[n] + p.ls[n + 1] * p.lambda[n] * hi[n] - p.ls[n] * p.lambda[n - 1] * lo[n - 1];
    Ok((num, lo[n - 1] - hi[n]))
}

/// Single-server activation level: the smallest state n ≥ 1 whose index
/// numerator is non-negative, or N when there is none within the truncation.
pub fn cdn_optimal_rule(p: &CdnParams) -> Result<usize> {
    p.validate()?;
    let n = p.n_states();
    for s in 1..n - 1 {
        if cdn_terms(p, s)?.0 >= 0.0 {
            return Ok(s);
        }
    }
    Ok(n)
}

/// Policy that clears on reaching `level`: passive below it.
pub fn activation_policy(level: usize) -> ThresholdPolicy {
    ThresholdPolicy::new(level as isize - 1, ThresholdKind::ZeroOne)
}
