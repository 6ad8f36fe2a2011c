//! TCP congestion control with additive increase / multiplicative decrease:
//! an acknowledged flow grows its window by one at rate λ, a rejected flow
//! instantly shrinks it to max(⌊γn⌋, 1). State 0 is a placeholder that always
//! moves to window 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, BanditModel, Jump};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcpParams {
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Truncation: windows 0..n_states−1.
    pub n_states: usize,
}

impl TcpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams("lambda must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidParams("gamma must lie in [0,1)".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams("alpha must be non-negative".into()));
        }
        if self.n_states < 3 {
            return Err(Error::InvalidParams("need at least 3 states".into()));
        }
        Ok(())
    }

    fn log_branch(&self) -> bool {
        (self.alpha - 1.0).abs() < 1e-9
    }

    /// α-fair reward of window n.
    pub fn reward(&self, n: usize) -> f64 {
        let x = 1.0 + n as f64;
        if self.log_branch() {
            x.ln()
        } else {
            (x.powf(1.0 - self.alpha) - 1.0) / (1.0 - self.alpha)
        }
    }

    /// Window after a rejection in state n.
    pub fn decrease(&self, n: usize) -> usize {
        ((self.gamma * n as f64).floor() as usize).max(1)
    }

    /// Lowest window visited under the 1-0 threshold n.
    pub fn floor_state(&self, n: usize) -> usize {
        self.decrease(n + 1)
    }
}

/// The constraint function and the budget both count buffer occupancy n·a.
/// Windows 0 and 1 cannot shrink, so a rejection there leaves them in place;
/// window 0 advances at rate λ under either action.
pub fn build_tcp(p: &TcpParams) -> Result<BanditModel> {
    p.validate()?;
    let n = p.n_states;
    let mut m = BanditModel::new(n).with_floor(0);
    for a in Action::BOTH {
        m.add_rate(0, a, 1, p.lambda);
    }
    for s in 1..n {
        if s + 1 < n {
            m.add_rate(s, Action::Active, s + 1, p.lambda);
        } else {
            m.set_overflow(s, Action::Active, p.lambda);
        }
        m.set_cost(s, Action::Active, -p.lambda * p.reward(s));
        m.set_f(s, Action::Active, s as f64);
        if s >= 2 {
            m.set_impulse(s, Action::Passive, vec![Jump { to: p.decrease(s), prob: 1.0, lump: 0.0 }]);
        }
    }
    Ok(m)
}

/// Uniform on S..=n with S = max(⌊γ(n+1)⌋, 1), for 1 ≤ n ≤ N−1.
pub fn tcp_stationary(p: &TcpParams, n: usize) -> Result<Vec<f64>> {
    p.validate()?;
    if n == 0 || n >= p.n_states {
        return Err(Error::InvalidParams(format!("threshold {n} outside 1..{}", p.n_states)));
    }
    let s = p.floor_state(n);
    let mut pi = vec![0.0; p.n_states];
    let mass = 1.0 / (n - s + 1) as f64;
    pi[s..=n].iter_mut().for_each(|x| *x = mass);
    Ok(pi)
}

/// Index of window n, with S the lowest window under threshold n and
/// k = n − S:
/// α ≠ 1: 2λ [k a(n) − Σ_{m=S}^{n−1} a(m)] / (k(k+1)(1−α)), a(m) = 1 − (1+m)^{1−α};
/// α = 1: 2λ [Σ_{m=S}^{n−1} log(1+m) − k log(1+n)] / (k(k+1)).
pub fn tcp_whittle(p: &TcpParams, n: usize) -> Result<f64> {
    p.validate()?;
    let s = p.floor_state(n);
    if n <= s {
        return Err(Error::DegenerateDenominator(0.0));
    }
    let k = (n - s) as f64;
    let denom = k * (k + 1.0);
    if p.log_branch() {
        let sum: f64 = (s..n).map(|m| (1.0 + m as f64).ln()).sum();
        Ok(2.0 * p.lambda * (sum - k * (1.0 + n as f64).ln()) / denom)
    } else {
        let e = 1.0 - p.alpha;
        let a = |m: usize| 1.0 - (1.0 + m as f64).powf(e);
        let sum: f64 = (s..n).map(a).sum();
        Ok(2.0 * p.lambda * (k * a(n) - sum) / (denom * e))
    }
}
