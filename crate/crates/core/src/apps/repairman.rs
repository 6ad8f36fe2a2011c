//! Machine repairman: a machine deteriorates upwards through its states,
//! may break down catastrophically back to the new state, and is restored to
//! state 0 by repair when active.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, BanditModel};

use super::{check_nonneg, check_same_len};

/// Per-state parameters; all vectors have the truncation length N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairmanParams {
    /// Deterioration rate n → n+1.
    pub lambda: Vec<f64>,
    /// Repair rate n → 0 under the active action.
    pub r: Vec<f64>,
    /// Breakdown rate n → 0 under the passive action.
    pub psi: Vec<f64>,
    /// Lump cost per breakdown.
    pub lb: Vec<f64>,
    /// Lump cost per repair.
    pub lr: Vec<f64>,
    /// Deterioration cost rate.
    pub cd: Vec<f64>,
}

impl RepairmanParams {
    /// State-independent parameters broadcast over `n` states.
    pub fn uniform(n: usize, lambda: f64, r: f64, psi: f64, lb: f64, lr: f64, cd: impl Fn(usize) -> f64) -> Self {
        Self {
            lambda: vec![lambda; n],
            r: vec![r; n],
            psi: vec![psi; n],
            lb: vec![lb; n],
            lr: vec![lr; n],
            cd: (0..n).map(cd).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.lambda.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        check_same_len(n, &[("r", &self.r), ("psi", &self.psi), ("lb", &self.lb), ("lr", &self.lr), ("cd", &self.cd)])?;
        check_nonneg(&[("lambda", &self.lambda), ("r", &self.r), ("psi", &self.psi)])?;
        for (name, v) in [("lb", &self.lb), ("lr", &self.lr), ("cd", &self.cd)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if let Some(i) = (0..n.saturating_sub(1)).find(|&i| self.lambda[i] <= 0.0) {
            return Err(Error::InvalidParams(format!("lambda({i}) must be positive below the top state")));
        }
        Ok(())
    }

    /// Repair rates non-decreasing with r(1) > 0.
    pub fn repair_monotone(&self) -> bool {
        self.r.len() < 2 || (self.r[1] > 0.0 && self.r[1..].windows(2).all(|w| w[1] >= w[0]))
    }

    /// p(j) = λ(j) / (λ(j) + ψ(j)): probability of deteriorating before breaking down.
    fn p(&self, j: usize) -> f64 {
        self.lambda[j] / (self.lambda[j] + self.psi[j])
    }

    /// P_i = Π_{j=1..i} p(j), with P_{-1} = P_0 = 1.
    fn big_p(&self) -> Vec<f64> {
        let mut out = vec![1.0; self.n_states()];
        for i in 1..out.len() {
            out[i] = out[i - 1] * self.p(i);
        }
        out
    }
}

/// Finite-rate model; the constraint function is the passive indicator and
/// the budget counts active machines (repairmen in use).
pub fn build_repairman(p: &RepairmanParams) -> Result<BanditModel> {
    p.validate()?;
    let n = p.n_states();
    let mut m = BanditModel::new(n);
    for s in 0..n {
        if s + 1 < n {
            m.add_rate(s, Action::Passive, s + 1, p.lambda[s]);
        } else if p.lambda[s] > 0.0 {
            m.set_overflow(s, Action::Passive, p.lambda[s]);
        }
        if s > 0 && p.psi[s] > 0.0 {
            m.add_rate(s, Action::Passive, 0, p.psi[s]);
        }
        if s > 0 && p.r[s] > 0.0 {
            m.add_rate(s, Action::Active, 0, p.r[s]);
        }
        m.set_cost(s, Action::Passive, p.psi[s] * p.lb[s] + p.cd[s]);
        m.set_cost(s, Action::Active, p.r[s] * p.lr[s]);
        m.set_f(s, Action::Passive, 1.0).set_f(s, Action::Active, 0.0);
        m.set_usage(s, Action::Passive, 0.0).set_usage(s, Action::Active, 1.0);
    }
    Ok(m)
}

/// Stationary distribution under the 0-1 threshold `n` (passive on 0..=n,
/// repair in n+1), for n in −1..=N−2.
pub fn mr_stationary(p: &RepairmanParams, n: isize) -> Result<Vec<f64>> {
    p.validate()?;
    let size = p.n_states();
    if n < -1 || n > size as isize - 2 {
        return Err(Error::InvalidParams(format!("threshold {n} outside -1..={}", size as isize - 2)));
    }
    let mut pi = vec![0.0; size];
    if n == -1 {
        pi[0] = 1.0;
        return Ok(pi);
    }
    let n = n as usize;
    let big_p = p.big_p();
    if p.r[n + 1] <= 0.0 {
        return Err(Error::InvalidParams(format!("r({}) must be positive", n + 1)));
    }
    for m in 0..=n {
        pi[m] = big_p[m] / p.lambda[m];
    }
    pi[n + 1] = big_p[n] / p.r[n + 1];
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= z);
    Ok(pi)
}

/// General repairman index at state `n` (0..=N−2). Deterioration costs are
/// summed from state 1, so a cost rate in state 0 is not accounted for.
pub fn mr_whittle(p: &RepairmanParams, n: usize) -> Result<f64> {
    p.validate()?;
    let size = p.n_states();
    if n + 1 >= size {
        return Err(Error::InvalidParams(format!("state {n} needs a successor within {size} states")));
    }
    let big_p = p.big_p();
    let pp = |i: isize| if i < 0 { 1.0 } else { big_p[i as usize] };
    let p_sum = |k: isize| (0..=k).map(|i| big_p[i as usize] / p.lambda[i as usize]).sum::<f64>();
    let c_sum = |k: isize| {
        (1..=k)
            .map(|i| {
                let i = i as usize;
                (big_p[i - 1] - big_p[i]) * p.lb[i] + big_p[i] * p.cd[i] / p.lambda[i]
            })
            .sum::<f64>()
    };
    let k = n as isize;
    let (r_n, r_n1) = (p.r[n], p.r[n + 1]);
    let num = (c_sum(k) + p.lr[n + 1] * pp(k)) * (p_sum(k - 1) + pp(k - 1) / r_n)
        - (c_sum(k - 1) + p.lr[n] * pp(k - 1)) * (p_sum(k) + pp(k) / r_n1);
    let den = pp(k - 1) / r_n * p_sum(k) - pp(k) / r_n1 * p_sum(k - 1);
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(num / den)
}

fn constant(v: &[f64]) -> Option<f64> {
    let first = *v.first()?;
    v.iter().all(|&x| x == first).then_some(first)
}

/// No breakdowns, constant repair rate and repair cost:
/// W(n) = r [Σ_{i<n} (C^d(n) − C^d(i))/λ(i) + (C^d(n) − r L^r)/r].
pub fn mr_whittle_deterioration(p: &RepairmanParams, n: usize) -> Result<f64> {
    p.validate()?;
    let (Some(r), Some(lr)) = (constant(&p.r), constant(&p.lr)) else {
        return Err(Error::InvalidParams("repair rate and repair cost must be state-independent".into()));
    };
    if p.psi.iter().any(|&x| x != 0.0) || p.lb.iter().any(|&x| x != 0.0) {
        return Err(Error::InvalidParams("breakdown rate and cost must be zero".into()));
    }
    let cd = &p.cd;
    let s: f64 = (0..n).map(|i| (cd[n] - cd[i]) / p.lambda[i]).sum();
    Ok(r * (s + (cd[n] - r * lr) / r))
}

/// No deterioration cost, constant repair rate, breakdown cost B and repair
/// cost R. The repair cost enters as the rate-weighted r·R, which is what the
/// general index reduces to.
pub fn mr_whittle_breakdown(p: &RepairmanParams, n: usize) -> Result<f64> {
    p.validate()?;
    let (Some(r), Some(big_r), Some(b)) = (constant(&p.r), constant(&p.lr), constant(&p.lb)) else {
        return Err(Error::InvalidParams("repair rate and lump costs must be state-independent".into()));
    };
    if p.cd.iter().any(|&x| x != 0.0) {
        return Err(Error::InvalidParams("deterioration cost must be zero".into()));
    }
    if n == 0 || n >= p.n_states() {
        return Err(Error::InvalidParams(format!("state {n} outside 1..N")));
    }
    let big_p = p.big_p();
    let t = |k: usize| (0..=k).map(|i| big_p[i] / p.lambda[i]).sum::<f64>();
    let pn = p.p(n);
    let core = t(n) - pn * t(n - 1);
    let den = core / r;
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(b * ((1.0 - pn) / r - pn / p.lambda[n] + core) / den - r * big_r)
}

/// Discrete-time form of [`mr_whittle_breakdown`], valid when r ≡ 1 and
/// λ(n) + ψ(n) = 1: W(n) = B (T̂(n) − p(n)T̂(n−1) − p(n)) / (T̂(n) − p(n)T̂(n−1)) − R,
/// with T̂(n) = Σ_{i≤n} P_i / λ(i).
pub fn mr_whittle_discrete(p: &RepairmanParams, n: usize) -> Result<f64> {
    p.validate()?;
    if p.r.iter().any(|&r| (r - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidParams("repair rate must be 1".into()));
    }
    if (1..p.n_states()).any(|i| (p.lambda[i] + p.psi[i] - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidParams("lambda + psi must equal 1".into()));
    }
    let (Some(big_r), Some(b)) = (constant(&p.lr), constant(&p.lb)) else {
        return Err(Error::InvalidParams("lump costs must be state-independent".into()));
    };
    if n == 0 || n >= p.n_states() {
        return Err(Error::InvalidParams(format!("state {n} outside 1..N")));
    }
    let big_p = p.big_p();
    let t_hat = |k: usize| (0..=k).map(|i| big_p[i] / p.lambda[i]).sum::<f64>();
    let pn = p.p(n);
    let d = t_hat(n) - pn * t_hat(n - 1);
    if d.abs() < 1e-12 {
        return Err(Error::DegenerateDenominator(d));
    }
    Ok(b * (d - pn) / d - big_r)
}
