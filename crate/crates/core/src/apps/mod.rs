//! Builders and closed-form oracles for the three application models.

pub mod cdn;
pub mod repairman;
pub mod tcp;

pub use cdn::{build_cdn, cdn_optimal_rule, cdn_stationary, cdn_whittle, CdnParams};
pub use repairman::{
    build_repairman, mr_stationary, mr_whittle, mr_whittle_breakdown, mr_whittle_deterioration, mr_whittle_discrete,
    RepairmanParams,
};
pub use tcp::{build_tcp, tcp_stationary, tcp_whittle, TcpParams};

use crate::error::{Error, Result};

fn check_same_len(n: usize, vs: &[(&str, &Vec<f64>)]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParams("no states".into()));
    }
    for (name, v) in vs {
        if v.len() != n {
            return Err(Error::InvalidParams(format!("{name} has {} entries, expected {n}", v.len())));
        }
    }
    Ok(())
}

fn check_nonneg(vs: &[(&str, &Vec<f64>)]) -> Result<()> {
    for (name, v) in vs {
        if let Some(x) = v.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidParams(format!("{name} has invalid rate {x}")));
        }
    }
    Ok(())
}
