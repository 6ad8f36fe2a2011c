use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("impulse cycle among states {0:?}")]
    ImpulseCycle(Vec<usize>),
    #[error("effective chain has {0} closed recurrent classes")]
    NotUnichain(usize),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("{states} states exceed the subset-enumeration cap of {max}")]
    TooManyStates { states: usize, max: usize },
    #[error("no enumerated policy yields a unichain process")]
    AllPoliciesNonErgodic,
    #[error("degenerate denominator {0:e}")]
    DegenerateDenominator(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("all-passive assignment violates the budget in joint state {0:?}")]
    InfeasibleState(Vec<usize>),
    #[error("bandit {bandit} left the truncated state space from state {state}")]
    ExplodedState { bandit: usize, state: usize },
    #[error("no index value for bandit {bandit} in state {state}")]
    MissingIndex { bandit: usize, state: usize },
    #[error("impulse resolution did not terminate within {0} jumps")]
    ImpulseLoop(usize),
}
