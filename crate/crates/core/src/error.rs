use thiserror::Error;

/// A raw parameter fell outside its admissible interval.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field} = {value} is outside the admissible interval {interval}")]
pub struct DomainError {
    pub field: &'static str,
    pub value: f64,
    pub interval: &'static str,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("reward is still increasing at n_cap = {n_cap}; raise the cap")]
    CapTooSmall { n_cap: u64 },
    #[error("lambda = {lambda} exceeds every breakpoint up to n = {limit}")]
    Unbounded { lambda: f64, limit: u64 },
    #[error("threshold iteration did not settle after {iters} steps (last iterate {last})")]
    NoConvergence {
        iters: usize,
        last: f64,
        trace: Vec<f64>,
    },
    #[error("invalid search configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("relative value iteration stopped after {iters} sweeps with residual {residual:e}")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("stationary mass {mass:e} above 0.9*cap = {boundary} under the computed policy; raise state_cap")]
    CapSuspicious { mass: f64, boundary: usize },
    #[error("invalid solver configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("need slots > burn_in with at least 100 recorded slots (slots = {slots}, burn_in = {burn_in})")]
    Horizon { slots: u64, burn_in: u64 },
    #[error("kernel cell ({cell}) was visited {visits} times, need at least {required}")]
    InsufficientSamples {
        cell: String,
        visits: u64,
        required: u64,
    },
    #[error("UniformRandom rate {0} is not a probability")]
    BadRate(f64),
}
