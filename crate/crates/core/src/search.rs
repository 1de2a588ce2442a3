//! Optimal threshold as a function of the energy cost.
//!
//! The optimal threshold for cost `lambda` is 0 when `lambda <= lambda(0)` and
//! `n + 1` when `lambda(n) < lambda <= lambda(n + 1)`. Three routes compute
//! it: a bracketing search over the increasing breakpoints, the fixed-point
//! iteration on the interpolated breakpoint curve, and a brute-force argmax.

use crate::closedform::{lambda_breakpoint, lambda_interp, reward_excess};
use crate::error::SearchError;
use crate::model::ChainParams;

/// Largest threshold the breakpoint search will consider.
pub const MAX_THRESHOLD: u64 = 1 << 52;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Step size of the fixed-point iteration.
    pub alpha: f64,
    pub max_iters: usize,
    /// Upper end of the brute-force scan.
    pub n_cap: u64,
}

impl SearchConfig {
    /// Step `1 / (lambda(1) - lambda(0))` clamped to `[1e-3, 10]`.
    pub fn for_chain(chain: &ChainParams) -> Self {
        let slope = lambda_breakpoint(chain, 1) - lambda_breakpoint(chain, 0);
        let alpha = if slope > 0.0 {
            (1.0 / slope).clamp(1e-3, 10.0)
        } else {
            1.0
        };
        Self {
            alpha,
            max_iters: 1_000_000,
            n_cap: 300,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

/// Selects which route [`optimal_threshold`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Alg1,
    Breakpoints,
    Scan,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alg1" => Ok(Method::Alg1),
            "breakpoints" => Ok(Method::Breakpoints),
            "scan" => Ok(Method::Scan),
            other => Err(format!(
                "unknown method `{other}` (expected alg1, breakpoints or scan)"
            )),
        }
    }
}

pub fn optimal_threshold(
    chain: &ChainParams,
    lambda: f64,
    method: Method,
    config: &SearchConfig,
) -> Result<u64, SearchError> {
    match method {
        Method::Alg1 => find_threshold_alg1(chain, lambda, config),
        Method::Breakpoints => find_threshold_breakpoints(chain, lambda),
        Method::Scan => find_threshold_scan(chain, lambda, config.n_cap),
    }
}

/// Brute-force argmax of the closed-form reward over `0..=n_cap`.
///
/// Rewards are compared through [`reward_excess`], which differs from the
/// reward by a constant. Ties go to the smaller threshold.
pub fn find_threshold_scan(chain: &ChainParams, lambda: f64, n_cap: u64) -> Result<u64, SearchError> {
    let reward = |n| reward_excess(chain, n, lambda);
    let mut best = (0, reward(0));
    for n in 1..=n_cap {
        let r = reward(n);
        if r > best.1 {
            best = (n, r);
        }
    }
    if reward(n_cap + 1) > reward(n_cap) {
        return Err(SearchError::CapTooSmall { n_cap });
    }
    Ok(best.0)
}

/// Locates `lambda` among the strictly increasing breakpoints.
///
/// Returns the smallest `m` with `lambda <= lambda(m)`, found by doubling an
/// upper bracket and then bisecting on integers.
pub fn find_threshold_breakpoints(chain: &ChainParams, lambda: f64) -> Result<u64, SearchError> {
    if lambda <= lambda_breakpoint(chain, 0) {
        return Ok(0);
    }
    // invariant: lambda(lo) < lambda <= lambda(hi)
    let mut lo = 0u64;
    let mut hi = 1u64;
    while lambda_breakpoint(chain, hi) < lambda {
        if hi >= MAX_THRESHOLD {
            return Err(SearchError::Unbounded {
                lambda,
                limit: MAX_THRESHOLD,
            });
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if lambda_breakpoint(chain, mid) < lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Fixed-point iteration `x <- x + alpha (lambda - lambda(x))` on the
/// interpolated breakpoint curve, stopping once `floor(x)` brackets `lambda`.
///
/// Iterates are kept non-negative. Fails with the full iterate trace when
/// `max_iters` steps pass without bracketing.
pub fn find_threshold_alg1(
    chain: &ChainParams,
    lambda: f64,
    config: &SearchConfig,
) -> Result<u64, SearchError> {
    if !(config.alpha > 0.0 && config.alpha.is_finite()) {
        return Err(SearchError::Config("alpha must be positive"));
    }
    if lambda <= lambda_breakpoint(chain, 0) {
        return Ok(0);
    }
    let mut x = 0.0f64;
    let mut trace = Vec::new();
    for _ in 0..config.max_iters {
        x = (x + config.alpha * (lambda - lambda_interp(chain, x))).max(0.0);
        trace.push(x);
        let k = x.floor() as u64;
        if lambda_breakpoint(chain, k) < lambda && lambda <= lambda_breakpoint(chain, k + 1) {
            return Ok(k + 1);
        }
    }
    Err(SearchError::NoConvergence {
        iters: config.max_iters,
        last: x,
        trace,
    })
}
