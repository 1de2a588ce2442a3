//! Closed-form steady state of the birth/reset chain under a threshold policy.
//!
//! Every quantity is written in terms of `b^(n-1)`. For `n = 0` that power is
//! `1/b`, which is exact because the active growth probability out of state 0
//! is `a c / b` for both metrics. Once `b^(n-1)` drops below [`UNDERFLOW`] the
//! terms carrying it are replaced by their `n -> inf` limits.

use crate::model::ChainParams;

/// Below this value `b^(n-1)` is treated as zero.
pub const UNDERFLOW: f64 = 1e-300;

/// Steady-state performance of the threshold-`n` policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEval {
    pub n: u64,
    /// Long-run average age.
    pub avg_age: f64,
    /// Long-run fraction of attacked slots.
    pub avg_active: f64,
    /// `avg_age - lambda * avg_active`.
    pub reward: f64,
}

/// `b^(n-1)`, or `None` once it has underflowed.
fn b_pow_nm1(chain: &ChainParams, n: u64) -> Option<f64> {
    let v = chain.b.powf(n as f64 - 1.0);
    (v >= UNDERFLOW).then_some(v)
}

fn normalizer(chain: &ChainParams, bpow: f64) -> f64 {
    let ChainParams { a, b, c } = *chain;
    (1.0 - b + a) * (1.0 - c) + a * (c - b) * bpow
}

/// Stationary probability of state `i` under threshold `n`.
pub fn stationary_pmf(chain: &ChainParams, n: u64, i: u64) -> f64 {
    let ChainParams { a, b, c } = *chain;
    let bpow = b_pow_nm1(chain, n).unwrap_or(0.0);
    let head = (1.0 - b) * (1.0 - c) / normalizer(chain, bpow);
    if i == 0 {
        head
    } else if i <= n {
        a * b.powf(i as f64 - 1.0) * head
    } else {
        a * bpow * c.powf((i - n) as f64) * head
    }
}

/// Long-run average age under threshold `n`.
pub fn average_age(chain: &ChainParams, n: u64) -> f64 {
    let ChainParams { a, b, c } = *chain;
    let Some(bpow) = b_pow_nm1(chain, n) else {
        return a / ((1.0 - b) * (1.0 - b + a));
    };
    let nf = n as f64;
    let d = normalizer(chain, bpow);
    let b_n = bpow * b;
    let passive_part = a * (1.0 - c) * (1.0 - (nf + 1.0) * b_n + nf * b_n * b) / ((1.0 - b) * d);
    let active_part = a * (1.0 - b) * bpow * c * (nf * (1.0 - c) + 1.0) / ((1.0 - c) * d);
    passive_part + active_part
}

/// Long-run fraction of attacked slots under threshold `n`.
pub fn average_active(chain: &ChainParams, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let Some(bpow) = b_pow_nm1(chain, n) else {
        return 0.0;
    };
    chain.a * (1.0 - chain.b) * bpow / normalizer(chain, bpow)
}

pub fn average_reward(chain: &ChainParams, n: u64, lambda: f64) -> PolicyEval {
    let avg_age = average_age(chain, n);
    let avg_active = average_active(chain, n);
    PolicyEval {
        n,
        avg_age,
        avg_active,
        reward: avg_age - lambda * avg_active,
    }
}

/// Energy cost at which thresholds `n` and `n + 1` earn the same reward.
///
/// Strictly increasing in `n`. Evaluated from its closed form rather than the
/// ratio of reward differences, which cancels badly once `b^n` is small.
pub fn lambda_breakpoint(chain: &ChainParams, n: u64) -> f64 {
    let ChainParams { a, b, c } = *chain;
    if n == 0 {
        return a * (c - b) / ((1.0 - c) * (b * (1.0 - c) + a * c));
    }
    let nf = n as f64;
    let scale = (c - b) / ((1.0 - b).powi(2) * (1.0 - b + a) * (1.0 - c));
    scale
        * (nf * (1.0 - c) * (1.0 - b + a) * (1.0 - b) - a * b.powf(nf) * (c - b)
            + a * (c - b)
            + (1.0 - b).powi(2))
}

/// Breakpoint formula specialised to `a == b`.
///
/// Matches [`lambda_breakpoint`] on AoI chains. When `a != b` it is off by
/// `(a - b)(c - b)^2 / ((1 - b)^2 (1 - b + a)(1 - c))` for `n >= 1` (with a
/// matching error at `n = 0`), so it must not be used for AoII.
pub fn lambda_breakpoint_equal_ab(chain: &ChainParams, n: u64) -> f64 {
    let ChainParams { a, b, c } = *chain;
    if n == 0 {
        let num = a * (c - b) * (a * b + c * b + 1.0 - a * c - 2.0 * b);
        let den = b * (1.0 - c) * (1.0 - b) * ((1.0 - b + a) * (1.0 - c) + a * (c - b) / b);
        return num / den;
    }
    let nf = n as f64;
    let scale = (c - b) / ((1.0 - b).powi(2) * (1.0 - b + a) * (1.0 - c));
    scale
        * (nf * (1.0 - c) * (1.0 - b + a) * (1.0 - b) - a * b.powf(nf) * (c - b)
            + (c - b) * b
            + (1.0 - b).powi(2))
}

/// Piecewise-linear extension of [`lambda_breakpoint`] to real `x >= 0`.
pub fn lambda_interp(chain: &ChainParams, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    let i = x.floor();
    let lo = lambda_breakpoint(chain, i as u64);
    if x == i {
        return lo;
    }
    let hi = lambda_breakpoint(chain, i as u64 + 1);
    hi * (x - i) - lo * (x - i - 1.0)
}

/// Reward of threshold `n` minus the never-attack average age.
///
/// For `n >= 1` the excess is `a b^(n-1) / D` times an `O(1)` factor, so it
/// keeps full relative precision even where `average_reward` has rounded
/// every large threshold to the same value.
pub fn reward_excess(chain: &ChainParams, n: u64, lambda: f64) -> f64 {
    let (limit, _) = passive_limit(chain);
    if n == 0 {
        return average_reward(chain, 0, lambda).reward - limit;
    }
    let ChainParams { a, b, c } = *chain;
    let nf = n as f64;
    let bpow = b.powf(nf - 1.0);
    let e = (1.0 - b + a) * (1.0 - c);
    let g = e * (1.0 - c) * b * (nf * b - nf - 1.0) / (1.0 - b)
        + e * (1.0 - b) * c * (nf * (1.0 - c) + 1.0) / (1.0 - c)
        - a * (1.0 - c) * (c - b) / (1.0 - b);
    a * bpow / normalizer(chain, bpow) * (g / e - lambda * (1.0 - b))
}

/// `n -> inf` limits `(avg_age, avg_active)`, i.e. the never-attack chain.
pub fn passive_limit(chain: &ChainParams) -> (f64, f64) {
    let ChainParams { a, b, .. } = *chain;
    (a / ((1.0 - b) * (1.0 - b + a)), 0.0)
}
