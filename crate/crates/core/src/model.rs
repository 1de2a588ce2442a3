//! System parameters and the per-slot age kernels.
//!
//! Both metrics reduce to a birth/reset chain on the naturals: from state
//! `s` the age either grows to `s + 1` or resets to `0`. Under a threshold
//! policy the growth probability is `a` at state 0, `b` on the passive states
//! `1..n` and `c` on the active states `n..`.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::DomainError;

/// Physical parameters of the channel, jammer, source and energy cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Per-slot channel success probability.
    pub p: f64,
    /// Probability that an attack jams the slot.
    pub q: f64,
    /// Per-slot flip probability of the binary source.
    pub r: f64,
    /// Energy cost charged for every attacked slot.
    pub lambda: f64,
}

impl SystemParams {
    pub fn new(p: f64, q: f64, r: f64, lambda: f64) -> Result<Self, DomainError> {
        validate_params(p, q, r, lambda)
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self, DomainError> {
        validate_params(self.p, self.q, self.r, lambda)
    }
}

static WARNED_HALF: AtomicBool = AtomicBool::new(false);

/// Checks every field against its admissible interval.
///
/// `p` and `q` must lie strictly inside `(0, 1)`, `r` in `(0, 1/2]` and
/// `lambda` must be positive and finite. `r = 1/2` is accepted with a warning.
pub fn validate_params(p: f64, q: f64, r: f64, lambda: f64) -> Result<SystemParams, DomainError> {
    let open_unit = |field, value: f64| {
        if value > 0.0 && value < 1.0 {
            Ok(())
        } else {
            Err(DomainError {
                field,
                value,
                interval: "(0, 1)",
            })
        }
    };
    open_unit("p", p)?;
    open_unit("q", q)?;
    if !(r > 0.0 && r <= 0.5) {
        return Err(DomainError {
            field: "r",
            value: r,
            interval: "(0, 1/2]",
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(DomainError {
            field: "lambda",
            value: lambda,
            interval: "(0, inf)",
        });
    }
    if r == 0.5 && !WARNED_HALF.swap(true, Ordering::Relaxed) {
        log::warn!("r = 1/2 sits on the boundary of the threshold-structure argument");
    }
    Ok(SystemParams { p, q, r, lambda })
}

/// Age metric tracked at the monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    /// Age of information.
    Aoi,
    /// Age of incorrect information.
    Aoii,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Aoi, Metric::Aoii];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Aoi => "aoi",
            Metric::Aoii => "aoii",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aoi" => Ok(Metric::Aoi),
            "aoii" => Ok(Metric::Aoii),
            other => Err(format!("unknown metric `{other}` (expected aoi or aoii)")),
        }
    }
}

/// Attacker action for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Passive,
    Active,
}

impl Action {
    pub fn is_active(self) -> bool {
        matches!(self, Action::Active)
    }

    pub fn indicator(self) -> f64 {
        if self.is_active() {
            1.0
        } else {
            0.0
        }
    }
}

/// Increment probabilities of the generic birth/reset chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// Growth probability out of state 0 when passive.
    pub a: f64,
    /// Growth probability out of `s >= 1` when passive.
    pub b: f64,
    /// Growth probability out of `s >= 1` when active.
    pub c: f64,
}

impl ChainParams {
    /// Builds a chain directly, checking `0 < a <= b < c < 1`.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, DomainError> {
        if !(b > 0.0 && b < 1.0) {
            return Err(DomainError {
                field: "b",
                value: b,
                interval: "(0, 1)",
            });
        }
        if !(c > b && c < 1.0) {
            return Err(DomainError {
                field: "c",
                value: c,
                interval: "(b, 1)",
            });
        }
        if !(a > 0.0 && a <= b) {
            return Err(DomainError {
                field: "a",
                value: a,
                interval: "(0, b]",
            });
        }
        Ok(Self { a, b, c })
    }

    /// Growth probability out of state 0 when it is attacked.
    ///
    /// Both metric mappings satisfy `P(0 -> 1 | active) = a c / b`, which is
    /// what lets the threshold `n = 0` reuse the general formulas.
    pub fn active_at_zero(&self) -> f64 {
        self.a * self.c / self.b
    }

    /// Growth probability out of `state` under a threshold-`n` policy.
    pub fn growth(&self, n: u64, state: u64) -> f64 {
        let active = state >= n;
        match (state == 0, active) {
            (true, false) => self.a,
            (true, true) => self.active_at_zero(),
            (false, false) => self.b,
            (false, true) => self.c,
        }
    }
}

/// Maps the physical parameters onto the generic chain for `metric`.
pub fn to_chain(params: &SystemParams, metric: Metric) -> ChainParams {
    let SystemParams { p, q, r, .. } = *params;
    match metric {
        Metric::Aoi => {
            let b = 1.0 - p;
            ChainParams {
                a: b,
                b,
                c: q + (1.0 - p) * (1.0 - q),
            }
        }
        Metric::Aoii => ChainParams {
            a: (1.0 - p) * r,
            b: (1.0 - p) * (1.0 - r),
            c: p * q * (1.0 - r) + (1.0 - p) * (1.0 - r),
        },
    }
}

/// One-slot probability that the age grows by one.
///
/// The complement is the probability of a reset to 0. `at_zero` selects the
/// state class (only AoII distinguishes it), `active` is the attacker's action.
pub fn increment_prob(params: &SystemParams, metric: Metric, at_zero: bool, active: bool) -> f64 {
    let SystemParams { p, q, r, .. } = *params;
    match (metric, at_zero, active) {
        (Metric::Aoi, _, true) => q + (1.0 - q) * (1.0 - p),
        (Metric::Aoi, _, false) => 1.0 - p,
        (Metric::Aoii, true, true) => p * q * r + (1.0 - p) * r,
        (Metric::Aoii, true, false) => (1.0 - p) * r,
        (Metric::Aoii, false, true) => p * q * (1.0 - r) + (1.0 - p) * (1.0 - r),
        (Metric::Aoii, false, false) => (1.0 - p) * (1.0 - r),
    }
}

/// Per-state growth kernel derived from the physical model.
#[derive(Debug, Clone, Copy)]
pub struct AgeKernel {
    params: SystemParams,
    metric: Metric,
}

impl AgeKernel {
    pub fn new(params: SystemParams, metric: Metric) -> Self {
        Self { params, metric }
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn growth(&self, state: u64, action: Action) -> f64 {
        increment_prob(&self.params, self.metric, state == 0, action.is_active())
    }
}
