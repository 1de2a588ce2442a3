//! Independent oracles and the self-check suite behind `agejam verify`.
//!
//! The oracles never touch the closed forms. Stationary distributions come
//! from solving the balance equations of the truncated chain built from the
//! physical kernel; breakpoints come from exact rational arithmetic, where
//! the differences of average age and attack rate do not cancel.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::closedform::{
    average_active, average_age, average_reward, lambda_breakpoint, stationary_pmf,
};
use crate::mdp::{certify_structure, rvi_solve, RviConfig};
use crate::model::{to_chain, validate_params, Action, AgeKernel, ChainParams, Metric, SystemParams};
use crate::search::{
    find_threshold_alg1, find_threshold_breakpoints, find_threshold_scan, SearchConfig,
};
use crate::error::SimError;
use crate::sim::{
    empirical_kernel, simulate_aggregate, simulate_full, AttackPolicy, SimConfig, TrajectoryStats,
};

pub const GRID_PQ: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const GRID_R: [f64; 4] = [0.1, 0.25, 0.4, 0.5];

/// `p = q = 1/2, r = 1/4`.
pub const SCENARIO_1: (f64, f64, f64) = (0.5, 0.5, 0.25);
/// `p = 0.1, q = 1/2, r = 1/2`.
pub const SCENARIO_2: (f64, f64, f64) = (0.1, 0.5, 0.5);

pub fn scenario(which: (f64, f64, f64), lambda: f64) -> SystemParams {
    validate_params(which.0, which.1, which.2, lambda).expect("scenario parameters are valid")
}

/// `1.0, 1.1, ..., 10.0`.
pub fn lambda_grid() -> Vec<f64> {
    (10..=100).map(|k| k as f64 / 10.0).collect()
}

/// Every `(params, metric)` of the `p, q, r` test grid with `lambda = 1`.
pub fn parameter_grid() -> Vec<(SystemParams, Metric)> {
    let mut out = Vec::new();
    for p in GRID_PQ {
        for q in GRID_PQ {
            for r in GRID_R {
                let params = validate_params(p, q, r, 1.0).unwrap();
                for metric in Metric::ALL {
                    out.push((params, metric));
                }
            }
        }
    }
    out
}

/// Smallest cap past threshold `n` whose all-active tail mass is below `tail`.
pub fn cap_for_tail(chain: &ChainParams, n: u64, tail: f64) -> u64 {
    n + 1 + (tail.ln() / chain.c.ln()).ceil() as u64
}

/// Threshold-`n` action for `state`.
fn threshold_action(n: u64, state: u64) -> Action {
    if state >= n {
        Action::Active
    } else {
        Action::Passive
    }
}

/// Stationary distribution of the threshold-`n` chain truncated at `cap`
/// (growth out of `cap` saturates), from the balance equations.
///
/// Every state `j >= 1` has the single inbound edge `j - 1 -> j`, so the
/// system is solved by forward substitution from `u(0) = 1` and normalised;
/// the equation for state 0 is then implied.
pub fn balance_pmf(kernel: &AgeKernel, n: u64, cap: u64) -> Vec<f64> {
    let growth = |s: u64| kernel.growth(s, threshold_action(n, s));
    let mut u = vec![1.0];
    for s in 0..cap {
        u.push(u[s as usize] * growth(s));
    }
    u[cap as usize] /= 1.0 - growth(cap);
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|x| *x /= total);
    u
}

/// Largest violation of the balance equations `u(j) = sum_i P(i -> j) u(i)`
/// of the truncated chain, summed term by term.
pub fn balance_residual(kernel: &AgeKernel, n: u64, pmf: &[f64]) -> f64 {
    let cap = pmf.len() - 1;
    let growth = |s: usize| kernel.growth(s as u64, threshold_action(n, s as u64));
    let inflow_zero: f64 = pmf
        .iter()
        .enumerate()
        .map(|(i, u)| u * (1.0 - growth(i)))
        .sum();
    let mut worst = (pmf[0] - inflow_zero).abs();
    for j in 1..=cap {
        let mut inflow = pmf[j - 1] * growth(j - 1);
        if j == cap {
            inflow += pmf[cap] * growth(cap);
        }
        worst = worst.max((pmf[j] - inflow).abs());
    }
    worst
}

/// Average age and attack rate of the untruncated threshold-`n` chain.
///
/// States up to `cap` come from the balance recursion; past `cap` every state
/// is active with growth `c`, so the remaining mass is summed as a geometric
/// series.
pub fn oracle_moments(kernel: &AgeKernel, n: u64, cap: u64) -> (f64, f64) {
    assert!(cap > n);
    let growth = |s: u64| kernel.growth(s, threshold_action(n, s));
    let mut u = vec![1.0f64];
    for s in 0..cap {
        u.push(u[s as usize] * growth(s));
    }
    let c = growth(cap);
    let last = u[cap as usize];
    let m = cap as f64;
    let tail_mass = last * c / (1.0 - c);
    let tail_age = last * (m * c / (1.0 - c) + c / (1.0 - c).powi(2));
    let total = u.iter().sum::<f64>() + tail_mass;
    let age = u
        .iter()
        .enumerate()
        .map(|(i, x)| i as f64 * x)
        .sum::<f64>()
        + tail_age;
    let active = u[n as usize..].iter().sum::<f64>() + tail_mass;
    (age / total, active / total)
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// The chain with `a, b, c` held exactly as `A / T, B / T, C / T` for a
/// common power of two `T` (every finite f64 is a dyadic rational).
///
/// Moments are accumulated as integers over a shared denominator and only
/// reduced once at the end; reducing after every operation is far slower.
#[derive(Debug, Clone)]
pub struct ExactChain {
    a: BigInt,
    b: BigInt,
    c: BigInt,
    t: BigInt,
}

impl ExactChain {
    pub fn new(chain: &ChainParams) -> Self {
        let [a, b, c] = [chain.a, chain.b, chain.c].map(exact);
        let t = [&a, &b, &c]
            .iter()
            .map(|x| x.denom().clone())
            .max()
            .expect("three entries");
        let scale = |x: &BigRational| x.numer() * (&t / x.denom());
        Self {
            a: scale(&a),
            b: scale(&b),
            c: scale(&c),
            t,
        }
    }

    /// Integers `(age, active, mass)` with average age `age / mass` and
    /// attack rate `active / mass` under threshold `n`.
    ///
    /// The unnormalised balance solution `u(0) = 1, u(s + 1) = u(s) growth(s)`
    /// is scaled to integers `U(s)`; every state from `m = n + 1` on is active
    /// with growth `c`, so that tail is summed as a geometric series.
    fn raw_moments(&self, n: u64) -> (BigInt, BigInt, BigInt) {
        let (a, b, c, t) = (&self.a, &self.b, &self.c, &self.t);
        let m = n + 1;
        // U(s) for s < m, and U(m)
        let mut head = Vec::with_capacity(m as usize);
        let last = if n == 0 {
            // u(1) = a c / b, scaled by b T
            head.push(b * t);
            a * c
        } else {
            // u(s) = a b^(s-1) for 1 <= s <= n, u(m) = a b^(n-1) c, scaled by T^m
            let mut t_pow = vec![BigInt::one()];
            for _ in 0..m {
                let next = t_pow.last().unwrap() * t;
                t_pow.push(next);
            }
            head.push(t_pow[m as usize].clone());
            let mut a_bpow = a.clone();
            for s in 1..=n {
                head.push(&a_bpow * &t_pow[(m - s) as usize]);
                if s < n {
                    a_bpow *= b;
                }
            }
            a_bpow * c
        };
        let gap = t - c;
        let gap2 = &gap * &gap;
        let mut mass = BigInt::from(0);
        let mut age = BigInt::from(0);
        let mut active = BigInt::from(0);
        for (s, u) in head.iter().enumerate() {
            mass += u;
            age += u * BigInt::from(s);
            if s as u64 >= n {
                active += u;
            }
        }
        // tail sums of u(m) c^k, k >= 0: mass u(m) / (1 - c),
        // age u(m) (m / (1 - c) + c / (1 - c)^2); everything times (T - C)^2
        let tail_mass = &last * t * &gap;
        let tail_age = &last * (BigInt::from(m) * t * &gap + c * t);
        let mass = mass * &gap2 + &tail_mass;
        let age = age * &gap2 + tail_age;
        let active = active * &gap2 + tail_mass;
        (age, active, mass)
    }

    /// Exact `(average age, attack rate)` under threshold `n`.
    pub fn moments(&self, n: u64) -> (BigRational, BigRational) {
        let (age, active, mass) = self.raw_moments(n);
        (BigRational::new(age, mass.clone()), BigRational::new(active, mass))
    }

    /// Integers `(num, den)`, `den > 0`, with
    /// `num / den = (avg_age(n+1) - avg_age(n)) / (avg_active(n+1) - avg_active(n))`,
    /// plus whether both differences are strictly negative.
    pub fn breakpoint_parts(&self, n: u64) -> (BigInt, BigInt, bool) {
        let (s0, a0, m0) = self.raw_moments(n);
        let (s1, a1, m1) = self.raw_moments(n + 1);
        let d_age = &s1 * &m0 - &s0 * &m1;
        let d_active = &a1 * &m0 - &a0 * &m1;
        let decreasing = d_age.is_negative() && d_active.is_negative();
        if d_active.is_negative() {
            (-d_age, -d_active, decreasing)
        } else {
            (d_age, d_active, decreasing)
        }
    }

    /// `(avg_age(n+1) - avg_age(n)) / (avg_active(n+1) - avg_active(n))`.
    pub fn breakpoint(&self, n: u64) -> BigRational {
        let (num, den, _) = self.breakpoint_parts(n);
        BigRational::new(num, den)
    }
}

/// `num / den` rounded to f64, for integers far outside the f64 range.
pub fn ratio_to_f64(num: &BigInt, den: &BigInt) -> f64 {
    let shift = num.bits().min(den.bits()).saturating_sub(64);
    let (n, d) = (num >> shift, den >> shift);
    n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn rel_err(x: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        x.abs()
    } else {
        ((x - reference) / reference).abs()
    }
}

/// How thorough `agejam verify` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Closed-form and search oracles only; a few seconds.
    Fast,
    /// Adds relative value iteration and Monte Carlo checks.
    Full,
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown level `{other}` (expected fast or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Summary on success, first failing tuple on failure.
    pub detail: String,
}

type CheckResult = Result<String, String>;

type Check = Box<dyn Fn() -> CheckResult>;

type SimFn = fn(&SystemParams, Metric, AttackPolicy, &SimConfig) -> Result<TrajectoryStats, SimError>;

fn tuple(params: &SystemParams, metric: Metric) -> String {
    format!("metric={metric} p={} q={} r={}", params.p, params.q, params.r)
}

/// Closed-form pmf sums to one (explicit head plus geometric tail).
pub fn check_normalization() -> CheckResult {
    let mut worst = 0.0f64;
    for (params, metric) in parameter_grid() {
        let chain = to_chain(&params, metric);
        for n in 0..=12u64 {
            let head: f64 = (0..=n).map(|i| stationary_pmf(&chain, n, i)).sum();
            let tail = stationary_pmf(&chain, n, n + 1) / (1.0 - chain.c);
            let err = (head + tail - 1.0).abs();
            if err > 1e-12 {
                return Err(format!("{} n={n} mass={}", tuple(&params, metric), head + tail));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!("max |mass - 1| = {worst:.2e}"))
}

/// Closed-form pmf against the balance-equation solve, `n = 1..=12`.
pub fn check_stationary() -> CheckResult {
    let mut worst = 0.0f64;
    for (params, metric) in parameter_grid() {
        let chain = to_chain(&params, metric);
        let kernel = AgeKernel::new(params, metric);
        for n in 1..=12u64 {
            let cap = cap_for_tail(&chain, n, 1e-12);
            let pmf = balance_pmf(&kernel, n, cap);
            let residual = balance_residual(&kernel, n, &pmf);
            if residual > 1e-12 {
                return Err(format!(
                    "{} n={n} balance residual {residual:e}",
                    tuple(&params, metric)
                ));
            }
            for (i, u) in pmf.iter().enumerate() {
                let diff = (stationary_pmf(&chain, n, i as u64) - u).abs();
                if diff >= 1e-9 {
                    return Err(format!("{} n={n} i={i} diff={diff:e}", tuple(&params, metric)));
                }
                worst = worst.max(diff);
            }
        }
    }
    Ok(format!("max |closed form - balance solve| = {worst:.2e}"))
}

/// Average age and attack rate against the balance-equation moments,
/// `n = 0..=12`; `n = 0` uses the physical always-attack chain.
pub fn check_moments() -> CheckResult {
    let mut worst = 0.0f64;
    for (params, metric) in parameter_grid() {
        let chain = to_chain(&params, metric);
        let kernel = AgeKernel::new(params, metric);
        for n in 0..=12u64 {
            let cap = cap_for_tail(&chain, n, 1e-12);
            let (age, active) = oracle_moments(&kernel, n, cap);
            let e_age = rel_err(average_age(&chain, n), age);
            let e_active = rel_err(average_active(&chain, n), active);
            let e = e_age.max(e_active);
            if e >= 1e-9 {
                return Err(format!(
                    "{} n={n} age {} vs {age}, active {} vs {active}",
                    tuple(&params, metric),
                    average_age(&chain, n),
                    average_active(&chain, n)
                ));
            }
            worst = worst.max(e);
        }
    }
    Ok(format!("max relative error = {worst:.2e}"))
}

/// Closed-form breakpoints against the exact reward-difference ratio for
/// `n = 0..=max_n`, plus strict monotonicity of breakpoints and moments.
pub fn check_breakpoints(max_n: u64) -> CheckResult {
    let mut worst = 0.0f64;
    for (params, metric) in parameter_grid() {
        let chain = to_chain(&params, metric);
        let exact = ExactChain::new(&chain);
        let mut prev: Option<(BigInt, BigInt)> = None;
        for n in 0..=max_n {
            let (num, den, decreasing) = exact.breakpoint_parts(n);
            if !decreasing {
                return Err(format!(
                    "{} n={n} age or attack rate not strictly decreasing",
                    tuple(&params, metric)
                ));
            }
            let reference = ratio_to_f64(&num, &den);
            let closed = lambda_breakpoint(&chain, n);
            let e = rel_err(closed, reference);
            if e >= 1e-9 {
                return Err(format!(
                    "{} n={n} closed form {closed} vs ratio {reference}",
                    tuple(&params, metric)
                ));
            }
            worst = worst.max(e);
            if lambda_breakpoint(&chain, n + 1) <= closed {
                return Err(format!("{} n={n} breakpoints not increasing", tuple(&params, metric)));
            }
            if let Some((pn, pd)) = &prev {
                if &num * pd <= pn * &den {
                    return Err(format!(
                        "{} n={n} exact breakpoints not increasing",
                        tuple(&params, metric)
                    ));
                }
            }
            prev = Some((num, den));
        }
    }
    Ok(format!("max relative error = {worst:.2e}"))
}

fn tied(chain: &ChainParams, lambda: f64, x: u64, y: u64) -> bool {
    let rx = average_reward(chain, x, lambda).reward;
    let ry = average_reward(chain, y, lambda).reward;
    x.abs_diff(y) == 1 && (rx - ry).abs() <= 1e-9 * rx.abs().max(1.0)
}

/// Scan, breakpoint bracketing and the fixed-point iteration agree on both
/// scenarios over the lambda grid.
pub fn check_search() -> CheckResult {
    let mut points = 0;
    for which in [SCENARIO_1, SCENARIO_2] {
        for metric in Metric::ALL {
            let chain = to_chain(&scenario(which, 1.0), metric);
            let config = SearchConfig::for_chain(&chain);
            for lambda in lambda_grid() {
                let here = format!("{} lambda={lambda}", tuple(&scenario(which, 1.0), metric));
                let bp = find_threshold_breakpoints(&chain, lambda).map_err(|e| format!("{here}: {e}"))?;
                let scan = find_threshold_scan(&chain, lambda, 300).map_err(|e| format!("{here}: {e}"))?;
                let alg1 =
                    find_threshold_alg1(&chain, lambda, &config).map_err(|e| format!("{here}: {e}"))?;
                for (name, n) in [("scan", scan), ("alg1", alg1)] {
                    if n != bp && !tied(&chain, lambda, n, bp) {
                        return Err(format!("{here} breakpoints={bp} {name}={n}"));
                    }
                }
                points += 1;
            }
        }
    }
    Ok(format!("{points} grid points agree"))
}

/// Relative value iteration: gain, threshold and structure at integer lambda.
pub fn check_rvi() -> CheckResult {
    let config = RviConfig::default();
    let mut worst = 0.0f64;
    for which in [SCENARIO_1, SCENARIO_2] {
        for metric in Metric::ALL {
            for k in 1..=10 {
                let lambda = k as f64;
                let params = scenario(which, lambda);
                let here = format!("{} lambda={lambda}", tuple(&params, metric));
                let chain = to_chain(&params, metric);
                let sol = rvi_solve(&params, metric, &config).map_err(|e| format!("{here}: {e}"))?;
                let n = certify_structure(&sol).map_err(|v| format!("{here}: {v}"))?;
                let bp = find_threshold_breakpoints(&chain, lambda).unwrap();
                if n != bp && !tied(&chain, lambda, n, bp) {
                    return Err(format!("{here} rvi threshold {n} vs {bp}"));
                }
                let best = average_reward(&chain, bp, lambda).reward;
                let gap = (sol.gain - best).abs();
                if gap >= 1e-3 {
                    return Err(format!("{here} gain {} vs {best}", sol.gain));
                }
                worst = worst.max(gap);
            }
        }
    }
    Ok(format!("max |gain - closed form| = {worst:.2e}"))
}

/// Monte Carlo means within three standard errors of the closed forms.
pub fn check_monte_carlo() -> CheckResult {
    let sim = SimConfig::new(1_000_000, 10_000, 42);
    let mut cases = 0;
    for metric in Metric::ALL {
        let params = scenario(SCENARIO_1, 1.0);
        let chain = to_chain(&params, metric);
        for (i, n) in [0u64, 1, 2, 5].into_iter().enumerate() {
            let (age, active) = (average_age(&chain, n), average_active(&chain, n));
            for (engine, run) in [
                ("aggregate", simulate_aggregate as SimFn),
                ("full", simulate_full),
            ] {
                let st = run(&params, metric, AttackPolicy::Threshold(n), &sim.with_stream(i as u64))
                    .map_err(|e| e.to_string())?;
                let ok_age = (st.mean_state - age).abs() <= 3.0 * st.se_state;
                let ok_active = (st.mean_active - active).abs() <= 3.0 * st.se_active;
                if !(ok_age && ok_active) {
                    return Err(format!(
                        "{} n={n} engine={engine} age {} (se {}) vs {age}, active {} (se {}) vs {active}",
                        tuple(&params, metric),
                        st.mean_state,
                        st.se_state,
                        st.mean_active,
                        st.se_active
                    ));
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} trajectories within 3 se"))
}

/// Empirical growth frequencies of the full system within three binomial
/// standard errors of the model kernel.
pub fn check_kernels() -> CheckResult {
    let mut worst = 0.0f64;
    for which in [SCENARIO_1, SCENARIO_2] {
        for metric in Metric::ALL {
            let params = scenario(which, 1.0);
            let cells = empirical_kernel(&params, metric, 1_000_000, 42).map_err(|e| e.to_string())?;
            for cell in cells {
                let z = cell.z_score().abs();
                if z >= 3.0 {
                    return Err(format!(
                        "{} cell {} freq {} vs {} (z = {z:.2})",
                        tuple(&params, metric),
                        cell.label(),
                        cell.frequency,
                        cell.expected
                    ));
                }
                worst = worst.max(z);
            }
        }
    }
    Ok(format!("max |z| = {worst:.2}"))
}

/// Runs the suite for `level`, in order, without stopping at failures.
pub fn run(level: Level) -> Vec<CheckOutcome> {
    let mut checks: Vec<(&'static str, Check)> = vec![
        ("normalization", Box::new(check_normalization)),
        ("stationary", Box::new(check_stationary)),
        ("moments", Box::new(check_moments)),
        ("breakpoints", Box::new(|| check_breakpoints(60))),
        ("threshold_search", Box::new(check_search)),
    ];
    if level == Level::Full {
        checks.push(("rvi", Box::new(check_rvi)));
        checks.push(("monte_carlo", Box::new(check_monte_carlo)));
        checks.push(("kernels", Box::new(check_kernels)));
    }
    checks
        .into_iter()
        .map(|(name, check)| {
            let (passed, detail) = match check() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome {
                name,
                passed,
                detail,
            }
        })
        .collect()
}
