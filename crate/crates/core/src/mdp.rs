//! Average-reward MDP over the age state, solved by relative value iteration.
//!
//! The state space is truncated at `state_cap`; growth out of the cap
//! saturates (the would-be `cap + 1` mass stays at `cap`). State 0 is the
//! reference state: each sweep subtracts the new `V(0)`, and that subtracted
//! constant converges to the optimal gain.

use std::fmt;

use crate::error::SolveError;
use crate::model::{Action, AgeKernel, Metric, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RviConfig {
    pub state_cap: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for RviConfig {
    fn default() -> Self {
        Self {
            state_cap: 2000,
            tol: 1e-10,
            max_iters: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RviSolution {
    /// Differential values `V(0..=cap)`, with `V(0) = 0`.
    pub values: Vec<f64>,
    /// Optimal long-run average reward.
    pub gain: f64,
    pub actions: Vec<Action>,
    /// Action-value gap `Q(s, active) - Q(s, passive)` at the final values.
    pub gaps: Vec<f64>,
    /// First active state when the actions form a single passive-to-active
    /// step (`cap + 1` if never active); `None` otherwise.
    pub threshold: Option<u64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Precomputed per-state growth probabilities and rewards for one problem.
struct Bellman {
    growth_passive: Vec<f64>,
    growth_active: Vec<f64>,
    lambda: f64,
}

impl Bellman {
    fn new(kernel: &AgeKernel, cap: usize) -> Self {
        let states = 0..=cap as u64;
        Self {
            growth_passive: states
                .clone()
                .map(|s| kernel.growth(s, Action::Passive))
                .collect(),
            growth_active: states.map(|s| kernel.growth(s, Action::Active)).collect(),
            lambda: kernel.params().lambda,
        }
    }

    fn cap(&self) -> usize {
        self.growth_passive.len() - 1
    }

    /// `(Q(s, passive), Q(s, active))` against the continuation values `v`.
    fn q_values(&self, v: &[f64], s: usize) -> (f64, f64) {
        let up = v[(s + 1).min(self.cap())];
        let reset = v[0];
        let (g0, g1) = (self.growth_passive[s], self.growth_active[s]);
        let reward = s as f64;
        (
            reward + g0 * up + (1.0 - g0) * reset,
            reward - self.lambda + g1 * up + (1.0 - g1) * reset,
        )
    }

    fn sweep(&self, v: &[f64], out: &mut [f64]) {
        for (s, slot) in out.iter_mut().enumerate() {
            let (q0, q1) = self.q_values(v, s);
            *slot = q0.max(q1);
        }
    }

    fn gaps(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len())
            .map(|s| {
                let (q0, q1) = self.q_values(v, s);
                q1 - q0
            })
            .collect()
    }
}

/// One undiscounted Bellman sweep `V'(s) = max_a Q(s, a)` without renormalising.
pub fn bellman_sweep(kernel: &AgeKernel, values: &[f64]) -> Vec<f64> {
    assert!(!values.is_empty());
    let op = Bellman::new(kernel, values.len() - 1);
    let mut out = vec![0.0; values.len()];
    op.sweep(values, &mut out);
    out
}

pub fn rvi_solve(
    params: &SystemParams,
    metric: Metric,
    config: &RviConfig,
) -> Result<RviSolution, SolveError> {
    if config.state_cap < 100 {
        return Err(SolveError::Config("state_cap must be at least 100"));
    }
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(SolveError::Config("tol must be positive"));
    }
    let kernel = AgeKernel::new(*params, metric);
    let op = Bellman::new(&kernel, config.state_cap);
    let n_states = config.state_cap + 1;

    let mut values = vec![0.0; n_states];
    let mut next = vec![0.0; n_states];
    let mut gain = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iters {
        iterations += 1;
        op.sweep(&values, &mut next);
        gain = next[0];
        let (mut sup, mut lo, mut hi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
        for (new, old) in next.iter_mut().zip(&values) {
            *new -= gain;
            let d = *new - old;
            sup = sup.max(d.abs());
            lo = lo.min(d);
            hi = hi.max(d);
        }
        std::mem::swap(&mut values, &mut next);
        residual = sup.max(hi - lo);
        if residual < config.tol {
            break;
        }
    }
    if residual >= config.tol {
        return Err(SolveError::NoConvergence {
            iters: iterations,
            residual,
        });
    }

    let gaps = op.gaps(&values);
    let actions: Vec<Action> = gaps
        .iter()
        .map(|&g| if g > 0.0 { Action::Active } else { Action::Passive })
        .collect();

    let boundary = (0.9 * config.state_cap as f64).floor() as usize;
    let mass: f64 = truncated_stationary(&kernel, &actions)[boundary + 1..].iter().sum();
    if mass > 1e-8 {
        return Err(SolveError::CapSuspicious { mass, boundary });
    }

    let threshold = step_index(&actions);
    Ok(RviSolution {
        values,
        gain,
        actions,
        gaps,
        threshold,
        iterations,
        residual,
    })
}

/// Stationary distribution of the truncated chain under a per-state action table.
pub fn truncated_stationary(kernel: &AgeKernel, actions: &[Action]) -> Vec<f64> {
    let cap = actions.len() - 1;
    let growth = |s: usize| kernel.growth(s as u64, actions[s]);
    let mut u = Vec::with_capacity(actions.len());
    u.push(1.0);
    for s in 0..cap {
        let last = u[s];
        u.push(last * growth(s));
    }
    // the cap keeps its own growth mass
    u[cap] /= 1.0 - growth(cap);
    let total: f64 = u.iter().sum();
    u.iter_mut().for_each(|x| *x /= total);
    u
}

fn step_index(actions: &[Action]) -> Option<u64> {
    let first = actions
        .iter()
        .position(|a| a.is_active())
        .unwrap_or(actions.len());
    actions[first..]
        .iter()
        .all(|a| a.is_active())
        .then_some(first as u64)
}

/// Which structural property a solution failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    /// `V` decreases somewhere.
    MonotoneValues,
    /// The action-value gap decreases somewhere.
    MonotoneGap,
    /// Actions are not a single passive-to-active step.
    SingleStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructureViolation {
    pub property: Property,
    pub state: usize,
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.property {
            Property::MonotoneValues => "values decrease",
            Property::MonotoneGap => "action-value gap decreases",
            Property::SingleStep => "actions leave the passive-then-active pattern",
        };
        write!(f, "{what} at state {}", self.state)
    }
}

/// Checks the threshold structure of a converged solution.
///
/// Verifies, in order, that the values are nondecreasing, that the
/// action-value gap is nondecreasing, and that the actions switch from
/// passive to active exactly once. Returns the first active state.
pub fn certify_structure(solution: &RviSolution) -> Result<u64, StructureViolation> {
    let scale = solution
        .values
        .iter()
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let slack = 1e-9 * scale;
    let first_drop = |xs: &[f64]| xs.windows(2).position(|w| w[1] < w[0] - slack);

    if let Some(s) = first_drop(&solution.values) {
        return Err(StructureViolation {
            property: Property::MonotoneValues,
            state: s + 1,
        });
    }
    if let Some(s) = first_drop(&solution.gaps) {
        return Err(StructureViolation {
            property: Property::MonotoneGap,
            state: s + 1,
        });
    }
    let actions = &solution.actions;
    let first = actions
        .iter()
        .position(|a| a.is_active())
        .unwrap_or(actions.len());
    match actions[first..].iter().position(|a| !a.is_active()) {
        Some(off) => Err(StructureViolation {
            property: Property::SingleStep,
            state: first + off,
        }),
        None => Ok(first as u64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::average_reward;
    use crate::model::{to_chain, validate_params};
    use crate::search::find_threshold_breakpoints;

    fn scenario1(lambda: f64) -> SystemParams {
        validate_params(0.5, 0.5, 0.25, lambda).unwrap()
    }

    #[test]
    fn first_sweep_is_immediate_reward() {
        let kernel = AgeKernel::new(scenario1(1.5), Metric::Aoii);
        let v1 = bellman_sweep(&kernel, &[0.0; 101]);
        for (s, v) in v1.iter().enumerate() {
            assert_eq!(*v, s as f64);
        }
    }

    #[test]
    fn aoi_gain_and_threshold() {
        let sol = rvi_solve(&scenario1(1.5), Metric::Aoi, &RviConfig::default()).unwrap();
        assert!((sol.gain - 5.0 / 3.0).abs() < 1e-6, "{}", sol.gain);
        assert_eq!(sol.threshold, Some(1));
        assert_eq!(sol.values[0], 0.0);
        assert!(sol.residual < 1e-10);

        let sol = rvi_solve(&scenario1(0.5), Metric::Aoi, &RviConfig::default()).unwrap();
        assert!((sol.gain - 2.5).abs() < 1e-6);
        assert_eq!(sol.threshold, Some(0));
    }

    #[test]
    fn aoii_structure_matches_breakpoints() {
        let params = scenario1(2.0);
        let sol = rvi_solve(&params, Metric::Aoii, &RviConfig::default()).unwrap();
        let n = certify_structure(&sol).unwrap();
        let chain = to_chain(&params, Metric::Aoii);
        assert_eq!(n, find_threshold_breakpoints(&chain, 2.0).unwrap());
        assert!((sol.gain - average_reward(&chain, n, 2.0).reward).abs() < 1e-6);
    }

    #[test]
    fn hand_built_counterexample() {
        let len = 6;
        let mut actions = vec![Action::Active; len];
        actions[1] = Action::Passive;
        let sol = RviSolution {
            values: (0..len).map(|s| s as f64).collect(),
            gain: 0.0,
            actions,
            gaps: (0..len).map(|s| s as f64 - 2.0).collect(),
            threshold: None,
            iterations: 1,
            residual: 0.0,
        };
        assert_eq!(
            certify_structure(&sol),
            Err(StructureViolation {
                property: Property::SingleStep,
                state: 1
            })
        );

        let mut bad_values = sol.clone();
        bad_values.values[3] = -1.0;
        assert_eq!(
            certify_structure(&bad_values).unwrap_err().property,
            Property::MonotoneValues
        );
    }

    #[test]
    fn step_index_cases() {
        use Action::*;
        assert_eq!(step_index(&[Passive, Passive, Active]), Some(2));
        assert_eq!(step_index(&[Passive, Passive]), Some(2));
        assert_eq!(step_index(&[Active, Passive]), None);
    }

    #[test]
    fn rejects_bad_config() {
        let small = RviConfig {
            state_cap: 10,
            ..RviConfig::default()
        };
        assert!(matches!(
            rvi_solve(&scenario1(1.0), Metric::Aoi, &small),
            Err(SolveError::Config(_))
        ));
        let short = RviConfig {
            max_iters: 3,
            ..RviConfig::default()
        };
        assert!(matches!(
            rvi_solve(&scenario1(1.0), Metric::Aoi, &short),
            Err(SolveError::NoConvergence { iters: 3, .. })
        ));
    }

    #[test]
    fn flags_tight_cap() {
        // growth 0.99 with a 100-state cap leaves visible mass near the boundary
        let params = validate_params(0.1, 0.9, 0.25, 1.0).unwrap();
        let cfg = RviConfig {
            state_cap: 100,
            ..RviConfig::default()
        };
        assert!(matches!(
            rvi_solve(&params, Metric::Aoi, &cfg),
            Err(SolveError::CapSuspicious { .. })
        ));
    }

    #[test]
    fn truncated_stationary_matches_closed_form() {
        let params = scenario1(1.0);
        let kernel = AgeKernel::new(params, Metric::Aoii);
        let chain = to_chain(&params, Metric::Aoii);
        let actions: Vec<Action> = (0..200)
            .map(|s| if s >= 3 { Action::Active } else { Action::Passive })
            .collect();
        let u = truncated_stationary(&kernel, &actions);
        for (i, x) in u.iter().enumerate().take(100) {
            let cf = crate::closedform::stationary_pmf(&chain, 3, i as u64);
            assert!((x - cf).abs() < 1e-14);
        }
    }
}
