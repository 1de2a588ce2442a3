//! Monte Carlo estimates of age, attack rate and reward.
//!
//! Two engines share the same statistics: [`simulate_aggregate`] draws the
//! age process directly from the per-slot growth kernel, [`simulate_full`]
//! simulates the binary source, the channel, the jammer and the monitor's
//! estimate, and reads the age off that state. Agreement between the two is
//! the check that the kernels describe the physical system.
//!
//! The policy reads the age at the start of a slot and its action governs the
//! transition out of that slot. A slot's sample is that starting age together
//! with the action taken from it.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::SimError;
use crate::model::{increment_prob, Action, AgeKernel, Metric, SystemParams};

/// Number of batches used for batch-means standard errors.
pub const BATCHES: u64 = 100;

/// Attack policies the simulator can run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackPolicy {
    /// Attack iff the age is at least `n`.
    Threshold(u64),
    /// Attack with probability `rho` every slot, independent of the age.
    UniformRandom(f64),
    /// Attack iff the age is below `n`.
    OppositeThreshold(u64),
}

impl AttackPolicy {
    fn check(&self) -> Result<(), SimError> {
        match *self {
            AttackPolicy::UniformRandom(rho) if !(0.0..=1.0).contains(&rho) => {
                Err(SimError::BadRate(rho))
            }
            _ => Ok(()),
        }
    }

    pub fn decide<R: Rng>(&self, age: u64, rng: &mut R) -> Action {
        let attack = match *self {
            AttackPolicy::Threshold(n) => age >= n,
            AttackPolicy::OppositeThreshold(n) => age < n,
            AttackPolicy::UniformRandom(rho) => rng.random::<f64>() < rho,
        };
        if attack {
            Action::Active
        } else {
            Action::Passive
        }
    }
}

impl fmt::Display for AttackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackPolicy::Threshold(n) => write!(f, "threshold({n})"),
            AttackPolicy::UniformRandom(rho) => write!(f, "random({rho})"),
            AttackPolicy::OppositeThreshold(n) => write!(f, "opposite({n})"),
        }
    }
}

/// Horizon and random stream of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub slots: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Independent stream of the generator, e.g. one per grid point.
    pub stream: u64,
}

impl SimConfig {
    pub fn new(slots: u64, burn_in: u64, seed: u64) -> Self {
        Self {
            slots,
            burn_in,
            seed,
            stream: 0,
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    fn check(&self) -> Result<(), SimError> {
        if self.slots <= self.burn_in || self.slots - self.burn_in < BATCHES {
            return Err(SimError::Horizon {
                slots: self.slots,
                burn_in: self.burn_in,
            });
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStats {
    pub slots: u64,
    pub burn_in: u64,
    pub mean_state: f64,
    pub mean_active: f64,
    /// `mean_state - lambda * mean_active`.
    pub mean_reward: f64,
    pub se_state: f64,
    pub se_active: f64,
    pub se_reward: f64,
    pub seed: u64,
}

/// Running mean plus batch means over a known number of samples.
struct BatchMeans {
    batch_len: u64,
    in_batch: u64,
    batch_sum: f64,
    means: Vec<f64>,
    total: f64,
    count: u64,
}

impl BatchMeans {
    fn new(samples: u64) -> Self {
        Self {
            batch_len: samples / BATCHES,
            in_batch: 0,
            batch_sum: 0.0,
            means: Vec::with_capacity(BATCHES as usize),
            total: 0.0,
            count: 0,
        }
    }

    fn push(&mut self, x: f64) {
        self.total += x;
        self.count += 1;
        if self.means.len() as u64 == BATCHES {
            return;
        }
        self.batch_sum += x;
        self.in_batch += 1;
        if self.in_batch == self.batch_len {
            self.means.push(self.batch_sum / self.batch_len as f64);
            self.batch_sum = 0.0;
            self.in_batch = 0;
        }
    }

    fn mean(&self) -> f64 {
        self.total / self.count as f64
    }

    fn std_error(&self) -> f64 {
        let k = self.means.len() as f64;
        let m = self.means.iter().sum::<f64>() / k;
        let var = self.means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    }
}

struct Recorder {
    lambda: f64,
    state: BatchMeans,
    active: BatchMeans,
    reward: BatchMeans,
}

impl Recorder {
    fn new(lambda: f64, samples: u64) -> Self {
        Self {
            lambda,
            state: BatchMeans::new(samples),
            active: BatchMeans::new(samples),
            reward: BatchMeans::new(samples),
        }
    }

    fn record(&mut self, age: u64, action: Action) {
        let s = age as f64;
        let a = action.indicator();
        self.state.push(s);
        self.active.push(a);
        self.reward.push(s - self.lambda * a);
    }

    fn finish(self, config: &SimConfig) -> TrajectoryStats {
        let mean_state = self.state.mean();
        let mean_active = self.active.mean();
        TrajectoryStats {
            slots: config.slots,
            burn_in: config.burn_in,
            mean_state,
            mean_active,
            mean_reward: mean_state - self.lambda * mean_active,
            se_state: self.state.std_error(),
            se_active: self.active.std_error(),
            se_reward: self.reward.std_error(),
            seed: config.seed,
        }
    }
}

/// Simulates the age chain directly from its growth kernel, from `s(0) = 0`.
pub fn simulate_aggregate(
    params: &SystemParams,
    metric: Metric,
    policy: AttackPolicy,
    config: &SimConfig,
) -> Result<TrajectoryStats, SimError> {
    config.check()?;
    policy.check()?;
    let kernel = AgeKernel::new(*params, metric);
    let mut rng = config.rng();
    let mut rec = Recorder::new(params.lambda, config.slots - config.burn_in);
    let mut age = 0u64;
    for t in 0..config.slots {
        let action = policy.decide(age, &mut rng);
        if t >= config.burn_in {
            rec.record(age, action);
        }
        age = if rng.random::<f64>() < kernel.growth(age, action) {
            age + 1
        } else {
            0
        };
    }
    Ok(rec.finish(config))
}

/// Source bit, monitor estimate and age at a slot boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FullSystemState {
    pub source_bit: bool,
    pub estimate_bit: bool,
    pub age: u64,
}

impl FullSystemState {
    /// Advances one slot. Within the slot: the source flips (AoII only), the
    /// policy picks an action from the current age, the channel and jam draws
    /// decide delivery, a delivery copies the source into the estimate, and
    /// the age is recomputed. Returns the action taken.
    pub fn step<R: Rng>(
        &mut self,
        params: &SystemParams,
        metric: Metric,
        policy: &AttackPolicy,
        rng: &mut R,
    ) -> Action {
        if metric == Metric::Aoii && rng.random::<f64>() < params.r {
            self.source_bit = !self.source_bit;
        }
        let action = policy.decide(self.age, rng);
        let channel_ok = rng.random::<f64>() < params.p;
        let jammed = action.is_active() && rng.random::<f64>() < params.q;
        let delivered = channel_ok && !jammed;
        if delivered {
            self.estimate_bit = self.source_bit;
        }
        self.age = match metric {
            Metric::Aoi if delivered => 0,
            Metric::Aoii if self.source_bit == self.estimate_bit => 0,
            _ => self.age + 1,
        };
        action
    }
}

/// Simulates the physical system: binary source, channel, jammer, monitor.
pub fn simulate_full(
    params: &SystemParams,
    metric: Metric,
    policy: AttackPolicy,
    config: &SimConfig,
) -> Result<TrajectoryStats, SimError> {
    config.check()?;
    policy.check()?;
    let mut rng = config.rng();
    let mut rec = Recorder::new(params.lambda, config.slots - config.burn_in);
    let mut sys = FullSystemState::default();
    for t in 0..config.slots {
        let age = sys.age;
        let action = sys.step(params, metric, &policy, &mut rng);
        if t >= config.burn_in {
            rec.record(age, action);
        }
    }
    Ok(rec.finish(config))
}

/// One `(state class, action)` cell of an empirical growth kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCell {
    pub at_zero: bool,
    pub action: Action,
    pub visits: u64,
    pub increments: u64,
    /// Observed growth frequency.
    pub frequency: f64,
    /// Binomial standard error of `frequency`.
    pub std_error: f64,
    /// Growth probability predicted by the model.
    pub expected: f64,
}

impl KernelCell {
    pub fn label(&self) -> String {
        let class = if self.at_zero { "s=0" } else { "s>0" };
        let action = if self.action.is_active() {
            "active"
        } else {
            "passive"
        };
        format!("{class},{action}")
    }

    /// Distance from the prediction in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.frequency - self.expected) / self.std_error
    }
}

/// Minimum visits per cell for [`empirical_kernel`].
pub const MIN_CELL_VISITS: u64 = 1000;

/// Tabulates growth frequencies of the full system under a fair-coin attacker.
pub fn empirical_kernel(
    params: &SystemParams,
    metric: Metric,
    slots: u64,
    seed: u64,
) -> Result<Vec<KernelCell>, SimError> {
    let policy = AttackPolicy::UniformRandom(0.5);
    let mut rng = SimConfig::new(slots, 0, seed).rng();
    // [at_zero][active] -> (visits, increments)
    let mut counts = [[(0u64, 0u64); 2]; 2];
    let mut sys = FullSystemState::default();
    for _ in 0..slots {
        let before = sys.age;
        let action = sys.step(params, metric, &policy, &mut rng);
        let cell = &mut counts[(before == 0) as usize][action.is_active() as usize];
        cell.0 += 1;
        if sys.age == before + 1 {
            cell.1 += 1;
        } else {
            debug_assert_eq!(sys.age, 0);
        }
    }
    let mut cells = Vec::with_capacity(4);
    for at_zero in [true, false] {
        for active in [false, true] {
            let (visits, increments) = counts[at_zero as usize][active as usize];
            let action = if active {
                Action::Active
            } else {
                Action::Passive
            };
            let cell = KernelCell {
                at_zero,
                action,
                visits,
                increments,
                frequency: increments as f64 / visits.max(1) as f64,
                std_error: 0.0,
                expected: increment_prob(params, metric, at_zero, active),
            };
            if visits < MIN_CELL_VISITS {
                return Err(SimError::InsufficientSamples {
                    cell: cell.label(),
                    visits,
                    required: MIN_CELL_VISITS,
                });
            }
            let f = cell.frequency;
            cells.push(KernelCell {
                std_error: (f * (1.0 - f) / visits as f64).sqrt(),
                ..cell
            });
        }
    }
    Ok(cells)
}
