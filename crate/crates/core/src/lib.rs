//! Optimal denial-of-service (jamming) policies against a status-updating
//! link whose freshness is measured by the Age of Information (AoI) or the
//! Age of Incorrect Information (AoII).
//!
//! The attacker pays `lambda` per jammed slot and earns the current age per
//! slot. The optimal policy jams exactly when the age reaches a threshold;
//! this crate evaluates threshold policies in closed form ([`closedform`]),
//! finds the optimal threshold ([`search`]), solves the underlying MDP
//! independently ([`mdp`]) and simulates the system ([`sim`]).

pub mod closedform;
pub mod error;
pub mod mdp;
pub mod model;
pub mod search;
pub mod sim;
pub mod verify;

pub use closedform::{
    average_active, average_age, average_reward, lambda_breakpoint, lambda_interp,
    stationary_pmf, PolicyEval,
};
pub use error::{DomainError, SearchError, SimError, SolveError};
pub use mdp::{certify_structure, rvi_solve, RviConfig, RviSolution, StructureViolation};
pub use model::{
    increment_prob, to_chain, validate_params, Action, AgeKernel, ChainParams, Metric,
    SystemParams,
};
pub use search::{
    find_threshold_alg1, find_threshold_breakpoints, find_threshold_scan, optimal_threshold,
    Method, SearchConfig,
};
pub use sim::{
    empirical_kernel, simulate_aggregate, simulate_full, AttackPolicy, SimConfig,
    TrajectoryStats,
};
