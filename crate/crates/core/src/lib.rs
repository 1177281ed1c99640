//! Optimal amplify-and-forward gains for tracking a Gauss-Markov parameter
//! through a coherent multiple-access channel.
//!
//! The crate is `no_std` (it needs `alloc`). Modules, bottom up:
//!
//! - [`linalg`]: dense Hermitian eigen/solve kernels.
//! - [`sdp`]: a small primal-dual interior-point solver for complex SDPs.
//! - [`model`]: process model, network description, channel draws.
//! - [`track`]: the Kalman recursion and the filtered-MSE evaluator.
//! - [`allocate`]: the four gain-allocation problems, bounds and baselines.
//! - [`outage`]: MSE outage probability of the equal-power allocation.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod allocate;
pub mod linalg;
pub mod model;
pub mod outage;
pub mod sdp;
pub mod track;

pub use allocate::{
    check_feasibility, equal_power_allocation, min_max_power_mse, min_mse_individual_power, min_mse_sum_power,
    min_sum_power_mse, mse_lower_bound, AllocError, Feasibility, MseTarget,
};
pub use model::{
    sample_channel, ChannelRealization, Draw, GainAllocation, GaussMarkovModel, ModelError, NetworkScenario,
    ScenarioBuilder, ScenarioTemplate, C64,
};
pub use outage::{outage_limit_high_power, outage_probability, OutageError};
pub use track::{filtered_mse, predict, update, TrackState};
