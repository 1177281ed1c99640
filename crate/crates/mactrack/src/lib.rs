//! Scenario files, Monte Carlo sweeps and CSV output around
//! [`mactrack_core`].

pub mod harness;
pub mod scenario;
pub mod sdp_dump;
pub mod stats;

pub use harness::{
    run_allocate, run_mse_sweep, run_outage, run_power_sweep, run_track, HarnessError, Strategy, SweepResult,
    SweepSpec, SweepVariable,
};
pub use scenario::{load_scenario, parse_scenario, Preset, ScenarioConfig, ScenarioError};
