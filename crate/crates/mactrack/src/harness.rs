//! Monte Carlo sweeps, outage tables and tracked runs.
//!
//! Randomness: every trial owns the ChaCha8 stream `(seed, trial)`, so
//! results do not depend on the number of threads. Within a trial the same
//! channel draw serves every grid value (common random numbers). Fixed
//! geometry is drawn once from a dedicated stream; with `redraw_geometry`
//! each trial draws its own before the channel.

use std::io::Write;

use mactrack_core::allocate::{
    asymptotic_gains, check_feasibility, equal_power_allocation, individual_power_sdp, min_max_power_mse,
    min_max_power_sdp, min_mse_individual_power, min_mse_sum_power, min_sum_power_mse, min_sum_power_value,
    mse_lower_bound, sum_power_bounds, AllocError, MseTarget, Regime,
};
use mactrack_core::model::{sample_cn, ChannelRealization, GainAllocation, ModelError, C64};
use mactrack_core::outage::{outage_limit_high_power, outage_probability, OutageError};
use mactrack_core::sdp::SdpProblem;
use mactrack_core::track::{evolve, observe, predict, update, TrackState};
use mactrack_core::{sample_channel, NetworkScenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::scenario::{ScenarioConfig, ScenarioError};

/// Stream reserved for the run-wide geometry draw.
pub const GEOMETRY_STREAM: u64 = u64::MAX;
const CHANNEL_STREAM: u64 = 0;
const PROCESS_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Below this many trials the empirical outage column is noisy.
pub const OUTAGE_MIN_TRIALS: usize = 10_000;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid input: {0}")]
    Spec(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Outage(#[from] OutageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// True for solver and eigen failures, false for bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            HarnessError::Alloc(e) => !matches!(
                e,
                AllocError::LengthMismatch { .. }
                    | AllocError::ZeroChannel
                    | AllocError::ZeroChannelEntry { .. }
                    | AllocError::InvalidPriorMse(_)
                    | AllocError::ZeroFcNoise
                    | AllocError::ZeroMeasurementNoise { .. }
                    | AllocError::InfeasibleTarget { .. }
            ),
            HarnessError::Outage(e) => !matches!(e, OutageError::InvalidTarget),
            _ => false,
        }
    }
}

fn spec_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Spec(msg.into())
}

pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    NSensors,
    SumPower,
    Epsilon,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::NSensors => "n_sensors",
            SweepVariable::SumPower => "sum_power",
            SweepVariable::Epsilon => "epsilon",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub redraw_geometry: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(spec_err("no grid values"));
        }
        if self.trials == 0 {
            return Err(spec_err("trials must be positive"));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(spec_err("grid values must be finite and > 0"));
        }
        let up = self.values.windows(2).all(|w| w[0] < w[1]);
        let down = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(spec_err("grid values must be strictly monotone"));
        }
        if self.variable == SweepVariable::NSensors && self.values.iter().any(|v| v.fract() != 0.0) {
            return Err(spec_err("sensor counts must be integers"));
        }
        Ok(())
    }
}

/// Allocation strategies compared by the MSE sweep and the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `P_T / N` per sensor.
    Equal,
    /// Closed-form optimum under the sum budget.
    Sum,
    /// SDP optimum under individual budgets.
    Individual,
    /// Infinite-power MSE floor (not an allocation).
    Bound,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Equal, Strategy::Individual, Strategy::Sum, Strategy::Bound];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Equal => "equal",
            Strategy::Sum => "sum",
            Strategy::Individual => "individual",
            Strategy::Bound => "bound",
        }
    }

    /// Gains for one channel draw; `None` for [`Strategy::Bound`].
    pub fn allocate(
        self,
        s: &NetworkScenario,
        h: &ChannelRealization,
        prior: f64,
    ) -> Option<Result<GainAllocation, AllocError>> {
        match self {
            Strategy::Equal => Some(Ok(equal_power_allocation(s, h, prior))),
            Strategy::Sum => Some(min_mse_sum_power(s, h, prior)),
            Strategy::Individual => Some(min_mse_individual_power(s, h, prior)),
            Strategy::Bound => None,
        }
    }

    fn mse(self, s: &NetworkScenario, h: &ChannelRealization, prior: f64) -> Result<f64, AllocError> {
        match self.allocate(s, h, prior) {
            Some(r) => r.map(|a| a.achieved_mse),
            None => Ok(mse_lower_bound(s, prior).value),
        }
    }
}

/// Mean of the trials that succeeded, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub mean: f64,
    pub std_err: f64,
    pub used: usize,
    pub failed: usize,
}

impl Cell {
    fn from_samples(samples: impl Iterator<Item = Option<f64>>) -> Self {
        let mut xs = Vec::new();
        let mut failed = 0;
        for s in samples {
            match s {
                Some(x) => xs.push(x),
                None => failed += 1,
            }
        }
        let used = xs.len();
        let mean = xs.iter().sum::<f64>() / used as f64;
        let std_err = if used > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (used - 1) as f64;
            (var / used as f64).sqrt()
        } else {
            0.0
        };
        Cell {
            mean,
            std_err,
            used,
            failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// MSE target of the row, for power sweeps.
    pub epsilon: Option<f64>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write>(&self, out: W, config_hash: &str) -> Result<(), HarnessError> {
        let mut header = vec![self.variable.name().to_string()];
        let with_eps = self.rows.iter().any(|r| r.epsilon.is_some());
        if with_eps {
            header.push("epsilon".into());
        }
        for c in &self.columns {
            for suffix in ["mean", "se", "used", "failed"] {
                header.push(format!("{c}_{suffix}"));
            }
        }
        let rows = self.rows.iter().map(|r| {
            let mut rec = vec![fmt(r.value)];
            if with_eps {
                rec.push(r.epsilon.map(fmt).unwrap_or_default());
            }
            for c in &r.cells {
                rec.extend([fmt(c.mean), fmt(c.std_err), c.used.to_string(), c.failed.to_string()]);
            }
            rec
        });
        write_table(out, config_hash, &header, rows)
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Writes `# config-sha256=<hash>` followed by a plain CSV table.
pub fn write_table<W: Write>(
    mut out: W,
    config_hash: &str,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), HarnessError> {
    writeln!(out, "# config-sha256={config_hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 of the canonical JSON form of a resolved run configuration.
pub fn config_hash(config: &impl Serialize) -> String {
    let json = serde_json::to_vec(config).expect("run configurations serialize");
    hex::encode(Sha256::digest(&json))
}

/// Geometry and channel for one trial, sized for the largest grid value.
struct TrialDraw {
    scenario: NetworkScenario,
    channel: ChannelRealization,
}

struct Sweeper<'a> {
    config: &'a ScenarioConfig,
    spec: &'a SweepSpec,
    base_n: usize,
    fixed: Option<NetworkScenario>,
}

impl<'a> Sweeper<'a> {
    fn new(config: &'a ScenarioConfig, spec: &'a SweepSpec) -> Result<Self, HarnessError> {
        spec.validate()?;
        let base_n = match spec.variable {
            SweepVariable::NSensors => {
                let max = spec.values.iter().cloned().fold(0.0, f64::max) as usize;
                match config.template.fixed_n() {
                    Some(len) if len < max => {
                        return Err(spec_err(format!(
                            "grid asks for {max} sensors, the scenario pins {len}"
                        )))
                    }
                    Some(len) => len,
                    None => max,
                }
            }
            _ => config.n_sensors,
        };
        let fixed = if spec.redraw_geometry {
            None
        } else {
            Some(config.realize(base_n, &mut trial_rng(spec.seed, GEOMETRY_STREAM))?)
        };
        Ok(Self {
            config,
            spec,
            base_n,
            fixed,
        })
    }

    fn draw(&self, trial: usize) -> Result<TrialDraw, ModelError> {
        let mut rng = trial_rng(self.spec.seed, trial as u64);
        let scenario = match &self.fixed {
            Some(s) => s.clone(),
            None => self.config.realize(self.base_n, &mut rng)?,
        };
        let channel = sample_channel(&scenario, &mut rng);
        Ok(TrialDraw { scenario, channel })
    }

    /// The scenario and channel seen at grid value `v`.
    fn at(&self, d: &TrialDraw, v: f64) -> Result<(NetworkScenario, ChannelRealization), ModelError> {
        match self.spec.variable {
            SweepVariable::NSensors => {
                let n = v as usize;
                Ok((d.scenario.truncated(n)?, d.channel.truncated(n)))
            }
            SweepVariable::SumPower => Ok((d.scenario.with_sum_power(v)?, d.channel.clone())),
            SweepVariable::Epsilon => Ok((d.scenario.clone(), d.channel.clone())),
        }
    }

    /// Runs `f` on every trial in parallel and returns the per-trial outputs
    /// in trial order.
    fn map_trials<T: Send>(&self, f: impl Fn(&TrialDraw) -> T + Sync) -> Result<Vec<T>, HarnessError> {
        (0..self.spec.trials)
            .into_par_iter()
            .map(|t| self.draw(t).map(|d| f(&d)).map_err(HarnessError::from))
            .collect()
    }
}

fn ok_or_log<T>(r: Result<T, AllocError>, what: &str) -> Option<T> {
    r.map_err(|e| log::debug!("{what}: {e}")).ok()
}

/// Mean achieved filtered MSE (from the template's initial prediction MSE)
/// per grid value and strategy.
pub fn run_mse_sweep(
    config: &ScenarioConfig,
    spec: &SweepSpec,
    strategies: &[Strategy],
) -> Result<SweepResult, HarnessError> {
    if spec.variable == SweepVariable::Epsilon {
        return Err(spec_err("the MSE sweep runs over n_sensors or sum_power"));
    }
    if strategies.is_empty() {
        return Err(spec_err("no strategies"));
    }
    let sweeper = Sweeper::new(config, spec)?;
    let prior = config.prior_mse();
    let per_trial = sweeper.map_trials(|d| {
        spec.values
            .iter()
            .map(|&v| {
                let (s, h) = sweeper.at(d, v)?;
                Ok(strategies
                    .iter()
                    .map(|st| ok_or_log(st.mse(&s, &h, prior), st.name()))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, ModelError>>()
    })?;
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows = spec
        .values
        .iter()
        .enumerate()
        .map(|(vi, &value)| SweepRow {
            value,
            epsilon: None,
            cells: (0..strategies.len())
                .map(|si| Cell::from_samples(per_trial.iter().map(|t| t[vi][si])))
                .collect(),
        })
        .collect();
    Ok(SweepResult {
        variable: spec.variable,
        columns: strategies.iter().map(|s| s.name().to_string()).collect(),
        rows,
    })
}

/// Columns of the power sweep, in output order.
pub const POWER_COLUMNS: [&str; 6] = [
    "sum_min",
    "sum_lower",
    "sum_upper",
    "sum_approx",
    "minmax_max",
    "minmax_sum",
];

fn power_cells(s: &NetworkScenario, h: &ChannelRealization, target: &MseTarget) -> [Option<f64>; 6] {
    if !target.is_attainable() {
        return [None; 6];
    }
    let bounds = ok_or_log(sum_power_bounds(s, h, target), "sum-power bounds");
    let minmax = ok_or_log(min_max_power_mse(s, h, target), "min-max power");
    [
        ok_or_log(min_sum_power_value(s, h, target), "min sum power"),
        bounds.map(|b| b.lower),
        bounds.and_then(|b| b.upper),
        bounds.map(|b| b.approx),
        minmax.as_ref().map(|a| a.max_power()),
        minmax.as_ref().map(|a| a.sum_power),
    ]
}

/// Mean required powers per grid value and MSE target. Draws where a target
/// is infeasible are excluded and counted as failed. For an `epsilon` sweep
/// the grid values are the targets and `epsilons` must be empty.
pub fn run_power_sweep(
    config: &ScenarioConfig,
    spec: &SweepSpec,
    epsilons: &[f64],
) -> Result<SweepResult, HarnessError> {
    let pairs: Vec<(f64, f64)> = if spec.variable == SweepVariable::Epsilon {
        if !epsilons.is_empty() {
            return Err(spec_err("an epsilon sweep takes its targets from the grid"));
        }
        spec.values.iter().map(|&v| (v, v)).collect()
    } else {
        if epsilons.is_empty() {
            return Err(spec_err("give at least one MSE target"));
        }
        spec.values
            .iter()
            .flat_map(|&v| epsilons.iter().map(move |&e| (v, e)))
            .collect()
    };
    if epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(spec_err("MSE targets must be finite and > 0"));
    }
    let sweeper = Sweeper::new(config, spec)?;
    let prior = config.prior_mse();
    let per_trial = sweeper.map_trials(|d| {
        pairs
            .iter()
            .map(|&(v, eps)| {
                let (s, h) = sweeper.at(d, v)?;
                Ok(power_cells(&s, &h, &check_feasibility(&s, prior, eps)))
            })
            .collect::<Result<Vec<_>, ModelError>>()
    })?;
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows = pairs
        .iter()
        .enumerate()
        .map(|(pi, &(value, eps))| SweepRow {
            value,
            epsilon: Some(eps),
            cells: (0..POWER_COLUMNS.len())
                .map(|ci| Cell::from_samples(per_trial.iter().map(|t| t[pi][ci])))
                .collect(),
        })
        .collect();
    Ok(SweepResult {
        variable: spec.variable,
        columns: POWER_COLUMNS.iter().map(|c| c.to_string()).collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutageRow {
    pub sum_power: f64,
    pub epsilon: f64,
    pub analytic: f64,
    pub limit: f64,
    pub empirical: f64,
    /// 95% normal-approximation binomial half-width.
    pub half_width: f64,
    pub trials: usize,
}

/// Equal-power MSE outage over a sum-power grid on one fixed geometry:
/// closed form, its high-power limit and a Monte Carlo estimate.
pub fn run_outage(
    config: &ScenarioConfig,
    p_t_grid: &[f64],
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<OutageRow>, HarnessError> {
    if p_t_grid.is_empty() || trials == 0 {
        return Err(spec_err("outage needs a sum-power grid and trials > 0"));
    }
    if trials < OUTAGE_MIN_TRIALS {
        log::warn!("{trials} outage trials; at least {OUTAGE_MIN_TRIALS} are recommended");
    }
    let prior = config.prior_mse();
    let base = config.realize(config.n_sensors, &mut trial_rng(seed, GEOMETRY_STREAM))?;
    let scenarios = p_t_grid
        .iter()
        .map(|&p| base.with_sum_power(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        let target = check_feasibility(s, prior, epsilon);
        rows.push(OutageRow {
            sum_power: s.sum_power(),
            epsilon,
            analytic: outage_probability(s, &target)?,
            limit: outage_limit_high_power(s, &target)?,
            empirical: 0.0,
            half_width: 0.0,
            trials,
        });
    }
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let h = sample_channel(&base, &mut rng);
            scenarios
                .iter()
                .map(|s| u64::from(equal_power_allocation(s, &h, prior).achieved_mse > epsilon))
                .collect::<Vec<u64>>()
        })
        .reduce(
            || vec![0; scenarios.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    for (row, c) in rows.iter_mut().zip(counts) {
        let p = c as f64 / trials as f64;
        row.empirical = p;
        row.half_width = 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
    }
    Ok(rows)
}

pub fn write_outage_csv<W: Write>(rows: &[OutageRow], out: W, config_hash: &str) -> Result<(), HarnessError> {
    let header: Vec<String> = [
        "sum_power",
        "epsilon",
        "analytic",
        "limit",
        "empirical",
        "half_width",
        "trials",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let recs = rows.iter().map(|r| {
        vec![
            fmt(r.sum_power),
            fmt(r.epsilon),
            fmt(r.analytic),
            fmt(r.limit),
            fmt(r.empirical),
            fmt(r.half_width),
            r.trials.to_string(),
        ]
    });
    write_table(out, config_hash, &header, recs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackRow {
    pub step: u64,
    pub theta: C64,
    pub estimate: C64,
    pub pred_mse: f64,
    pub filt_mse: f64,
    pub powers: Vec<f64>,
}

impl TrackRow {
    pub fn sq_error(&self) -> f64 {
        (self.theta - self.estimate).norm_sqr()
    }
}

/// Runs the filter for `steps` steps on one fixed geometry. Gains are
/// re-optimized for every channel draw using the current prediction MSE, or
/// the initial one with `hold_gains`. Channel, process and noise draws use
/// separate streams, so runs with different strategies see the same
/// randomness.
pub fn run_track(
    config: &ScenarioConfig,
    steps: usize,
    strategy: Strategy,
    seed: u64,
    hold_gains: bool,
) -> Result<Vec<TrackRow>, HarnessError> {
    if strategy == Strategy::Bound {
        return Err(spec_err("the bound is not an allocation and cannot be tracked"));
    }
    let s = config.realize(config.n_sensors, &mut trial_rng(seed, GEOMETRY_STREAM))?;
    let model = *s.model();
    let p0 = config.prior_mse();
    let mut ch_rng = trial_rng(seed, CHANNEL_STREAM);
    let mut proc_rng = trial_rng(seed, PROCESS_STREAM);
    let mut noise_rng = trial_rng(seed, NOISE_STREAM);
    let mut theta = sample_cn(&mut proc_rng, p0);
    let mut state = TrackState::prior(C64::new(0.0, 0.0), p0);
    let mut rows = Vec::with_capacity(steps);
    for n in 0..steps {
        if n > 0 {
            theta = evolve(theta, &model, &mut proc_rng);
            state = predict(&state, &model);
        }
        let h = sample_channel(&s, &mut ch_rng);
        let prior = if hold_gains { p0 } else { state.pred_mse };
        let a = strategy.allocate(&s, &h, prior).expect("bound excluded above")?;
        let y = observe(theta, &s, &h, &a.gains, &mut noise_rng);
        state = update(&state, &s, &h, &a.gains, y);
        rows.push(TrackRow {
            step: n as u64,
            theta,
            estimate: state.estimate,
            pred_mse: state.pred_mse,
            filt_mse: state.filt_mse,
            powers: a.per_sensor_power,
        });
    }
    Ok(rows)
}

pub fn write_track_csv<W: Write>(rows: &[TrackRow], out: W, config_hash: &str) -> Result<(), HarnessError> {
    let n = rows.first().map_or(0, |r| r.powers.len());
    let mut header: Vec<String> = [
        "step",
        "theta_re",
        "theta_im",
        "estimate_re",
        "estimate_im",
        "pred_mse",
        "filt_mse",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..n).map(|i| format!("power_{i}")));
    let recs = rows.iter().map(|r| {
        let mut rec = vec![
            r.step.to_string(),
            fmt(r.theta.re),
            fmt(r.theta.im),
            fmt(r.estimate.re),
            fmt(r.estimate.im),
            fmt(r.pred_mse),
            fmt(r.filt_mse),
        ];
        rec.extend(r.powers.iter().map(|&p| fmt(p)));
        rec
    });
    write_table(out, config_hash, &header, recs)
}

/// Problems available to the single-shot `allocate` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AllocProblem {
    Equal,
    Sum,
    Individual,
    /// Least sum power meeting `--epsilon`.
    MinSumPower,
    /// Least peak sensor power meeting `--epsilon`.
    MinMaxPower,
    HighSnr,
    LowSnr,
}

impl AllocProblem {
    pub fn needs_epsilon(self) -> bool {
        matches!(self, AllocProblem::MinSumPower | AllocProblem::MinMaxPower)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AllocReport {
    pub problem: AllocProblem,
    pub prior_mse: f64,
    pub epsilon: Option<f64>,
    pub scenario: NetworkScenario,
    pub channel: ChannelRealization,
    pub allocation: GainAllocation,
}

/// One geometry and channel draw from `seed`, shared with [`allocation_sdp`].
pub fn single_draw(config: &ScenarioConfig, seed: u64) -> Result<(NetworkScenario, ChannelRealization), HarnessError> {
    let s = config.realize(config.n_sensors, &mut trial_rng(seed, GEOMETRY_STREAM))?;
    let h = sample_channel(&s, &mut trial_rng(seed, CHANNEL_STREAM));
    Ok((s, h))
}

fn target_for(s: &NetworkScenario, prior: f64, epsilon: Option<f64>) -> Result<MseTarget, HarnessError> {
    let eps = epsilon.ok_or_else(|| spec_err("this problem needs an MSE target (--epsilon)"))?;
    Ok(check_feasibility(s, prior, eps))
}

pub fn run_allocate(
    config: &ScenarioConfig,
    problem: AllocProblem,
    epsilon: Option<f64>,
    seed: u64,
) -> Result<AllocReport, HarnessError> {
    let (s, h) = single_draw(config, seed)?;
    let prior = config.prior_mse();
    let allocation = match problem {
        AllocProblem::Equal => equal_power_allocation(&s, &h, prior),
        AllocProblem::Sum => min_mse_sum_power(&s, &h, prior)?,
        AllocProblem::Individual => min_mse_individual_power(&s, &h, prior)?,
        AllocProblem::MinSumPower => min_sum_power_mse(&s, &h, &target_for(&s, prior, epsilon)?)?,
        AllocProblem::MinMaxPower => min_max_power_mse(&s, &h, &target_for(&s, prior, epsilon)?)?,
        AllocProblem::HighSnr => asymptotic_gains(&s, &h, prior, Regime::HighSnr)?,
        AllocProblem::LowSnr => asymptotic_gains(&s, &h, prior, Regime::LowSnr)?,
    };
    Ok(AllocReport {
        problem,
        prior_mse: prior,
        epsilon,
        scenario: s,
        channel: h,
        allocation,
    })
}

/// The SDP behind an SDP-based `allocate` problem, for dumping. The
/// channel is used as drawn (the allocators solve on its magnitudes).
pub fn allocation_sdp(
    config: &ScenarioConfig,
    problem: AllocProblem,
    epsilon: Option<f64>,
    seed: u64,
) -> Result<Option<SdpProblem>, HarnessError> {
    let (s, h) = single_draw(config, seed)?;
    let prior = config.prior_mse();
    Ok(match problem {
        AllocProblem::Individual => Some(individual_power_sdp(&s, &h)),
        AllocProblem::MinMaxPower => {
            let t = target_for(&s, prior, epsilon)?;
            if !t.is_attainable() {
                return Err(AllocError::InfeasibleTarget {
                    epsilon: t.epsilon,
                    lower: t.lower,
                    upper: t.prior_mse,
                }
                .into());
            }
            Some(min_max_power_sdp(&s, &h, &t)?)
        }
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Preset;

    fn config(n: usize) -> ScenarioConfig {
        ScenarioConfig::from_preset(Preset::PaperSec7, Some(n)).unwrap()
    }

    fn spec(variable: SweepVariable, values: Vec<f64>, trials: usize) -> SweepSpec {
        SweepSpec {
            variable,
            values,
            trials,
            seed: 7,
            redraw_geometry: false,
        }
    }

    #[test]
    fn spec_validation() {
        let ok = spec(SweepVariable::NSensors, vec![2.0, 4.0], 3);
        assert!(ok.validate().is_ok());
        for bad in [
            spec(SweepVariable::NSensors, vec![], 3),
            spec(SweepVariable::NSensors, vec![2.0, 2.0], 3),
            spec(SweepVariable::NSensors, vec![2.0, 4.0, 3.0], 3),
            spec(SweepVariable::NSensors, vec![2.5], 3),
            spec(SweepVariable::SumPower, vec![1.0], 0),
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn trial_accounting_adds_up() {
        let r = run_mse_sweep(
            &config(4),
            &spec(SweepVariable::NSensors, vec![2.0, 4.0], 5),
            &Strategy::ALL,
        )
        .unwrap();
        assert_eq!(r.rows.len(), 2);
        for row in &r.rows {
            for c in &row.cells {
                assert_eq!(c.used + c.failed, 5);
                assert!(c.std_err.is_finite());
            }
        }
    }

    #[test]
    fn sweep_is_reproducible_and_thread_independent() {
        let sp = SweepSpec {
            redraw_geometry: true,
            ..spec(SweepVariable::SumPower, vec![1.0, 10.0], 6)
        };
        let a = run_mse_sweep(&config(3), &sp, &Strategy::ALL).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_mse_sweep(&config(3), &sp, &Strategy::ALL)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_excess_target_needs_no_power() {
        let c = config(5);
        let r = run_power_sweep(&c, &spec(SweepVariable::NSensors, vec![5.0], 3), &[c.prior_mse()]).unwrap();
        for cell in &r.rows[0].cells {
            assert_eq!(cell.used, 3);
            assert_eq!(cell.mean, 0.0);
        }
    }

    #[test]
    fn infeasible_targets_are_excluded() {
        let r = run_power_sweep(&config(3), &spec(SweepVariable::NSensors, vec![3.0], 4), &[1e-6]).unwrap();
        for cell in &r.rows[0].cells {
            assert_eq!((cell.used, cell.failed), (0, 4));
        }
    }

    #[test]
    fn outage_at_prior_is_zero() {
        let c = config(4);
        let rows = run_outage(&c, &[10.0], c.prior_mse(), 200, 1).unwrap();
        assert_eq!((rows[0].analytic, rows[0].empirical), (0.0, 0.0));
    }

    #[test]
    fn huge_budget_reaches_the_limit() {
        let c = config(10);
        let rows = run_outage(&c, &[1e12], 0.05, 10, 3).unwrap();
        assert!((rows[0].analytic - rows[0].limit).abs() <= 1e-6);
    }

    #[test]
    fn sum_tracking_dominates_equal_step_by_step() {
        let c = config(6).with_sum_power(3.0).unwrap();
        let eq = run_track(&c, 200, Strategy::Equal, 9, false).unwrap();
        let sum = run_track(&c, 200, Strategy::Sum, 9, false).unwrap();
        for (a, b) in sum.iter().zip(&eq) {
            assert_eq!(a.theta, b.theta);
            assert!(a.filt_mse <= b.filt_mse * (1.0 + 1e-12));
        }
    }

    #[test]
    fn csv_is_bit_identical_across_runs() {
        let sp = spec(SweepVariable::NSensors, vec![3.0], 1);
        let render = || {
            let r = run_mse_sweep(&config(3), &sp, &Strategy::ALL).unwrap();
            let mut buf = Vec::new();
            r.write_csv(&mut buf, &config_hash(&(&config(3), &sp))).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = render();
        assert_eq!(a, render());
        assert!(a.starts_with("# config-sha256="));
        assert!(a.lines().nth(1).unwrap().starts_with("n_sensors,equal_mean,"));
    }
}
