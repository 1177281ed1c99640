//! Scalar Kalman recursion at the fusion center.
//!
//! With actual gains `g` the fusion center sees
//! `y = c theta + sum_i g_i h_i v_i + w`, where `c = sum_i g_i h_i`.
//! The effective noise variance is `nu = sum_i |g_i h_i|^2 sigma_{v,i}^2 + sigma_w^2`.

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use rand::Rng;

use crate::model::{sample_cn, ChannelRealization, GaussMarkovModel, NetworkScenario, C64};

/// Filter state. The prior for step `n` has `filt_mse == pred_mse` until
/// [`update`] folds in the observation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackState {
    pub estimate: C64,
    pub pred_mse: f64,
    pub filt_mse: f64,
    pub step: u64,
}

impl TrackState {
    /// State before the first observation.
    pub fn prior(estimate: C64, pred_mse: f64) -> Self {
        Self {
            estimate,
            pred_mse,
            filt_mse: pred_mse,
            step: 0,
        }
    }
}

/// Prediction step. The step counter is left for [`update`] to advance.
pub fn predict(state: &TrackState, model: &GaussMarkovModel) -> TrackState {
    let pred_mse = model.alpha().norm_sqr() * state.filt_mse + model.sigma_u_sq();
    TrackState {
        estimate: model.alpha() * state.estimate,
        pred_mse,
        filt_mse: pred_mse,
        step: state.step,
    }
}

/// Coherent gain `c` and effective noise variance `nu`.
pub fn effective_observation(scenario: &NetworkScenario, channel: &ChannelRealization, gains: &[C64]) -> (C64, f64) {
    let mut c = Complex64::new(0.0, 0.0);
    let mut nu = scenario.fc_noise_var();
    for ((g, h), v) in gains.iter().zip(channel.gains()).zip(scenario.meas_noise_vars()) {
        let gh = g * h;
        c += gh;
        nu += gh.norm_sqr() * v;
    }
    (c, nu)
}

/// Both algebraic forms of the filtered MSE: `(1 - k c) P` with the Kalman
/// gain `k`, and `P / (1 + P |c|^2 / nu)`.
pub fn filtered_mse_forms(
    pred_mse: f64,
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    gains: &[C64],
) -> (f64, f64) {
    let (c, nu) = effective_observation(scenario, channel, gains);
    let p = pred_mse;
    let c2 = c.norm_sqr();
    let denom = nu + p * c2;
    let gain_form = if denom == 0.0 {
        p
    } else {
        let k = c.conj() * (p / denom);
        (1.0 - k * c).re * p
    };
    let ratio_form = if c2 == 0.0 {
        p
    } else if nu == 0.0 {
        0.0
    } else {
        p / (1.0 + p * c2 / nu)
    };
    (gain_form, ratio_form)
}

/// Filtered MSE `P_{n|n}` achieved by `gains`.
pub fn filtered_mse(pred_mse: f64, scenario: &NetworkScenario, channel: &ChannelRealization, gains: &[C64]) -> f64 {
    let (a, b) = filtered_mse_forms(pred_mse, scenario, channel, gains);
    debug_assert!(
        (a - b).abs() <= 1e-12 * pred_mse.abs().max(f64::MIN_POSITIVE),
        "filtered MSE forms disagree: {a} vs {b}"
    );
    b
}

/// Measurement update; advances the step counter.
pub fn update(
    state: &TrackState,
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    gains: &[C64],
    observation: C64,
) -> TrackState {
    let (c, nu) = effective_observation(scenario, channel, gains);
    let p = state.pred_mse;
    let denom = nu + p * c.norm_sqr();
    let estimate = if denom == 0.0 {
        state.estimate
    } else {
        let k = c.conj() * (p / denom);
        state.estimate + k * (observation - c * state.estimate)
    };
    TrackState {
        estimate,
        pred_mse: p,
        filt_mse: filtered_mse(p, scenario, channel, gains),
        step: state.step + 1,
    }
}

/// `alpha theta + u` with `u ~ CN(0, sigma_u^2)`.
pub fn evolve<R: Rng + ?Sized>(theta: C64, model: &GaussMarkovModel, rng: &mut R) -> C64 {
    model.alpha() * theta + sample_cn(rng, model.sigma_u_sq())
}

/// Draws the received sample `sum_i h_i g_i (theta + v_i) + w`.
pub fn observe<R: Rng + ?Sized>(
    theta: C64,
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    gains: &[C64],
    rng: &mut R,
) -> C64 {
    let mut y = Complex64::new(0.0, 0.0);
    for ((g, h), v) in gains.iter().zip(channel.gains()).zip(scenario.meas_noise_vars()) {
        y += g * h * (theta + sample_cn(rng, *v));
    }
    y + sample_cn(rng, scenario.fc_noise_var())
}
