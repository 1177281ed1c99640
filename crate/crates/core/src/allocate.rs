//! Gain allocation: the four optimization problems, their asymptotic forms,
//! bounds and the equal-power baseline.
//!
//! Every allocator returns actual sensor gains `g`, so the fusion center sees
//! `c = sum_i g_i h_i`. The optimization literature works with `a = conj(g)`;
//! the translation happens once, at the boundary of each allocator. Returned
//! gains are rotated so that `c` is real and positive.
//!
//! The SDP-based allocators solve on the phase-stripped channel `|h_i|` and
//! reapply the channel phases afterwards. The problems depend on `h` only
//! through `h h^H`, so this is exact, and it makes the result covariant under
//! any phase rotation of the channel.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::linalg::{herm_eig, rayleigh_max, CMatrix, HermitianMatrix, LinalgError};
use crate::model::{ChannelRealization, GainAllocation, NetworkScenario, C64};
use crate::sdp::{self, SdpError, SdpProblem, SdpSettings, SdpSolution, SdpStatus, Sense};
use crate::track;

/// Rank-one acceptance threshold on `lambda_2 / lambda_1`.
pub const RANK_ONE_TOL: f64 = 1e-6;
/// Above [`RANK_ONE_TOL`] but below this, the SDP is re-solved once with a
/// tighter tolerance before giving up.
pub const RANK_RETRY_TOL: f64 = 1e-3;
/// Relative tolerance for classifying `epsilon` as on a feasibility edge.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocError {
    #[error("channel has {actual} entries, scenario has {expected} sensors")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("channel vector is zero")]
    ZeroChannel,
    #[error("channel entry {index} is zero")]
    ZeroChannelEntry { index: usize },
    #[error("prior MSE must be finite and > 0, got {0}")]
    InvalidPriorMse(f64),
    #[error("fusion-center noise variance must be > 0 for this problem")]
    ZeroFcNoise,
    #[error("measurement noise variance of sensor {index} is zero")]
    ZeroMeasurementNoise { index: usize },
    #[error("epsilon = {epsilon} is outside the achievable interval ({lower}, {upper}]")]
    InfeasibleTarget { epsilon: f64, lower: f64, upper: f64 },
    #[error("largest eigenvalue of D^-1/2 E D^-1/2 is {0}, so no finite power reaches the target")]
    NonPositiveEigenvalue(f64),
    #[error("SDP solution is not rank one (lambda_2 / lambda_1 = {ratio})")]
    NotRankOne { ratio: f64 },
    #[error("SDP solver finished with status {0:?}")]
    SdpStatus(SdpStatus),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Where an MSE target sits relative to the achievable interval
/// `[P / (1 + P sum_i 1/sigma_{v,i}^2), P]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Feasibility {
    Interior,
    /// `epsilon == P`: met with zero power.
    UpperBoundary,
    /// `epsilon` equals the infinite-power floor; unreachable with finite power.
    LowerBoundary,
    Infeasible,
}

/// An MSE constraint `P_{n|n} <= epsilon` together with its feasibility class.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MseTarget {
    pub epsilon: f64,
    pub prior_mse: f64,
    pub lower: f64,
    pub feasibility: Feasibility,
}

impl MseTarget {
    /// Reachable with finite power.
    pub fn is_attainable(&self) -> bool {
        matches!(self.feasibility, Feasibility::Interior | Feasibility::UpperBoundary)
    }

    /// `(P / epsilon - 1)`.
    pub fn excess_ratio(&self) -> f64 {
        self.prior_mse / self.epsilon - 1.0
    }

    fn require_attainable(&self) -> Result<(), AllocError> {
        if self.is_attainable() {
            Ok(())
        } else {
            Err(AllocError::InfeasibleTarget {
                epsilon: self.epsilon,
                lower: self.lower,
                upper: self.prior_mse,
            })
        }
    }
}

/// Infinite-power MSE floor, with a flag set when some sensor is noiseless
/// and the floor collapses to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub value: f64,
    pub degenerate: bool,
}

/// `P / (1 + P sum_i 1/sigma_{v,i}^2)`.
pub fn mse_lower_bound(scenario: &NetworkScenario, prior_mse: f64) -> LowerBound {
    if scenario.meas_noise_vars().contains(&0.0) {
        return LowerBound {
            value: 0.0,
            degenerate: true,
        };
    }
    let s: f64 = scenario.meas_noise_vars().iter().map(|v| 1.0 / v).sum();
    LowerBound {
        value: prior_mse / (1.0 + s * prior_mse),
        degenerate: false,
    }
}

pub fn check_feasibility(scenario: &NetworkScenario, prior_mse: f64, epsilon: f64) -> MseTarget {
    let lower = mse_lower_bound(scenario, prior_mse).value;
    let near = |a: f64, b: f64| (a - b).abs() <= BOUNDARY_TOL * b.abs().max(f64::MIN_POSITIVE);
    let feasibility = if !(epsilon > 0.0 && epsilon.is_finite() && prior_mse > 0.0 && prior_mse.is_finite()) {
        Feasibility::Infeasible
    } else if near(epsilon, prior_mse) {
        Feasibility::UpperBoundary
    } else if near(epsilon, lower) {
        Feasibility::LowerBoundary
    } else if epsilon > lower && epsilon < prior_mse {
        Feasibility::Interior
    } else {
        Feasibility::Infeasible
    };
    MseTarget {
        epsilon,
        prior_mse,
        lower,
        feasibility,
    }
}

/// The ratio `|c|^2 / nu` that every MSE-minimizing problem maximizes.
pub fn snr_objective(scenario: &NetworkScenario, channel: &ChannelRealization, gains: &[C64]) -> f64 {
    let (c, nu) = track::effective_observation(scenario, channel, gains);
    c.norm_sqr() / nu
}

fn check_inputs(scenario: &NetworkScenario, channel: &ChannelRealization) -> Result<(), AllocError> {
    if channel.len() != scenario.n_sensors() {
        return Err(AllocError::LengthMismatch {
            expected: scenario.n_sensors(),
            actual: channel.len(),
        });
    }
    if channel.is_zero() {
        return Err(AllocError::ZeroChannel);
    }
    if scenario.fc_noise_var() <= 0.0 {
        return Err(AllocError::ZeroFcNoise);
    }
    Ok(())
}

fn check_prior(prior_mse: f64) -> Result<(), AllocError> {
    if prior_mse > 0.0 && prior_mse.is_finite() {
        Ok(())
    } else {
        Err(AllocError::InvalidPriorMse(prior_mse))
    }
}

/// Multiplies `gains` by the unit scalar that makes `sum_i g_i h_i` real and
/// positive. Leaves them alone when that sum is zero.
fn align_phase(gains: &mut [C64], channel: &ChannelRealization) {
    let c: C64 = gains.iter().zip(channel.gains()).map(|(g, h)| g * h).sum();
    let r = c.norm();
    if r > 0.0 {
        let rot = c.conj() / r;
        for g in gains.iter_mut() {
            *g *= rot;
        }
    }
}

fn zero_allocation(scenario: &NetworkScenario, channel: &ChannelRealization, prior_mse: f64) -> GainAllocation {
    GainAllocation::evaluate(
        scenario,
        channel,
        prior_mse,
        vec![C64::new(0.0, 0.0); scenario.n_sensors()],
    )
}

fn scaled_to_power(dir: Vec<C64>, scenario: &NetworkScenario, power: f64) -> Vec<C64> {
    let p: f64 = dir
        .iter()
        .enumerate()
        .map(|(i, g)| g.norm_sqr() * scenario.input_power(i))
        .sum();
    let s = (power / p).sqrt();
    dir.into_iter().map(|g| g * s).collect()
}

/// Channel with every entry replaced by its magnitude, plus the unit phases
/// `h_i / |h_i|` (1 for zero entries).
fn dephase(channel: &ChannelRealization) -> (ChannelRealization, Vec<C64>) {
    let phases: Vec<C64> = channel
        .gains()
        .iter()
        .map(|h| {
            let r = h.norm();
            if r > 0.0 {
                h / r
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect();
    let mags = channel.gains().iter().map(|h| C64::new(h.norm(), 0.0)).collect();
    (ChannelRealization::new(mags).expect("magnitudes are finite"), phases)
}

/// Gains for the original channel from gains computed on its magnitudes.
fn rephase(gains: Vec<C64>, phases: &[C64], channel: &ChannelRealization) -> Vec<C64> {
    let mut g: Vec<C64> = gains.into_iter().zip(phases).map(|(g, p)| g * p.conj()).collect();
    align_phase(&mut g, channel);
    g
}

// ---------------------------------------------------------------------------
// Sum power constraint

/// Minimizes the filtered MSE subject to `sum_i |g_i|^2 D_i <= P_T`.
///
/// With `B = H V H^H + (sigma_w^2 / P_T) D` (diagonal), the optimum is
/// `a = sqrt(P_T / (h^H B^-1 D B^-1 h)) B^-1 h`, so `g_i` is a positive
/// multiple of `conj(h_i)`. The budget is always used in full.
pub fn min_mse_sum_power(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    prior_mse: f64,
) -> Result<GainAllocation, AllocError> {
    check_inputs(scenario, channel)?;
    check_prior(prior_mse)?;
    let ratio = scenario.fc_noise_var() / scenario.sum_power();
    let dir: Vec<C64> = channel
        .gains()
        .iter()
        .zip(channel.hvh(scenario))
        .enumerate()
        .map(|(i, (h, hvh))| h.conj() / (hvh + ratio * scenario.input_power(i)))
        .collect();
    let mut g = scaled_to_power(dir, scenario, scenario.sum_power());
    align_phase(&mut g, channel);
    Ok(GainAllocation::evaluate(scenario, channel, prior_mse, g))
}

/// `h^H B^-1 h`, the optimal value of the sum-power problem's SNR ratio.
pub fn sum_power_optimal_snr(scenario: &NetworkScenario, channel: &ChannelRealization) -> f64 {
    let ratio = scenario.fc_noise_var() / scenario.sum_power();
    channel
        .gains()
        .iter()
        .zip(channel.hvh(scenario))
        .enumerate()
        .map(|(i, (h, hvh))| h.norm_sqr() / (hvh + ratio * scenario.input_power(i)))
        .sum()
}

/// Limiting forms of the sum-power solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `sigma_w^2 / P_T -> 0`: `g_i` proportional to `1 / (h_i sigma_{v,i}^2)`.
    HighSnr,
    /// `sigma_w^2 / P_T -> infinity`: `g_i` proportional to `conj(h_i) / D_i`.
    LowSnr,
}

/// Asymptotic gains scaled to the full sum budget.
pub fn asymptotic_gains(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    prior_mse: f64,
    regime: Regime,
) -> Result<GainAllocation, AllocError> {
    if channel.len() != scenario.n_sensors() {
        return Err(AllocError::LengthMismatch {
            expected: scenario.n_sensors(),
            actual: channel.len(),
        });
    }
    if channel.is_zero() {
        return Err(AllocError::ZeroChannel);
    }
    check_prior(prior_mse)?;
    let dir: Vec<C64> = match regime {
        Regime::HighSnr => {
            let mut dir = Vec::with_capacity(channel.len());
            for (i, (h, &v)) in channel.gains().iter().zip(scenario.meas_noise_vars()).enumerate() {
                if v == 0.0 {
                    return Err(AllocError::ZeroMeasurementNoise { index: i });
                }
                if h.norm_sqr() == 0.0 {
                    return Err(AllocError::ZeroChannelEntry { index: i });
                }
                dir.push(h.inv() / v);
            }
            dir
        }
        Regime::LowSnr => channel
            .gains()
            .iter()
            .enumerate()
            .map(|(i, h)| h.conj() / scenario.input_power(i))
            .collect(),
    };
    let mut g = scaled_to_power(dir, scenario, scenario.sum_power());
    align_phase(&mut g, channel);
    Ok(GainAllocation::evaluate(scenario, channel, prior_mse, g))
}

/// `g_i = sqrt(P_T / N) / sqrt(D_i)`, real and positive.
pub fn equal_power_gains(scenario: &NetworkScenario) -> Vec<C64> {
    let share = scenario.sum_power() / scenario.n_sensors() as f64;
    (0..scenario.n_sensors())
        .map(|i| C64::new((share / scenario.input_power(i)).sqrt(), 0.0))
        .collect()
}

/// Every sensor spends `P_T / N`.
pub fn equal_power_allocation(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    prior_mse: f64,
) -> GainAllocation {
    let share = scenario.sum_power() / scenario.n_sensors() as f64;
    let mut a = GainAllocation::evaluate(scenario, channel, prior_mse, equal_power_gains(scenario));
    // Exact accounting rather than the rounded |g|^2 D product.
    a.per_sensor_power = vec![share; scenario.n_sensors()];
    a.sum_power = scenario.sum_power();
    a
}

// ---------------------------------------------------------------------------
// Minimum power for an MSE target

/// `E = P h h^H - (P / epsilon - 1) H V H^H`.
pub fn target_matrix(scenario: &NetworkScenario, channel: &ChannelRealization, target: &MseTarget) -> HermitianMatrix {
    let n = scenario.n_sensors();
    let p = target.prior_mse;
    let k = target.excess_ratio();
    let h = channel.gains();
    let hvh = channel.hvh(scenario);
    // a^H h h^H a in the a = conj(g) variables.
    let m = CMatrix::from_fn(n, n, |i, j| {
        let mut z = h[i] * h[j].conj() * p;
        if i == j {
            z -= Complex64::new(k * hvh[i], 0.0);
        }
        z
    });
    HermitianMatrix::new(m).expect("rank-one plus diagonal is Hermitian")
}

/// Minimizes the sum power subject to `P_{n|n} <= epsilon`.
///
/// The minimum is `(P - epsilon) sigma_w^2 / (epsilon lambda_max)` where
/// `lambda_max` is the top eigenvalue of `D^-1/2 E D^-1/2`, and the achieved
/// MSE equals `epsilon`.
pub fn min_sum_power_mse(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    target: &MseTarget,
) -> Result<GainAllocation, AllocError> {
    check_inputs(scenario, channel)?;
    check_prior(target.prior_mse)?;
    target.require_attainable()?;
    if target.feasibility == Feasibility::UpperBoundary {
        return Ok(zero_allocation(scenario, channel, target.prior_mse));
    }
    let e = target_matrix(scenario, channel, target);
    let (lambda, x) = rayleigh_max(&e, &scenario.d_matrix())?;
    if lambda <= 0.0 {
        return Err(AllocError::NonPositiveEigenvalue(lambda));
    }
    let g = scale_to_target(&x, &e, scenario, channel, target);
    Ok(GainAllocation::evaluate(scenario, channel, target.prior_mse, g))
}

/// Scales the direction `a` (in `conj(g)` form) so that `a^H E a` meets the
/// MSE target with equality, then converts to phase-aligned gains.
fn scale_to_target(
    a: &[C64],
    e: &HermitianMatrix,
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    target: &MseTarget,
) -> Vec<C64> {
    let kappa = target.excess_ratio() * scenario.fc_noise_var();
    let s = (kappa / e.quad_form(a)).sqrt();
    let mut g: Vec<C64> = a.iter().map(|z| z.conj() * s).collect();
    align_phase(&mut g, channel);
    g
}

/// The minimum sum power from the eigenvalue formula.
pub fn min_sum_power_value(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    target: &MseTarget,
) -> Result<f64, AllocError> {
    check_inputs(scenario, channel)?;
    target.require_attainable()?;
    if target.feasibility == Feasibility::UpperBoundary {
        return Ok(0.0);
    }
    let e = target_matrix(scenario, channel, target);
    let (lambda, _) = rayleigh_max(&e, &scenario.d_matrix())?;
    if lambda <= 0.0 {
        return Err(AllocError::NonPositiveEigenvalue(lambda));
    }
    Ok((target.prior_mse - target.epsilon) * scenario.fc_noise_var() / (target.epsilon * lambda))
}

/// Large-N sandwich on the minimum sum power and its asymptotic value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SumPowerBounds {
    pub xi: f64,
    pub zeta: f64,
    pub lower: f64,
    /// `None` when `zeta >= 1`, where the upper bound is undefined.
    pub upper: Option<f64>,
    pub approx: f64,
    /// The eigenvalue-formula minimum the bounds bracket.
    pub exact: f64,
}

pub fn sum_power_bounds(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    target: &MseTarget,
) -> Result<SumPowerBounds, AllocError> {
    let exact = min_sum_power_value(scenario, channel, target)?;
    let p = target.prior_mse;
    let k = target.excess_ratio();
    let hvh = channel.hvh(scenario);
    let mut hdh = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (i, h) in channel.gains().iter().enumerate() {
        let d = scenario.input_power(i);
        hdh += h.norm_sqr() / d;
        let r = hvh[i] / d;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let num = (p - target.epsilon) * scenario.fc_noise_var() / target.epsilon;
    let xi = k * lo;
    let zeta = k * hi / (p * hdh);
    Ok(SumPowerBounds {
        xi,
        zeta,
        lower: num / (p * hdh - xi),
        upper: (zeta < 1.0).then(|| num / (p * hdh * (1.0 - zeta))),
        approx: num / (p * hdh),
        exact,
    })
}

// ---------------------------------------------------------------------------
// SDP-based allocators

/// Diagnostics from an SDP-based allocation.
#[derive(Debug, Clone)]
pub struct SdpAllocation {
    pub allocation: GainAllocation,
    /// Optimal value of the relaxed SDP, in the problem's own units.
    pub sdp_objective: f64,
    /// `lambda_2 / lambda_1` of the leading `N x N` block.
    pub rank_ratio: f64,
    pub iterations: usize,
    pub retried: bool,
}

/// `max tr(A Hbar)` s.t. `tr(A Cbar) = 1`, `tr(A Dbar_i) <= 0`, over
/// `(N+1) x (N+1)` matrices, for the individual-budget problem. Variables are
/// `[t a; t]` with `a = conj(g)`.
pub fn individual_power_sdp(scenario: &NetworkScenario, channel: &ChannelRealization) -> SdpProblem {
    let n = scenario.n_sensors();
    let h = channel.gains();
    let hbar = CMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i < n && j < n {
            h[i] * h[j].conj()
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let hbar = HermitianMatrix::new(hbar).expect("outer product is Hermitian");
    let mut cdiag = channel.hvh(scenario);
    cdiag.push(scenario.fc_noise_var());
    let mut problem = SdpProblem::new(hbar, Sense::Maximize).with_eq(HermitianMatrix::from_real_diagonal(&cdiag), 1.0);
    for i in 0..n {
        let mut d = vec![0.0; n + 1];
        d[i] = scenario.input_power(i);
        d[n] = -scenario.indiv_powers()[i];
        problem = problem.with_ineq(HermitianMatrix::from_real_diagonal(&d), 0.0);
    }
    // Strictly feasible start: diag(ab, ..., ab, b) with a below every
    // budget-to-input ratio.
    let a = 0.5
        * (0..n)
            .map(|i| scenario.indiv_powers()[i] / scenario.input_power(i))
            .fold(f64::INFINITY, f64::min);
    let b = 1.0 / (a * cdiag[..n].iter().sum::<f64>() + scenario.fc_noise_var());
    let mut x0 = vec![a * b; n];
    x0.push(b);
    problem.with_initial_point(HermitianMatrix::from_real_diagonal(&x0))
}

/// Minimizes the filtered MSE subject to `|g_i|^2 D_i <= P_{T,i}`.
pub fn min_mse_individual_power(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    prior_mse: f64,
) -> Result<GainAllocation, AllocError> {
    min_mse_individual_power_sdp(scenario, channel, prior_mse).map(|r| r.allocation)
}

/// [`min_mse_individual_power`] with solver diagnostics.
pub fn min_mse_individual_power_sdp(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    prior_mse: f64,
) -> Result<SdpAllocation, AllocError> {
    check_inputs(scenario, channel)?;
    check_prior(prior_mse)?;
    let n = scenario.n_sensors();
    let (mags, phases) = dephase(channel);
    let problem = individual_power_sdp(scenario, &mags);
    let (sol, ratio, retried) = solve_rank_one(&problem, n)?;
    let corner = sol.x.get(n, n).re;
    let a = principal_factor(&sol.x.leading_block(n))?;
    let mut g: Vec<C64> = a.iter().map(|z| z.conj() / corner.sqrt()).collect();
    // Shave solver slop off any budget that is exceeded.
    let excess = (0..n)
        .map(|i| g[i].norm_sqr() * scenario.input_power(i) / scenario.indiv_powers()[i])
        .fold(0.0, f64::max);
    if excess > 1.0 {
        let s = excess.sqrt().recip();
        for z in g.iter_mut() {
            *z *= s;
        }
    }
    let g = rephase(g, &phases, channel);
    Ok(SdpAllocation {
        allocation: GainAllocation::evaluate(scenario, channel, prior_mse, g),
        sdp_objective: sol.objective_value,
        rank_ratio: ratio,
        iterations: sol.iterations,
        retried,
    })
}

/// `min tr(A T)` s.t. `tr(A Etilde) >= kappa`, `tr(A F_i) <= 0`, with
/// `T` picking the corner `t`, for the min-max problem.
pub fn min_max_power_sdp(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    target: &MseTarget,
) -> Result<SdpProblem, AllocError> {
    let n = scenario.n_sensors();
    let e = target_matrix(scenario, channel, target);
    let kappa = target.excess_ratio() * scenario.fc_noise_var();
    let mut corner = vec![0.0; n + 1];
    corner[n] = 1.0;
    let mut problem = SdpProblem::new(HermitianMatrix::from_real_diagonal(&corner), Sense::Minimize)
        .with_ineq(e.scale(-1.0).bordered(0.0), -kappa);
    for i in 0..n {
        let mut f = vec![0.0; n + 1];
        f[i] = scenario.input_power(i);
        f[n] = -1.0;
        problem = problem.with_ineq(HermitianMatrix::from_real_diagonal(&f), 0.0);
    }
    // Strictly feasible start: the min-sum-power direction with 10% headroom
    // on the MSE constraint, a small ridge, and t above every sensor's power.
    let (lambda, x) = rayleigh_max(&e, &scenario.d_matrix())?;
    if lambda <= 0.0 {
        return Err(AllocError::NonPositiveEigenvalue(lambda));
    }
    let a: Vec<C64> = x.iter().map(|z| z * (1.1 * (kappa / e.quad_form(&x)).sqrt())).collect();
    let ridge = 0.05 * kappa / (e.trace().abs() + e.frobenius_norm()).max(f64::MIN_POSITIVE);
    let aa = HermitianMatrix::rank_one(&a).add(&HermitianMatrix::identity(n).scale(ridge))?;
    let t = 1.2
        * (0..n)
            .map(|i| aa.get(i, i).re * scenario.input_power(i))
            .fold(0.0, f64::max);
    Ok(problem.with_initial_point(aa.bordered(t)))
}

/// Minimizes `max_i |g_i|^2 D_i` subject to `P_{n|n} <= epsilon`. The
/// returned gains meet the target with equality.
pub fn min_max_power_mse(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    target: &MseTarget,
) -> Result<GainAllocation, AllocError> {
    min_max_power_mse_sdp(scenario, channel, target).map(|r| r.allocation)
}

/// [`min_max_power_mse`] with solver diagnostics.
pub fn min_max_power_mse_sdp(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    target: &MseTarget,
) -> Result<SdpAllocation, AllocError> {
    check_inputs(scenario, channel)?;
    check_prior(target.prior_mse)?;
    target.require_attainable()?;
    if target.feasibility == Feasibility::UpperBoundary {
        return Ok(SdpAllocation {
            allocation: zero_allocation(scenario, channel, target.prior_mse),
            sdp_objective: 0.0,
            rank_ratio: 0.0,
            iterations: 0,
            retried: false,
        });
    }
    let n = scenario.n_sensors();
    let (mags, phases) = dephase(channel);
    let problem = min_max_power_sdp(scenario, &mags, target)?;
    let (sol, ratio, retried) = solve_rank_one(&problem, n)?;
    let a = principal_factor(&sol.x.leading_block(n))?;
    let e = target_matrix(scenario, &mags, target);
    let g = scale_to_target(&a, &e, scenario, &mags, target);
    let g = rephase(g, &phases, channel);
    Ok(SdpAllocation {
        allocation: GainAllocation::evaluate(scenario, channel, target.prior_mse, g),
        sdp_objective: sol.objective_value,
        rank_ratio: ratio,
        iterations: sol.iterations,
        retried,
    })
}

/// `min tr(A D)` s.t. `tr(A E) >= kappa`: the relaxed form of the minimum
/// sum power problem, used as a cross-check on the eigenvalue formula.
pub fn sum_power_sdp(scenario: &NetworkScenario, channel: &ChannelRealization, target: &MseTarget) -> SdpProblem {
    let e = target_matrix(scenario, channel, target);
    let kappa = target.excess_ratio() * scenario.fc_noise_var();
    SdpProblem::new(scenario.d_matrix(), Sense::Minimize).with_ineq(e.scale(-1.0), -kappa)
}

/// Solves [`sum_power_sdp`] and returns the gains from its principal factor.
pub fn min_sum_power_mse_sdp(
    scenario: &NetworkScenario,
    channel: &ChannelRealization,
    target: &MseTarget,
) -> Result<SdpAllocation, AllocError> {
    check_inputs(scenario, channel)?;
    check_prior(target.prior_mse)?;
    target.require_attainable()?;
    if target.feasibility == Feasibility::UpperBoundary {
        return Ok(SdpAllocation {
            allocation: zero_allocation(scenario, channel, target.prior_mse),
            sdp_objective: 0.0,
            rank_ratio: 0.0,
            iterations: 0,
            retried: false,
        });
    }
    let n = scenario.n_sensors();
    let (mags, phases) = dephase(channel);
    let problem = sum_power_sdp(scenario, &mags, target);
    let (sol, ratio, retried) = solve_rank_one(&problem, n)?;
    let a = principal_factor(&sol.x)?;
    let e = target_matrix(scenario, &mags, target);
    let g = scale_to_target(&a, &e, scenario, &mags, target);
    let g = rephase(g, &phases, channel);
    Ok(SdpAllocation {
        allocation: GainAllocation::evaluate(scenario, channel, target.prior_mse, g),
        sdp_objective: sol.objective_value,
        rank_ratio: ratio,
        iterations: sol.iterations,
        retried,
    })
}

fn rank_ratio(block: &HermitianMatrix) -> Result<f64, AllocError> {
    let eig = herm_eig(block)?;
    let l1 = eig.values[0];
    if l1 <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(eig.values.get(1).map_or(0.0, |l2| l2.max(0.0) / l1))
}

/// `sqrt(lambda_1) v_1` of a (numerically) rank-one PSD block.
fn principal_factor(block: &HermitianMatrix) -> Result<Vec<C64>, AllocError> {
    let eig = herm_eig(block)?;
    let s = eig.values[0].max(0.0).sqrt();
    Ok(eig.vector(0).into_iter().map(|z| z * s).collect())
}

/// Solves, checks the rank of the leading `n x n` block, and retries once
/// with a tighter tolerance when the rank test is borderline.
fn solve_rank_one(problem: &SdpProblem, n: usize) -> Result<(SdpSolution, f64, bool), AllocError> {
    let sol = sdp::solve(problem)?;
    let ratio = if sol.status == SdpStatus::Optimal {
        rank_ratio(&sol.x.leading_block(n))?
    } else {
        f64::INFINITY
    };
    if sol.status == SdpStatus::Optimal && ratio <= RANK_ONE_TOL {
        return Ok((sol, ratio, false));
    }
    if sol.status == SdpStatus::Infeasible {
        return Err(AllocError::SdpStatus(sol.status));
    }
    if sol.status == SdpStatus::Optimal && ratio > RANK_RETRY_TOL {
        return Err(AllocError::NotRankOne { ratio });
    }
    log::debug!("re-solving SDP (status {:?}, rank ratio {ratio:e})", sol.status);
    let tight = SdpSettings {
        tol: 1e-12,
        max_iter: 300,
        ..SdpSettings::default()
    };
    let sol2 = sdp::solve_with(problem, &tight, None)?;
    // The tight run may stall short of its own tolerance; keep whichever
    // certified answer is better.
    let best = if sol2.status == SdpStatus::Optimal || sol.status != SdpStatus::Optimal {
        sol2
    } else {
        sol
    };
    if best.status != SdpStatus::Optimal {
        return Err(AllocError::SdpStatus(best.status));
    }
    let ratio = rank_ratio(&best.x.leading_block(n))?;
    if ratio > RANK_ONE_TOL {
        return Err(AllocError::NotRankOne { ratio });
    }
    Ok((best, ratio, true))
}
