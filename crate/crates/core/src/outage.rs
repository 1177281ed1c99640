//! MSE outage probability of the equal-power allocation.
//!
//! With `h = M h~`, `h~ ~ CN(0, I)`, the event `P_{n|n} > epsilon` is
//! `h~^H R h~ < beta sigma_w^2 / P_T` with
//! `R = M a a^H M - beta Q`, `a = a_e / sqrt(P_T)`,
//! `M = diag(d_i^-gamma)`, `Q = diag(sigma_{v,i}^2 / (N D_i d_i^{2 gamma}))` and
//! `beta = (P - epsilon) / (epsilon P)`. The quadratic form is a weighted sum
//! of unit exponentials whose weights are the eigenvalues of `R`; at most one
//! of them is positive.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;

use crate::allocate::MseTarget;
use crate::linalg::{herm_eig, HermitianMatrix, LinalgError};
use crate::model::NetworkScenario;

/// Relative eigenvalue gap below which `lambda_1` counts as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-10;
/// Relative size of the split applied to a coincident pair.
pub const COINCIDENCE_SPLIT: f64 = 1e-8;
/// Slack allowed outside `[0, 1]` before a raw probability is an error.
pub const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OutageError {
    #[error("outage formula produced {0}, outside [0, 1]")]
    OutOfRange(f64),
    #[error("prior MSE and epsilon must be finite and > 0")]
    InvalidTarget,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The quadratic-form description of the outage event for one scenario.
#[derive(Debug, Clone)]
pub struct OutageInstance {
    pub beta: f64,
    pub r_matrix: HermitianMatrix,
    /// Eigenvalues of `R`, descending.
    pub eigenvalues: Vec<f64>,
    /// `beta sigma_w^2 / P_T`.
    pub threshold: f64,
}

fn beta_of(target: &MseTarget) -> Result<f64, OutageError> {
    let (p, e) = (target.prior_mse, target.epsilon);
    if !(p > 0.0 && p.is_finite() && e > 0.0 && e.is_finite()) {
        return Err(OutageError::InvalidTarget);
    }
    Ok((p - e) / (e * p))
}

/// `(m_i a_i, Q_ii)`: the rank-one factor and the diagonal of `Q`.
fn factors(scenario: &NetworkScenario) -> (Vec<f64>, Vec<f64>) {
    let n = scenario.n_sensors() as f64;
    let gamma = scenario.path_loss_exp();
    let mut u = Vec::with_capacity(scenario.n_sensors());
    let mut q = Vec::with_capacity(scenario.n_sensors());
    for (i, (&d, &v)) in scenario.distances().iter().zip(scenario.meas_noise_vars()).enumerate() {
        let m = d.powf(-gamma);
        let di = scenario.input_power(i);
        u.push(m / (n * di).sqrt());
        q.push(v * m * m / (n * di));
    }
    (u, q)
}

impl OutageInstance {
    pub fn new(scenario: &NetworkScenario, target: &MseTarget) -> Result<Self, OutageError> {
        let beta = beta_of(target)?;
        let (u, q) = factors(scenario);
        let n = u.len();
        let r = crate::linalg::CMatrix::from_fn(n, n, |i, j| {
            let mut x = u[i] * u[j];
            if i == j {
                x -= beta * q[i];
            }
            num_complex::Complex64::new(x, 0.0)
        });
        let r_matrix = HermitianMatrix::new(r)?;
        let eigenvalues = herm_eig(&r_matrix)?.values;
        Ok(Self {
            beta,
            r_matrix,
            eigenvalues,
            threshold: beta * scenario.fc_noise_var() / scenario.sum_power(),
        })
    }

    /// `1 - prod_{l != 1} lambda_1 / (lambda_1 - lambda_l) * exp(-x / lambda_1)`,
    /// or 1 when `lambda_1 <= 0`. `with_exponential = false` gives the
    /// infinite-power limit.
    fn probability(&self, with_exponential: bool) -> Result<f64, OutageError> {
        if self.beta <= 0.0 {
            // epsilon >= P: the filtered MSE never exceeds the prior.
            return Ok(0.0);
        }
        let l1 = self.eigenvalues[0];
        if l1 <= 0.0 {
            return Ok(1.0);
        }
        let scale = self.r_matrix.frobenius_norm();
        let mut lam1 = l1;
        let mut tail: Vec<f64> = self.eigenvalues[1..].to_vec();
        if let Some(&l2) = tail.first() {
            if l1 - l2 < COINCIDENCE_TOL * scale {
                let delta = COINCIDENCE_SPLIT * scale;
                log::warn!("lambda_1 = {l1:e} nearly coincides with lambda_2 = {l2:e}; splitting by {delta:e}");
                lam1 += delta;
                for l in tail.iter_mut().filter(|l| (l1 - **l) < COINCIDENCE_TOL * scale) {
                    *l -= delta;
                }
            }
        }
        let prod: f64 = tail.iter().map(|l| lam1 / (lam1 - l)).product();
        let survive = if with_exponential {
            prod * (-self.threshold / lam1).exp()
        } else {
            prod
        };
        let raw = 1.0 - survive;
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&raw) || raw.is_nan() {
            return Err(OutageError::OutOfRange(raw));
        }
        Ok(raw.clamp(0.0, 1.0))
    }
}

/// `Pr{P_{n|n} > epsilon}` over channel draws for equal-power gains.
pub fn outage_probability(scenario: &NetworkScenario, target: &MseTarget) -> Result<f64, OutageError> {
    OutageInstance::new(scenario, target)?.probability(true)
}

/// The `P_T -> infinity` limit of [`outage_probability`].
pub fn outage_limit_high_power(scenario: &NetworkScenario, target: &MseTarget) -> Result<f64, OutageError> {
    OutageInstance::new(scenario, target)?.probability(false)
}

/// `Pr{sum_i w_i E_i > x}` for unit exponentials `E_i`, `x >= 0`, evaluated
/// by the partial-fraction sum over the positive weights. All weights must
/// be distinct and nonzero.
pub fn weighted_exponential_tail(weights: &[f64], x: f64) -> f64 {
    let mut total = 0.0;
    for (i, &wi) in weights.iter().enumerate() {
        if wi <= 0.0 {
            continue;
        }
        let n = weights.len() as i32;
        let mut denom = 1.0;
        for (l, &wl) in weights.iter().enumerate() {
            if l != i {
                denom *= wi - wl;
            }
        }
        total += wi.powi(n) / denom / wi.abs() * (-x / wi).exp();
    }
    total
}

/// Interlacing bounds on the eigenvalues of `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylBounds {
    /// `(s - beta e_1, s - beta e_N)` with `s = a^H M^2 a`.
    pub lambda1: (f64, f64),
    /// Entry `k` bounds `lambda_{k+2}`: `(-beta e_{N-k-1}, -beta e_{N-k})`
    /// in one-based `e` indices.
    pub tail: Vec<(f64, f64)>,
}

impl WeylBounds {
    /// Whether every eigenvalue (descending) lies inside its bound, with
    /// absolute slack `tol`.
    pub fn contains(&self, eigenvalues: &[f64], tol: f64) -> bool {
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo - tol && x <= hi + tol;
        inside(eigenvalues[0], self.lambda1) && eigenvalues[1..].iter().zip(&self.tail).all(|(&x, &b)| inside(x, b))
    }
}

pub fn weyl_bounds(scenario: &NetworkScenario, target: &MseTarget) -> Result<WeylBounds, OutageError> {
    let beta = beta_of(target)?;
    let (u, mut e) = factors(scenario);
    e.sort_by(|a, b| b.total_cmp(a));
    let n = e.len();
    let s: f64 = u.iter().map(|x| x * x).sum();
    // One-based e_k is e[k - 1].
    let tail = (2..=n).map(|i| (-beta * e[n - i], -beta * e[n + 1 - i])).collect();
    Ok(WeylBounds {
        lambda1: (s - beta * e[0], s - beta * e[n - 1]),
        tail,
    })
}
