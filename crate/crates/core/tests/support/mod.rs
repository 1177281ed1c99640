//! Independent numerical oracles shared by the integration tests.
//!
//! None of these use the allocators' closed forms or the SDP solver; they
//! only evaluate the filtered MSE (or its SNR ratio) from raw gains.

#![allow(dead_code)]

use std::f64::consts::PI;

use mactrack_core::model::{sample_channel, ChannelRealization, GaussMarkovModel, NetworkScenario, C64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random scenario in the ranges of the simulation study, with the sum
/// budget drawn on a log scale so both SNR regimes appear.
pub fn random_scenario(n: usize, rng: &mut impl Rng) -> NetworkScenario {
    NetworkScenario::builder(GaussMarkovModel::from_stationary_variance(C64::new(0.9, 0.0), 1.0).unwrap())
        .distances((0..n).map(|_| rng.random_range(2.0..8.0)).collect())
        .meas_noise_vars((0..n).map(|_| rng.random_range(0.01..0.5)).collect())
        .fc_noise_var(0.5)
        .sum_power(10f64.powf(rng.random_range(-1.0..3.0)))
        .build()
        .unwrap()
}

pub fn random_instance(n: usize, rng: &mut impl Rng) -> (NetworkScenario, ChannelRealization) {
    let s = random_scenario(n, rng);
    let h = sample_channel(&s, rng);
    (s, h)
}

/// Random individual budgets around `P_T / N`, so that some saturate and
/// some do not.
pub fn with_random_budgets(s: &NetworkScenario, rng: &mut impl Rng) -> NetworkScenario {
    let n = s.n_sensors() as f64;
    let p = (0..s.n_sensors())
        .map(|_| s.sum_power() / n * rng.random_range(0.2..2.0))
        .collect();
    s.with_indiv_powers(p).unwrap()
}

/// `|sum_i h_i g_i|^2 / (sum_i |h_i g_i|^2 sigma_{v,i}^2 + sigma_w^2)`, written
/// out directly.
pub fn snr(s: &NetworkScenario, h: &ChannelRealization, g: &[C64]) -> f64 {
    let mut c = C64::new(0.0, 0.0);
    let mut nu = s.fc_noise_var();
    for i in 0..g.len() {
        let z = g[i] * h.gains()[i];
        c += z;
        nu += z.norm_sqr() * s.meas_noise_vars()[i];
    }
    c.norm_sqr() / nu
}

pub fn mse_from_snr(prior: f64, q: f64) -> f64 {
    prior / (1.0 + prior * q)
}

/// Projected gradient ascent of the SNR ratio over the sum-power sphere
/// `sum_i D_i |g_i|^2 = P_T`, from `starts` random points. Returns the best
/// value found.
pub fn projected_gradient_sum_power(
    s: &NetworkScenario,
    h: &ChannelRealization,
    starts: usize,
    rng: &mut impl Rng,
) -> f64 {
    let n = s.n_sensors();
    let p_t = s.sum_power();
    // Work in y_i = sqrt(D_i) g_i so the constraint is a plain sphere.
    let u: Vec<C64> = (0..n).map(|i| h.gains()[i] / s.input_power(i).sqrt()).collect();
    let lam: Vec<f64> = (0..n)
        .map(|i| h.gains()[i].norm_sqr() * s.meas_noise_vars()[i] / s.input_power(i))
        .collect();
    let w = s.fc_noise_var();
    let value = |y: &[C64]| {
        let c: C64 = y.iter().zip(&u).map(|(a, b)| a * b).sum();
        let nu: f64 = w + y.iter().zip(&lam).map(|(a, l)| a.norm_sqr() * l).sum::<f64>();
        (c, nu, c.norm_sqr() / nu)
    };
    let project = |y: &mut [C64]| {
        let r = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in y.iter_mut() {
            *z *= (p_t).sqrt() / r;
        }
    };
    let mut best = 0.0f64;
    for _ in 0..starts {
        let mut y: Vec<C64> = (0..n).map(|_| cn(rng)).collect();
        project(&mut y);
        let (mut c, mut nu, mut q) = value(&y);
        let mut step = 1.0;
        let mut stall = 0;
        for _ in 0..200_000 {
            // Ascent direction: derivative with respect to conj(y).
            let grad: Vec<C64> = (0..n)
                .map(|i| (u[i].conj() * c * nu - y[i] * (c.norm_sqr() * lam[i])) / (nu * nu))
                .collect();
            let gnorm = grad.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if gnorm == 0.0 {
                break;
            }
            let mut improved = false;
            step *= 2.0;
            for _ in 0..60 {
                let mut cand: Vec<C64> = y.iter().zip(&grad).map(|(a, g)| a + g * step).collect();
                project(&mut cand);
                let (c2, nu2, q2) = value(&cand);
                if q2 > q {
                    improved = q2 - q > 1e-15 * q;
                    y = cand;
                    c = c2;
                    nu = nu2;
                    q = q2;
                    break;
                }
                step *= 0.5;
            }
            stall = if improved { 0 } else { stall + 1 };
            if stall >= 20 {
                break;
            }
        }
        best = best.max(q);
    }
    best
}

fn cn(rng: &mut impl Rng) -> C64 {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    C64::new(x, y)
}

/// Best SNR ratio over the grid `|g_1| x |g_2| x arg(g_2 / g_1)` for a
/// two-sensor scenario with individual budgets, `k` points per axis.
pub fn grid_individual_n2(s: &NetworkScenario, h: &ChannelRealization, k: usize) -> f64 {
    assert_eq!(s.n_sensors(), 2);
    let r_max: Vec<f64> = (0..2)
        .map(|i| (s.indiv_powers()[i] / s.input_power(i)).sqrt())
        .collect();
    let lam: Vec<f64> = (0..2)
        .map(|i| h.gains()[i].norm_sqr() * s.meas_noise_vars()[i])
        .collect();
    let w = s.fc_noise_var();
    let mut rot = Vec::with_capacity(k);
    for p in 0..k {
        rot.push(C64::from_polar(1.0, 2.0 * PI * p as f64 / k as f64) * h.gains()[1]);
    }
    let mut best = 0.0f64;
    for a in 0..k {
        let r1 = r_max[0] * a as f64 / (k - 1) as f64;
        let c1 = h.gains()[0] * r1;
        let n1 = r1 * r1 * lam[0] + w;
        for b in 0..k {
            let r2 = r_max[1] * b as f64 / (k - 1) as f64;
            let nu = n1 + r2 * r2 * lam[1];
            for z in &rot {
                let q = (c1 + z * r2).norm_sqr() / nu;
                if q > best {
                    best = q;
                }
            }
        }
    }
    best
}

/// Smallest max-power over a direction grid for a two-sensor scenario: for
/// each power split and relative phase, the gain scale reaching `epsilon` is
/// found by bisection on the filtered MSE.
pub fn grid_min_max_n2(s: &NetworkScenario, h: &ChannelRealization, prior: f64, epsilon: f64, k: usize) -> f64 {
    assert_eq!(s.n_sensors(), 2);
    let mut best = f64::INFINITY;
    for a in 0..=k {
        let psi = 0.5 * PI * a as f64 / k as f64;
        let (p1, p2) = (psi.cos().powi(2), psi.sin().powi(2));
        let peak = p1.max(p2);
        for b in 0..k {
            let phase = C64::from_polar(1.0, 2.0 * PI * b as f64 / k as f64);
            let dir = [
                C64::new((p1 / s.input_power(0)).sqrt(), 0.0),
                phase * (p2 / s.input_power(1)).sqrt(),
            ];
            let mse = |scale2: f64| {
                let g = [dir[0] * scale2.sqrt(), dir[1] * scale2.sqrt()];
                mse_from_snr(prior, snr(s, h, &g))
            };
            // Quick rejection: this direction cannot beat the incumbent.
            if best.is_finite() && mse(best / peak) > epsilon {
                continue;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut reachable = true;
            while mse(hi) > epsilon {
                hi *= 2.0;
                if hi > 1e12 {
                    reachable = false;
                    break;
                }
            }
            if !reachable {
                continue;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mse(mid) > epsilon {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.min(hi * peak);
        }
    }
    best
}

/// Linear MMSE of `theta` from the raw observation
/// `y = sum_i h_i g_i (theta + v_i) + w`, by the orthogonality principle on
/// explicitly accumulated second moments.
pub fn lmmse_oracle(prior: f64, s: &NetworkScenario, h: &ChannelRealization, g: &[C64]) -> f64 {
    // E[y conj(y)] and E[y conj(theta)], term by term.
    let mut cross = C64::new(0.0, 0.0);
    let mut var_y = s.fc_noise_var();
    for i in 0..g.len() {
        let z = h.gains()[i] * g[i];
        cross += z * prior;
        var_y += z.norm_sqr() * s.meas_noise_vars()[i];
        for j in 0..g.len() {
            let zj = h.gains()[j] * g[j];
            var_y += (z * zj.conj()).re * prior;
        }
    }
    if var_y == 0.0 {
        return prior;
    }
    // theta_hat = w y with w = E[theta conj(y)] / E|y|^2.
    let w = cross.conj() / var_y;
    // E|theta - w y|^2 = P - 2 Re(w E[y conj(theta)]) + |w|^2 E|y|^2.
    prior - 2.0 * (w * cross).re + w.norm_sqr() * var_y
}
