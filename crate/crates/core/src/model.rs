//! Process model, network description, channel draws and gain bookkeeping.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::HermitianMatrix;
use crate::track;

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("|alpha| = {0} violates the stationarity requirement |alpha| < 1")]
    NonStationary(f64),
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("{field} has length {actual}, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("a scenario needs at least one sensor")]
    NoSensors,
    #[error("{0} has a non-finite entry")]
    NonFinite(&'static str),
    #[error("sensor {index} has zero input power (sigma_theta^2 + sigma_v^2 = 0)")]
    SingularInputPower { index: usize },
}

fn check_range(field: &'static str, value: f64, ok: bool, requirement: &'static str) -> Result<(), ModelError> {
    if !value.is_finite() {
        return Err(ModelError::NonFinite(field));
    }
    if ok {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            field,
            requirement,
            value,
        })
    }
}

/// First-order Gauss-Markov law `theta_n = alpha theta_{n-1} + u_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussMarkovModel {
    alpha: C64,
    sigma_u_sq: f64,
    sigma_theta_sq: f64,
}

impl GaussMarkovModel {
    pub fn new(alpha: C64, sigma_u_sq: f64) -> Result<Self, ModelError> {
        let mag = alpha.norm();
        if !mag.is_finite() {
            return Err(ModelError::NonFinite("alpha"));
        }
        if mag >= 1.0 {
            return Err(ModelError::NonStationary(mag));
        }
        check_range("sigma_u_sq", sigma_u_sq, sigma_u_sq >= 0.0, ">= 0")?;
        Ok(Self {
            alpha,
            sigma_u_sq,
            sigma_theta_sq: sigma_u_sq / (1.0 - alpha.norm_sqr()),
        })
    }

    /// Picks `sigma_u^2` so that the stationary variance is `sigma_theta_sq`.
    pub fn from_stationary_variance(alpha: C64, sigma_theta_sq: f64) -> Result<Self, ModelError> {
        check_range("sigma_theta_sq", sigma_theta_sq, sigma_theta_sq >= 0.0, ">= 0")?;
        Self::new(alpha, sigma_theta_sq * (1.0 - alpha.norm_sqr()))
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn sigma_u_sq(&self) -> f64 {
        self.sigma_u_sq
    }

    pub fn sigma_theta_sq(&self) -> f64 {
        self.sigma_theta_sq
    }
}

/// Static description of the sensor network.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NetworkScenario {
    model: GaussMarkovModel,
    distances: Vec<f64>,
    path_loss_exp: f64,
    meas_noise_vars: Vec<f64>,
    fc_noise_var: f64,
    sum_power: f64,
    indiv_powers: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    indiv_defaulted: bool,
}

/// Builder for [`NetworkScenario`]. Defaults: `gamma = 1`, `sigma_w^2 = 0.5`,
/// individual budgets `P_T / N`.
#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    model: GaussMarkovModel,
    distances: Vec<f64>,
    path_loss_exp: f64,
    meas_noise_vars: Vec<f64>,
    fc_noise_var: f64,
    sum_power: f64,
    indiv_powers: Option<Vec<f64>>,
    n_sensors: Option<usize>,
}

impl ScenarioBuilder {
    pub fn new(model: GaussMarkovModel) -> Self {
        Self {
            model,
            distances: Vec::new(),
            path_loss_exp: 1.0,
            meas_noise_vars: Vec::new(),
            fc_noise_var: 0.5,
            sum_power: 1.0,
            indiv_powers: None,
            n_sensors: None,
        }
    }

    /// Declares `N` explicitly so vector lengths are checked against it.
    pub fn n_sensors(mut self, n: usize) -> Self {
        self.n_sensors = Some(n);
        self
    }

    pub fn distances(mut self, d: Vec<f64>) -> Self {
        self.distances = d;
        self
    }

    pub fn path_loss_exp(mut self, gamma: f64) -> Self {
        self.path_loss_exp = gamma;
        self
    }

    pub fn meas_noise_vars(mut self, v: Vec<f64>) -> Self {
        self.meas_noise_vars = v;
        self
    }

    pub fn fc_noise_var(mut self, v: f64) -> Self {
        self.fc_noise_var = v;
        self
    }

    pub fn sum_power(mut self, p: f64) -> Self {
        self.sum_power = p;
        self
    }

    pub fn indiv_powers(mut self, p: Vec<f64>) -> Self {
        self.indiv_powers = Some(p);
        self
    }

    pub fn build(self) -> Result<NetworkScenario, ModelError> {
        let n = self.n_sensors.unwrap_or(self.distances.len());
        if n == 0 {
            return Err(ModelError::NoSensors);
        }
        let check_len = |field, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(ModelError::LengthMismatch {
                    field,
                    expected: n,
                    actual: len,
                })
            }
        };
        check_len("distances", self.distances.len())?;
        check_len("meas_noise_vars", self.meas_noise_vars.len())?;
        for &d in &self.distances {
            check_range("distances", d, d > 0.0, "> 0")?;
        }
        for &v in &self.meas_noise_vars {
            check_range("meas_noise_vars", v, v >= 0.0, ">= 0")?;
        }
        check_range("path_loss_exp", self.path_loss_exp, self.path_loss_exp >= 0.0, ">= 0")?;
        check_range("fc_noise_var", self.fc_noise_var, self.fc_noise_var >= 0.0, ">= 0")?;
        check_range("sum_power", self.sum_power, self.sum_power > 0.0, "> 0")?;
        let indiv_defaulted = self.indiv_powers.is_none();
        let indiv_powers = match self.indiv_powers {
            Some(p) => {
                check_len("indiv_powers", p.len())?;
                for &x in &p {
                    check_range("indiv_powers", x, x > 0.0, "> 0")?;
                }
                p
            }
            None => alloc::vec![self.sum_power / n as f64; n],
        };
        let st = self.model.sigma_theta_sq();
        for (index, &v) in self.meas_noise_vars.iter().enumerate() {
            if !(st + v > 0.0) {
                return Err(ModelError::SingularInputPower { index });
            }
        }
        Ok(NetworkScenario {
            model: self.model,
            distances: self.distances,
            path_loss_exp: self.path_loss_exp,
            meas_noise_vars: self.meas_noise_vars,
            fc_noise_var: self.fc_noise_var,
            sum_power: self.sum_power,
            indiv_powers,
            indiv_defaulted,
        })
    }
}

impl NetworkScenario {
    pub fn builder(model: GaussMarkovModel) -> ScenarioBuilder {
        ScenarioBuilder::new(model)
    }

    pub fn n_sensors(&self) -> usize {
        self.distances.len()
    }

    pub fn model(&self) -> &GaussMarkovModel {
        &self.model
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn path_loss_exp(&self) -> f64 {
        self.path_loss_exp
    }

    pub fn meas_noise_vars(&self) -> &[f64] {
        &self.meas_noise_vars
    }

    pub fn fc_noise_var(&self) -> f64 {
        self.fc_noise_var
    }

    pub fn sum_power(&self) -> f64 {
        self.sum_power
    }

    pub fn indiv_powers(&self) -> &[f64] {
        &self.indiv_powers
    }

    /// `sigma_theta^2 + sigma_{v,i}^2`, the power of sensor `i`'s observation.
    pub fn input_power(&self, i: usize) -> f64 {
        self.model.sigma_theta_sq() + self.meas_noise_vars[i]
    }

    /// Diagonal of `D`.
    pub fn input_powers(&self) -> Vec<f64> {
        (0..self.n_sensors()).map(|i| self.input_power(i)).collect()
    }

    pub fn d_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&self.input_powers())
    }

    /// Expected channel power gain `d_i^{-2 gamma}`.
    pub fn mean_channel_gain(&self, i: usize) -> f64 {
        self.distances[i].powf(-2.0 * self.path_loss_exp)
    }

    /// Same network with a new sum budget. Individual budgets that were
    /// defaulted to `P_T / N` follow the new total; explicit ones are kept.
    pub fn with_sum_power(&self, sum_power: f64) -> Result<Self, ModelError> {
        check_range("sum_power", sum_power, sum_power > 0.0, "> 0")?;
        let mut s = self.clone();
        s.sum_power = sum_power;
        if s.indiv_defaulted {
            let n = s.n_sensors() as f64;
            for p in s.indiv_powers.iter_mut() {
                *p = sum_power / n;
            }
        }
        Ok(s)
    }

    pub fn with_indiv_powers(&self, powers: Vec<f64>) -> Result<Self, ModelError> {
        if powers.len() != self.n_sensors() {
            return Err(ModelError::LengthMismatch {
                field: "indiv_powers",
                expected: self.n_sensors(),
                actual: powers.len(),
            });
        }
        for &x in &powers {
            check_range("indiv_powers", x, x > 0.0, "> 0")?;
        }
        let mut s = self.clone();
        s.indiv_powers = powers;
        s.indiv_defaulted = false;
        Ok(s)
    }

    pub fn with_fc_noise_var(&self, v: f64) -> Result<Self, ModelError> {
        check_range("fc_noise_var", v, v >= 0.0, ">= 0")?;
        let mut s = self.clone();
        s.fc_noise_var = v;
        Ok(s)
    }

    /// Keeps the first `n` sensors.
    pub fn truncated(&self, n: usize) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::NoSensors);
        }
        if n > self.n_sensors() {
            return Err(ModelError::LengthMismatch {
                field: "distances",
                expected: n,
                actual: self.n_sensors(),
            });
        }
        let mut b = ScenarioBuilder::new(self.model)
            .distances(self.distances[..n].to_vec())
            .path_loss_exp(self.path_loss_exp)
            .meas_noise_vars(self.meas_noise_vars[..n].to_vec())
            .fc_noise_var(self.fc_noise_var)
            .sum_power(self.sum_power);
        if !self.indiv_defaulted {
            b = b.indiv_powers(self.indiv_powers[..n].to_vec());
        }
        b.build()
    }
}

/// One draw of the channel vector `h`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelRealization {
    gains: Vec<C64>,
}

impl ChannelRealization {
    pub fn new(gains: Vec<C64>) -> Result<Self, ModelError> {
        if gains.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(ModelError::NonFinite("channel"));
        }
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[C64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.gains.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    /// `diag(|h_i|^2 sigma_{v,i}^2)`, that is `H V H^H`.
    pub fn hvh(&self, scenario: &NetworkScenario) -> Vec<f64> {
        self.gains
            .iter()
            .zip(scenario.meas_noise_vars())
            .map(|(h, v)| h.norm_sqr() * v)
            .collect()
    }

    /// Every entry multiplied by `phase`.
    pub fn rotated(&self, phase: C64) -> Self {
        Self {
            gains: self.gains.iter().map(|h| h * phase).collect(),
        }
    }

    /// Keeps the first `n` entries.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            gains: self.gains[..n].to_vec(),
        }
    }
}

/// Gains together with their power accounting and achieved filtered MSE.
///
/// `gains` holds the multipliers the sensors actually apply, so the coherent
/// sum seen by the fusion center is `sum_i h_i gains_i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GainAllocation {
    pub gains: Vec<C64>,
    pub per_sensor_power: Vec<f64>,
    pub sum_power: f64,
    pub achieved_mse: f64,
}

impl GainAllocation {
    /// Derives powers and the filtered MSE from `gains`.
    pub fn evaluate(scenario: &NetworkScenario, channel: &ChannelRealization, prior_mse: f64, gains: Vec<C64>) -> Self {
        let per_sensor_power: Vec<f64> = gains
            .iter()
            .enumerate()
            .map(|(i, g)| g.norm_sqr() * scenario.input_power(i))
            .collect();
        let sum_power = per_sensor_power.iter().sum();
        let achieved_mse = track::filtered_mse(prior_mse, scenario, channel, &gains);
        Self {
            gains,
            per_sensor_power,
            sum_power,
            achieved_mse,
        }
    }

    pub fn max_power(&self) -> f64 {
        self.per_sensor_power.iter().cloned().fold(0.0, f64::max)
    }

    /// `sum_i h_i g_i`.
    pub fn coherent_gain(&self, channel: &ChannelRealization) -> C64 {
        self.gains.iter().zip(channel.gains()).map(|(g, h)| g * h).sum()
    }
}

/// Circularly symmetric complex normal with total variance `var`.
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (0.5 * var).sqrt();
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    C64::new(s * x, s * y)
}

/// Draws `h_i = h~_i / d_i^gamma` with `h~_i ~ CN(0, 1)`.
pub fn sample_channel<R: Rng + ?Sized>(scenario: &NetworkScenario, rng: &mut R) -> ChannelRealization {
    let gamma = scenario.path_loss_exp();
    let gains = scenario
        .distances()
        .iter()
        .map(|d| sample_cn(rng, 1.0) / d.powf(gamma))
        .collect();
    ChannelRealization { gains }
}

/// How a per-sensor quantity is obtained when realizing a template.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Draw {
    Fixed(Vec<f64>),
    /// Uniform on `(lo, hi]`; the open lower end keeps noise variances
    /// strictly positive when `lo = 0`.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl Draw {
    fn validate(&self, field: &'static str) -> Result<(), ModelError> {
        if let Draw::Uniform { lo, hi } = *self {
            check_range(field, lo, lo >= 0.0, ">= 0")?;
            check_range(field, hi, hi >= lo, ">= lower end")?;
        }
        Ok(())
    }
}

/// A scenario with possibly random geometry, plus the initial prediction MSE.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioTemplate {
    pub model: GaussMarkovModel,
    pub distances: Draw,
    pub meas_noise_vars: Draw,
    pub path_loss_exp: f64,
    pub fc_noise_var: f64,
    pub sum_power: f64,
    pub indiv_powers: Option<Vec<f64>>,
    pub initial_mse: f64,
}

/// Correlation used by the presets; the simulations only pin `sigma_theta^2`.
pub const DEFAULT_ALPHA: f64 = 0.9;

impl ScenarioTemplate {
    /// Defaults of the simulation study: `d ~ U[2, 8]`, `gamma = 1`,
    /// `sigma_v^2 ~ U(0, 0.5]`, `sigma_w^2 = 0.5`, `sigma_theta^2 = 1`,
    /// `P_{0|-1} = 0.5`, `P_T = 300`.
    pub fn paper_sec7() -> Self {
        Self {
            model: GaussMarkovModel::from_stationary_variance(C64::new(DEFAULT_ALPHA, 0.0), 1.0)
                .expect("preset model is valid"),
            distances: Draw::Uniform { lo: 2.0, hi: 8.0 },
            meas_noise_vars: Draw::Uniform { lo: 0.0, hi: 0.5 },
            path_loss_exp: 1.0,
            fc_noise_var: 0.5,
            sum_power: 300.0,
            indiv_powers: None,
            initial_mse: 0.5,
        }
    }

    /// The SNR illustration: noise variances on `[0.4, 0.5]`, `P_T = 5`.
    pub fn paper_fig5() -> Self {
        Self {
            meas_noise_vars: Draw::Uniform { lo: 0.4, hi: 0.5 },
            sum_power: 5.0,
            ..Self::paper_sec7()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.distances.validate("distances")?;
        self.meas_noise_vars.validate("meas_noise_vars")?;
        check_range("initial_mse", self.initial_mse, self.initial_mse > 0.0, "> 0")?;
        Ok(())
    }

    /// Realizes an `n`-sensor scenario. Random entries are drawn sensor by
    /// sensor (distance, then noise), so a smaller `n` with the same RNG
    /// state yields a prefix of a larger draw.
    pub fn realize<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<NetworkScenario, ModelError> {
        self.validate()?;
        let mut d = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            d.push(pick(&self.distances, i, rng));
            v.push(pick(&self.meas_noise_vars, i, rng));
        }
        let mut b = ScenarioBuilder::new(self.model)
            .n_sensors(n)
            .distances(d)
            .meas_noise_vars(v)
            .path_loss_exp(self.path_loss_exp)
            .fc_noise_var(self.fc_noise_var)
            .sum_power(self.sum_power);
        if let Draw::Fixed(x) = &self.distances {
            if x.len() != n {
                return Err(ModelError::LengthMismatch {
                    field: "distances",
                    expected: n,
                    actual: x.len(),
                });
            }
        }
        if let Draw::Fixed(x) = &self.meas_noise_vars {
            if x.len() != n {
                return Err(ModelError::LengthMismatch {
                    field: "meas_noise_vars",
                    expected: n,
                    actual: x.len(),
                });
            }
        }
        if let Some(p) = &self.indiv_powers {
            b = b.indiv_powers(p.clone());
        }
        b.build()
    }

    /// Number of sensors pinned by fixed per-sensor vectors, if any.
    pub fn fixed_n(&self) -> Option<usize> {
        match (&self.distances, &self.meas_noise_vars, &self.indiv_powers) {
            (Draw::Fixed(d), _, _) => Some(d.len()),
            (_, Draw::Fixed(v), _) => Some(v.len()),
            (_, _, Some(p)) => Some(p.len()),
            _ => None,
        }
    }
}

fn pick<R: Rng + ?Sized>(draw: &Draw, i: usize, rng: &mut R) -> f64 {
    match draw {
        Draw::Fixed(x) => x.get(i).copied().unwrap_or(f64::NAN),
        Draw::Uniform { lo, hi } => {
            let u: f64 = rng.random();
            lo + (hi - lo) * (1.0 - u)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> GaussMarkovModel {
        GaussMarkovModel::from_stationary_variance(C64::new(0.9, 0.0), 1.0).unwrap()
    }

    fn scenario(d: Vec<f64>, gamma: f64) -> NetworkScenario {
        let n = d.len();
        NetworkScenario::builder(model())
            .distances(d)
            .path_loss_exp(gamma)
            .meas_noise_vars(vec![0.2; n])
            .sum_power(10.0)
            .build()
            .unwrap()
    }

    #[test]
    fn stationary_variance_is_derived() {
        let m = GaussMarkovModel::new(C64::new(0.6, 0.0), 0.64).unwrap();
        assert_eq!(m.sigma_theta_sq(), 0.64 / (1.0 - 0.36));
        assert!(matches!(
            GaussMarkovModel::new(C64::new(1.0, 0.0), 0.1),
            Err(ModelError::NonStationary(_))
        ));
        assert!(matches!(
            GaussMarkovModel::new(C64::new(0.0, -1.2), 0.1),
            Err(ModelError::NonStationary(_))
        ));
    }

    #[test]
    fn builder_checks_shapes_and_defaults_budgets() {
        let s = scenario(vec![2.0, 3.0, 4.0, 5.0], 1.0);
        assert_eq!(s.indiv_powers(), &[2.5; 4]);
        let s2 = s.with_sum_power(40.0).unwrap();
        assert_eq!(s2.indiv_powers(), &[10.0; 4]);
        let err = NetworkScenario::builder(model())
            .n_sensors(3)
            .distances(vec![1.0, 2.0])
            .meas_noise_vars(vec![0.1; 3])
            .build()
            .unwrap_err();
        assert_eq!(
            err,
            ModelError::LengthMismatch {
                field: "distances",
                expected: 3,
                actual: 2
            }
        );
        let err = NetworkScenario::builder(model())
            .distances(vec![1.0, -2.0])
            .meas_noise_vars(vec![0.1; 2])
            .build()
            .unwrap_err();
        assert!(matches!(err, ModelError::OutOfRange { field: "distances", .. }));
    }

    #[test]
    fn channel_is_reproducible() {
        let s = scenario(vec![2.0, 3.0, 7.0], 1.0);
        let a = sample_channel(&s, &mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_channel(&s, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    fn empirical_power(d: f64, gamma: f64) -> (f64, f64) {
        let s = scenario(vec![d], gamma);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let p = sample_channel(&s, &mut rng).gains()[0].norm_sqr();
            acc += p;
            acc2 += p * p;
        }
        let mean = acc / n as f64;
        let sd = (acc2 / n as f64 - mean * mean).sqrt();
        (mean, sd / (n as f64).sqrt())
    }

    #[test]
    fn unit_variance_without_path_loss() {
        let (mean, se) = empirical_power(1.0, 0.0);
        assert!((mean - 1.0).abs() <= 0.02);
        assert!((mean - 1.0).abs() <= 3.0 * se);
    }

    #[test]
    fn path_loss_scales_variance() {
        let (mean, se) = empirical_power(2.0, 1.0);
        assert!((mean - 0.25).abs() <= 0.02 * 0.25);
        assert!((mean - 0.25).abs() <= 3.0 * se);
    }

    #[test]
    fn presets_and_prefix_property() {
        let t = ScenarioTemplate::paper_sec7();
        let big = t.realize(20, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let small = t.realize(5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(&big.distances()[..5], small.distances());
        assert_eq!(&big.meas_noise_vars()[..5], small.meas_noise_vars());
        for i in 0..20 {
            assert!((2.0..=8.0).contains(&big.distances()[i]));
            let v = big.meas_noise_vars()[i];
            assert!(v > 0.0 && v <= 0.5);
        }
        assert_eq!(big.fc_noise_var(), 0.5);
        assert!((big.model().sigma_theta_sq() - 1.0).abs() < 1e-15);
        assert_eq!(big.indiv_powers(), &[15.0; 20]);
        let f5 = ScenarioTemplate::paper_fig5()
            .realize(30, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert!(f5.meas_noise_vars().iter().all(|&v| (0.4..=0.5).contains(&v)));
        assert_eq!(big.truncated(5).unwrap().indiv_powers(), &[60.0; 5]);
    }

    proptest! {
        #[test]
        fn power_accounting_is_consistent(
            parts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..2.0), 1..12)
        ) {
            let n = parts.len();
            let s = NetworkScenario::builder(model())
                .distances(vec![3.0; n])
                .meas_noise_vars(parts.iter().map(|p| p.2).collect())
                .build()
                .unwrap();
            let ch = ChannelRealization::new(vec![C64::new(0.3, 0.1); n]).unwrap();
            let gains: Vec<C64> = parts.iter().map(|p| C64::new(p.0, p.1)).collect();
            let alloc = GainAllocation::evaluate(&s, &ch, 0.5, gains.clone());
            let mut total = 0.0;
            for i in 0..n {
                let want = gains[i].norm_sqr() * (1.0 + parts[i].2);
                prop_assert!((alloc.per_sensor_power[i] - want).abs() <= 1e-15 * want.max(1.0));
                total += alloc.per_sensor_power[i];
            }
            prop_assert_eq!(alloc.sum_power, total);
            prop_assert!(alloc.achieved_mse > 0.0 && alloc.achieved_mse <= 0.5);
        }
    }
}
