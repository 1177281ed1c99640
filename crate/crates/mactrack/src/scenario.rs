//! Scenario files: a flat JSON document layered over a named preset.
//!
//! Every key is optional. Missing keys keep the preset value (`paper-sec7`
//! unless `preset` says otherwise). Per-sensor quantities are either an
//! explicit array or `{"uniform": [lo, hi]}`.

use std::path::Path;

use mactrack_core::model::{Draw, GaussMarkovModel, ModelError, ScenarioTemplate, C64};
use mactrack_core::NetworkScenario;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Sensor count used when neither the file nor a fixed vector pins one.
pub const DEFAULT_SENSORS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario JSON, line {line} column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown preset {0:?} (expected paper-sec7 or paper-fig5)")]
    UnknownPreset(String),
    #[error("field {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    PaperSec7,
    PaperFig5,
}

impl Preset {
    pub fn template(self) -> ScenarioTemplate {
        match self {
            Preset::PaperSec7 => ScenarioTemplate::paper_sec7(),
            Preset::PaperFig5 => ScenarioTemplate::paper_fig5(),
        }
    }

    pub fn from_name(name: &str) -> Result<Self, ScenarioError> {
        match name {
            "paper-sec7" => Ok(Preset::PaperSec7),
            "paper-fig5" => Ok(Preset::PaperFig5),
            other => Err(ScenarioError::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AlphaSpec {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct UniformSpec {
    uniform: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DrawSpec {
    Values(Vec<f64>),
    Uniform(UniformSpec),
}

impl From<DrawSpec> for Draw {
    fn from(d: DrawSpec) -> Self {
        match d {
            DrawSpec::Values(v) => Draw::Fixed(v),
            DrawSpec::Uniform(UniformSpec { uniform: [lo, hi] }) => Draw::Uniform { lo, hi },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    preset: Option<String>,
    n_sensors: Option<usize>,
    alpha: Option<AlphaSpec>,
    sigma_u_sq: Option<f64>,
    sigma_theta_sq: Option<f64>,
    distances: Option<DrawSpec>,
    meas_noise_vars: Option<DrawSpec>,
    path_loss_exp: Option<f64>,
    fc_noise_var: Option<f64>,
    sum_power: Option<f64>,
    indiv_powers: Option<Vec<f64>>,
    initial_mse: Option<f64>,
}

/// A validated scenario template together with its sensor count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub template: ScenarioTemplate,
    pub n_sensors: usize,
}

impl ScenarioConfig {
    pub fn from_preset(preset: Preset, n_sensors: Option<usize>) -> Result<Self, ScenarioError> {
        finish(preset.template(), n_sensors)
    }

    pub fn prior_mse(&self) -> f64 {
        self.template.initial_mse
    }

    /// Realizes the geometry for `n` sensors from `rng`.
    pub fn realize<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<NetworkScenario, ModelError> {
        self.template.realize(n, rng)
    }

    pub fn with_n_sensors(&self, n: usize) -> Result<Self, ScenarioError> {
        finish(self.template.clone(), Some(n))
    }

    pub fn with_sum_power(&self, p: f64) -> Result<Self, ScenarioError> {
        let mut c = self.clone();
        c.template.sum_power = p;
        finish(c.template, Some(c.n_sensors))
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    resolve(file)
}

fn invalid(field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        message: message.into(),
    }
}

fn resolve(file: ScenarioFile) -> Result<ScenarioConfig, ScenarioError> {
    let preset = match &file.preset {
        Some(name) => Preset::from_name(name)?,
        None => Preset::PaperSec7,
    };
    let mut t = preset.template();

    let alpha = match file.alpha {
        Some(AlphaSpec::Real(a)) => C64::new(a, 0.0),
        Some(AlphaSpec::Complex([re, im])) => C64::new(re, im),
        None => t.model.alpha(),
    };
    t.model = match (file.sigma_u_sq, file.sigma_theta_sq) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "sigma_u_sq",
                "give either sigma_u_sq or sigma_theta_sq, not both",
            ))
        }
        (Some(u), None) => GaussMarkovModel::new(alpha, u)?,
        (None, Some(th)) => GaussMarkovModel::from_stationary_variance(alpha, th)?,
        (None, None) => GaussMarkovModel::from_stationary_variance(alpha, t.model.sigma_theta_sq())?,
    };
    if let Some(d) = file.distances {
        t.distances = d.into();
    }
    if let Some(v) = file.meas_noise_vars {
        t.meas_noise_vars = v.into();
    }
    if let Some(g) = file.path_loss_exp {
        t.path_loss_exp = g;
    }
    if let Some(w) = file.fc_noise_var {
        t.fc_noise_var = w;
    }
    if let Some(p) = file.sum_power {
        t.sum_power = p;
    }
    if let Some(p) = file.indiv_powers {
        t.indiv_powers = Some(p);
    }
    if let Some(p) = file.initial_mse {
        if !(p > 0.0 && p.is_finite()) {
            return Err(invalid("initial_mse", format!("must be finite and > 0, got {p}")));
        }
        t.initial_mse = p;
    }
    finish(t, file.n_sensors)
}

/// Fixes the sensor count and checks the template by realizing it once.
fn finish(t: ScenarioTemplate, n_sensors: Option<usize>) -> Result<ScenarioConfig, ScenarioError> {
    t.validate()?;
    let n = match (n_sensors, t.fixed_n()) {
        (Some(0), _) => return Err(ModelError::NoSensors.into()),
        (Some(n), _) => n,
        (None, Some(n)) => n,
        (None, None) => DEFAULT_SENSORS,
    };
    // Fixed vectors must all have length N; realizing checks the values.
    for (field, len) in [
        ("distances", fixed_len(&t.distances)),
        ("meas_noise_vars", fixed_len(&t.meas_noise_vars)),
        ("indiv_powers", t.indiv_powers.as_ref().map(Vec::len)),
    ] {
        if let Some(len) = len {
            if len != n {
                return Err(ModelError::LengthMismatch {
                    field,
                    expected: n,
                    actual: len,
                }
                .into());
            }
        }
    }
    t.realize(n, &mut ChaCha8Rng::seed_from_u64(0))?;
    Ok(ScenarioConfig {
        template: t,
        n_sensors: n,
    })
}

fn fixed_len(d: &Draw) -> Option<usize> {
    match d {
        Draw::Fixed(v) => Some(v.len()),
        Draw::Uniform { .. } => None,
    }
}
