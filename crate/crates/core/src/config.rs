//! Experiment configuration as a sectioned key-value (TOML) file.
//!
//! ```toml
//! output_dir = "out"
//!
//! [robot]          # SI units; per-link vectors have n entries, per-joint n-1
//! n = 5
//! mass = [1.0, 1.0, 1.0, 1.0, 1.0]
//! ...
//! [sensor]         # sigma_w, h_true ("position" | "velocity"), basis, alpha_h
//! [filter]         # particles, delta, gain_basis
//! [learning]       # gamma, epsilon, alpha, amplitude, dt, periods_per_episode, episodes, ...
//! [atlas]          # settle_periods, samples
//! [evaluation]     # warmup_periods, periods
//! [seeds]          # master
//! ```
//!
//! Basis functions are written `sin<k>` / `cos<k>`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::Fourier;
use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::fpf::default_gain_basis;
use crate::qlearn::FeatureConfig;
use crate::sensor::SensorConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub particles: usize,
    pub delta: f64,
    pub gain_basis: Vec<Fourier>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 100,
            delta: 0.05,
            gain_basis: default_gain_basis(),
        }
    }
}

/// Which way the stage cost rewards turning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnDirection {
    /// Cost `+psi_dot`: minimizing it turns the robot clockwise.
    Clockwise,
    /// Mirrored cost `-psi_dot`.
    Counterclockwise,
}

impl TurnDirection {
    pub fn sign(self) -> f64 {
        match self {
            TurnDirection::Clockwise => 1.0,
            TurnDirection::Counterclockwise => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningConfig {
    /// Discount rate.
    pub gamma: f64,
    /// Control penalty.
    pub epsilon: f64,
    /// Q-weight learning rate.
    pub alpha: f64,
    /// Exploration amplitude.
    pub amplitude: f64,
    pub dt: f64,
    pub periods_per_episode: usize,
    pub episodes: usize,
    pub features: Vec<Fourier>,
    pub w3_init: [f64; 2],
    pub w_init_spread: f64,
    /// Evaluation-time saturation of the learned control.
    pub policy_clamp: f64,
    pub turn: TurnDirection,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            epsilon: 10.0,
            alpha: 0.01,
            amplitude: 0.5,
            dt: 0.02,
            periods_per_episode: 10,
            episodes: 200,
            features: FeatureConfig::default_phi(),
            w3_init: [0.09, 0.11],
            w_init_spread: 0.1,
            policy_clamp: 0.95,
            turn: TurnDirection::Clockwise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasConfig {
    pub settle_periods: usize,
    pub samples: usize,
}

impl Default for AtlasConfig {
    fn default() -> Self {
        Self {
            settle_periods: 50,
            samples: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Open-loop periods that let the filters lock before control starts.
    pub warmup_periods: usize,
    pub periods: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            warmup_periods: 10,
            periods: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub master: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { master: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub robot: RobotParams,
    pub sensor: SensorConfig,
    pub filter: FilterConfig,
    pub learning: LearningConfig,
    pub atlas: AtlasConfig,
    pub evaluation: EvaluationConfig,
    pub seeds: SeedConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            robot: RobotParams::table_ii(),
            sensor: SensorConfig::default(),
            filter: FilterConfig::default(),
            learning: LearningConfig::default(),
            atlas: AtlasConfig::default(),
            evaluation: EvaluationConfig::default(),
            seeds: SeedConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.sensor.validate()?;
        let f = &self.filter;
        if f.particles <= f.gain_basis.len() || f.particles < 2 {
            return Err(Error::Config(format!(
                "filter.particles = {} must exceed the gain basis size {}",
                f.particles,
                f.gain_basis.len()
            )));
        }
        if !(f.delta >= 0.0 && f.delta < self.robot.omega0) {
            return Err(Error::Config(format!("filter.delta = {} must lie in [0, omega0)", f.delta)));
        }
        if f.gain_basis.is_empty() {
            return Err(Error::Config("filter.gain_basis is empty".into()));
        }
        let l = &self.learning;
        let positive = [
            ("gamma", l.gamma),
            ("epsilon", l.epsilon),
            ("amplitude", l.amplitude),
            ("dt", l.dt),
            ("policy_clamp", l.policy_clamp),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("learning.{name} must be positive, got {v}")));
            }
        }
        if !(l.alpha >= 0.0 && l.alpha.is_finite()) {
            return Err(Error::Config(format!("learning.alpha must be nonnegative, got {}", l.alpha)));
        }
        if l.periods_per_episode == 0 || l.episodes == 0 {
            return Err(Error::Config("learning needs at least one episode of one period".into()));
        }
        if l.features.is_empty() {
            return Err(Error::Config("learning.features is empty".into()));
        }
        if !(l.w3_init[0] > 0.0 && l.w3_init[1] >= l.w3_init[0]) {
            return Err(Error::Config("learning.w3_init must be an increasing positive range".into()));
        }
        if l.policy_clamp >= 1.0 {
            return Err(Error::Config("learning.policy_clamp must stay below 1".into()));
        }
        if self.atlas.settle_periods == 0 || self.atlas.samples < 8 {
            return Err(Error::Config("atlas needs settle_periods >= 1 and samples >= 8".into()));
        }
        if self.evaluation.periods == 0 {
            return Err(Error::Config("evaluation.periods must be positive".into()));
        }
        Ok(())
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig::new(self.robot.n, self.learning.features.clone())
    }

    /// Steps per episode, `round(n_T T / dt)`.
    pub fn steps_per_episode(&self) -> usize {
        steps_for(self.learning.periods_per_episode, &self.robot, self.learning.dt)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

pub fn steps_for(periods: usize, robot: &RobotParams, dt: f64) -> usize {
    (periods as f64 * robot.period() / dt).round() as usize
}
