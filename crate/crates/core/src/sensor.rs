//! Joint sensors and the online phase-domain observation model.
//!
//! Each joint reports `dZ_j = h_true(x_j, xdot_j) dt + sigma_W dW_j`. The
//! learner models `h_j(theta) = r_j . phi_h(theta)` and adapts `r_j` with the
//! particle-averaged innovation rule.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{ensemble_average, Fourier};
use crate::dynamics::RobotState;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Ground-truth observation function of one joint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueObservation {
    /// `h(x, xdot) = x`
    Position,
    /// `h(x, xdot) = xdot`
    Velocity,
}

impl TrueObservation {
    pub fn eval(self, x: f64, xdot: f64) -> f64 {
        match self {
            TrueObservation::Position => x,
            TrueObservation::Velocity => xdot,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub sigma_w: f64,
    pub h_true: TrueObservation,
    pub basis: Vec<Fourier>,
    /// Observation-model learning rate.
    pub alpha_h: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            sigma_w: 0.1,
            h_true: TrueObservation::Position,
            basis: vec![Fourier::Sin(1), Fourier::Sin(2), Fourier::Cos(2)],
            alpha_h: 0.01,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w > 0.0 && self.sigma_w.is_finite()) {
            return Err(Error::Config(format!("sigma_w must be positive, got {}", self.sigma_w)));
        }
        if self.basis.is_empty() {
            return Err(Error::Config("observation basis is empty".into()));
        }
        if !(self.alpha_h > 0.0 && self.alpha_h.is_finite()) {
            return Err(Error::Config(format!("alpha_h must be positive, got {}", self.alpha_h)));
        }
        Ok(())
    }

    pub fn m_h(&self) -> usize {
        self.basis.len()
    }
}

/// Per-joint observation-model weights `r_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorWeights {
    pub r: Vec<Vec<f64>>,
}

impl SensorWeights {
    pub fn zeros(joints: usize, m_h: usize) -> Self {
        Self {
            r: vec![vec![0.0; m_h]; joints],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.r.iter().flatten().fold(0.0_f64, |a, &b| a.max(b.abs()))
    }
}

/// Observation increments for every joint over `[t, t + dt]`, one normal
/// draw per joint from that joint's stream.
pub fn observe(state: &RobotState, dt: f64, cfg: &SensorConfig, streams: &mut [Stream]) -> Vec<f64> {
    assert!(dt > 0.0, "observation interval must be positive");
    let x = state.shape();
    let xdot = state.shape_velocity();
    assert_eq!(streams.len(), x.len(), "one noise stream per joint");
    let sd = cfg.sigma_w * dt.sqrt();
    streams
        .iter_mut()
        .enumerate()
        .map(|(j, rng)| {
            let xi: f64 = StandardNormal.sample(rng);
            cfg.h_true.eval(x[j], xdot[j]) * dt + sd * xi
        })
        .collect()
}

/// `h_j(theta; r_j) = r_j . phi_h(theta)`.
pub fn h_approx(theta: f64, r: &[f64], basis: &[Fourier]) -> f64 {
    r.iter().zip(basis).map(|(w, f)| w * f.eval(theta)).sum()
}

/// `r_j + alpha_h (dZ_j - h_hat_j dt) mean_i phi_h(theta_j^i)`.
pub fn update_sensor_weights(
    r: &[f64],
    dz: f64,
    h_hat: f64,
    particles: &[f64],
    alpha_h: f64,
    dt: f64,
    basis: &[Fourier],
) -> Vec<f64> {
    assert!(alpha_h > 0.0, "learning rate must be positive");
    let innovation = dz - h_hat * dt;
    let avg = ensemble_average(basis, particles);
    r.iter().zip(&avg).map(|(w, a)| w + alpha_h * innovation * a).collect()
}

pub fn weight_trace_header(m_h: usize) -> String {
    let mut s = String::from("t,j");
    for m in 1..=m_h {
        write!(s, ",r{m}").unwrap();
    }
    s
}

pub fn weight_trace_rows(t: f64, weights: &SensorWeights) -> String {
    let mut s = String::new();
    for (j, r) in weights.r.iter().enumerate() {
        write!(s, "{t},{}", j + 1).unwrap();
        for v in r {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub const OBSERVATION_LOG_HEADER: &str = "t,j,dZ";

pub fn observation_rows(t: f64, dz: &[f64]) -> String {
    let mut s = String::new();
    for (j, v) in dz.iter().enumerate() {
        writeln!(s, "{t},{},{v}", j + 1).unwrap();
    }
    s
}
