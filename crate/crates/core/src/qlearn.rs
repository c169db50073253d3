//! Continuous-time Q-learning over the filter state.
//!
//! The Hamiltonian is linear in three feature groups built from the
//! particle-averaged Fourier moments `Phi_bar_j = mean_i Phi(theta_j^i)`:
//!
//! 1. `Phi_bar_j` for every joint,
//! 2. `u_j Phi_bar_j` and `u_{j+1} Phi_bar_j` for every joint,
//! 3. `u_k^2 / 2` for every link.
//!
//! Group 2 is laid out joint by joint as `[a_j (M_F), b_{j+1} (M_F)]`, so the
//! minimizing control of link `k` only sees joints `k-1` and `k`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;

use crate::basis::{ensemble_average, Fourier};
use crate::dynamics::ControlInput;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Minimum admissible quadratic weight for policy extraction.
pub const W3_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    pub n: usize,
    pub phi: Vec<Fourier>,
}

impl FeatureConfig {
    pub fn new(n: usize, phi: Vec<Fourier>) -> Self {
        assert!(n >= 2, "need at least two links");
        assert!(!phi.is_empty(), "empty feature basis");
        Self { n, phi }
    }

    /// `Phi = (cos, sin, cos 2, sin 2)`.
    pub fn default_phi() -> Vec<Fourier> {
        vec![Fourier::Cos(1), Fourier::Sin(1), Fourier::Cos(2), Fourier::Sin(2)]
    }

    pub fn m_f(&self) -> usize {
        self.phi.len()
    }

    pub fn joints(&self) -> usize {
        self.n - 1
    }

    pub fn group1_len(&self) -> usize {
        self.joints() * self.m_f()
    }

    pub fn group2_len(&self) -> usize {
        2 * self.joints() * self.m_f()
    }

    /// Total feature count `M`.
    pub fn len(&self) -> usize {
        self.group1_len() + self.group2_len() + self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn a_index(&self, joint: usize, m: usize) -> usize {
        2 * joint * self.m_f() + m
    }

    fn b_index(&self, joint: usize, m: usize) -> usize {
        (2 * joint + 1) * self.m_f() + m
    }
}

/// Particle-averaged basis values per joint, `moments[j][m] = mean_i Phi_m(theta_j^i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMoments(pub Vec<Vec<f64>>);

impl PhaseMoments {
    pub fn from_ensembles<S: AsRef<[f64]>>(thetas: &[S], cfg: &FeatureConfig) -> Self {
        assert_eq!(thetas.len(), cfg.joints(), "one ensemble per joint");
        Self(thetas.iter().map(|t| ensemble_average(&cfg.phi, t.as_ref())).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QWeights {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// Coefficients of `u_k^2 / 2`.
    pub w3: Vec<f64>,
}

impl QWeights {
    pub fn zeros(cfg: &FeatureConfig) -> Self {
        Self {
            w1: vec![0.0; cfg.group1_len()],
            w2: vec![0.0; cfg.group2_len()],
            w3: vec![0.0; cfg.n],
        }
    }

    /// `w3 ~ Unif(w3_range)`, everything else `~ Unif([-spread, spread])`.
    pub fn random(cfg: &FeatureConfig, w3_range: (f64, f64), spread: f64, rng: &mut Stream) -> Self {
        let mut uni = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
        let w1 = (0..cfg.group1_len()).map(|_| uni(-spread, spread)).collect();
        let w2 = (0..cfg.group2_len()).map(|_| uni(-spread, spread)).collect();
        let w3 = (0..cfg.n).map(|_| uni(w3_range.0, w3_range.1)).collect();
        Self { w1, w2, w3 }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.w1.len() + self.w2.len() + self.w3.len(),
            self.w1.iter().chain(&self.w2).chain(&self.w3).copied(),
        )
    }

    pub fn from_vector(v: &DVector<f64>, cfg: &FeatureConfig) -> Self {
        assert_eq!(v.len(), cfg.len());
        let g1 = cfg.group1_len();
        let g2 = cfg.group2_len();
        Self {
            w1: v.as_slice()[..g1].to_vec(),
            w2: v.as_slice()[g1..g1 + g2].to_vec(),
            w3: v.as_slice()[g1 + g2..].to_vec(),
        }
    }

    /// Checkpoint lines `group,index,value`.
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        for (group, vals) in [("w1", &self.w1), ("w2", &self.w2), ("w3", &self.w3)] {
            for (i, v) in vals.iter().enumerate() {
                writeln!(s, "{group},{i},{v}").unwrap();
            }
        }
        s
    }

    /// Parses the `w1`/`w2`/`w3` lines of a checkpoint; other groups are ignored.
    pub fn from_checkpoint(text: &str, cfg: &FeatureConfig) -> Result<Self> {
        let mut w = QWeights::zeros(cfg);
        let mut seen = [vec![false; w.w1.len()], vec![false; w.w2.len()], vec![false; w.w3.len()]];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("checkpoint line needs 3 fields: {line}")));
            }
            let (slot, target) = match cols[0] {
                "w1" => (0, &mut w.w1),
                "w2" => (1, &mut w.w2),
                "w3" => (2, &mut w.w3),
                _ => continue,
            };
            let i: usize = cols[1].parse().map_err(|_| Error::Parse(format!("bad index in {line}")))?;
            let v: f64 = cols[2].parse().map_err(|_| Error::Parse(format!("bad value in {line}")))?;
            if i >= target.len() {
                return Err(Error::Parse(format!("index {i} out of range for {}", cols[0])));
            }
            target[i] = v;
            seen[slot][i] = true;
        }
        if seen.iter().flatten().any(|s| !s) {
            return Err(Error::Parse("checkpoint is missing weights for this feature layout".into()));
        }
        Ok(w)
    }
}

pub fn features_from_moments(moments: &PhaseMoments, u: &ControlInput, cfg: &FeatureConfig) -> DVector<f64> {
    let mf = cfg.m_f();
    let mut out = DVector::zeros(cfg.len());
    let g1 = cfg.group1_len();
    let g2 = cfg.group2_len();
    for (j, mom) in moments.0.iter().enumerate() {
        for m in 0..mf {
            out[j * mf + m] = mom[m];
            out[g1 + cfg.a_index(j, m)] = u.u[j] * mom[m];
            out[g1 + cfg.b_index(j, m)] = u.u[j + 1] * mom[m];
        }
    }
    for k in 0..cfg.n {
        out[g1 + g2 + k] = 0.5 * u.u[k] * u.u[k];
    }
    out
}

/// Particle-averaged feature vector `mean_i phi(theta^i, u)`.
pub fn features<S: AsRef<[f64]>>(thetas: &[S], u: &ControlInput, cfg: &FeatureConfig) -> DVector<f64> {
    features_from_moments(&PhaseMoments::from_ensembles(thetas, cfg), u, cfg)
}

pub fn hamiltonian_from_moments(moments: &PhaseMoments, u: &ControlInput, w: &QWeights, cfg: &FeatureConfig) -> f64 {
    w.to_vector().dot(&features_from_moments(moments, u, cfg))
}

pub fn hamiltonian<S: AsRef<[f64]>>(thetas: &[S], u: &ControlInput, w: &QWeights, cfg: &FeatureConfig) -> f64 {
    hamiltonian_from_moments(&PhaseMoments::from_ensembles(thetas, cfg), u, w, cfg)
}

/// Linear coefficient of `u_k` in the Hamiltonian.
fn linear_coefficients(moments: &PhaseMoments, w: &QWeights, cfg: &FeatureConfig) -> Vec<f64> {
    let mf = cfg.m_f();
    let mut c = vec![0.0; cfg.n];
    for (j, mom) in moments.0.iter().enumerate() {
        for (m, v) in mom.iter().enumerate().take(mf) {
            c[j] += w.w2[cfg.a_index(j, m)] * v;
            c[j + 1] += w.w2[cfg.b_index(j, m)] * v;
        }
    }
    c
}

/// Closed-form minimizer `u*_k = -c_k / w3_k` and the minimum value.
pub fn minimize_from_moments(moments: &PhaseMoments, w: &QWeights, cfg: &FeatureConfig) -> Result<(ControlInput, f64)> {
    if let Some((index, &value)) = w.w3.iter().enumerate().find(|(_, &v)| !(v > W3_TOL)) {
        return Err(Error::NonConvexHamiltonian { index, value });
    }
    let c = linear_coefficients(moments, w, cfg);
    let u = ControlInput::from_vec(c.iter().zip(&w.w3).map(|(ck, wk)| -ck / wk).collect());
    let h = hamiltonian_from_moments(moments, &u, w, cfg);
    Ok((u, h))
}

pub fn minimize_hamiltonian<S: AsRef<[f64]>>(thetas: &[S], w: &QWeights, cfg: &FeatureConfig) -> Result<(ControlInput, f64)> {
    minimize_from_moments(&PhaseMoments::from_ensembles(thetas, cfg), w, cfg)
}

/// Point-wise Bellman error with a forward-difference generator.
pub fn bellman_error(h_min_next: f64, h_min_now: f64, cost_now: f64, h_now: f64, gamma: f64, dt: f64) -> f64 {
    assert!(dt > 0.0);
    (h_min_next - h_min_now) / dt + gamma * (cost_now - h_now)
}

/// Semi-gradient of the Bellman error in `w`; the minimum is differentiated
/// through its features at the current minimizers (envelope theorem).
pub fn bellman_gradient(
    phi_star_next: &DVector<f64>,
    phi_star_now: &DVector<f64>,
    phi_now: &DVector<f64>,
    gamma: f64,
    dt: f64,
) -> DVector<f64> {
    (phi_star_next - phi_star_now) / dt - phi_now * gamma
}

/// `w - dt alpha E grad`.
pub fn update_q_weights(w: &QWeights, error: f64, grad: &DVector<f64>, alpha: f64, dt: f64, cfg: &FeatureConfig) -> QWeights {
    assert!(alpha >= 0.0);
    let v = w.to_vector() - grad * (dt * alpha * error);
    QWeights::from_vector(&v, cfg)
}

/// Quasi-periodic probing input on every link.
pub fn exploration_input(t: f64, amplitude: f64, omega0: f64, n: usize) -> ControlInput {
    ControlInput::from_vec(
        (1..=n)
            .map(|j| {
                let shift = j as f64 * PI / 5.0;
                amplitude * (SQRT_2 * omega0 * t + shift).sin() + amplitude * (PI * omega0 * t + shift).sin()
            })
            .collect(),
    )
}

/// Turning rate plus control penalty.
pub fn stage_cost(psi_next: f64, psi_now: f64, u: &ControlInput, epsilon: f64, dt: f64) -> f64 {
    assert!(dt > 0.0);
    (psi_next - psi_now) / dt + u.squared_norm() / (2.0 * epsilon)
}

/// Clamps each component to `[-limit, limit]`; reports whether any moved.
pub fn clamp_control(u: &ControlInput, limit: f64) -> (ControlInput, bool) {
    let clamped = u.u.map(|v| v.clamp(-limit, limit));
    let moved = clamped != u.u;
    (ControlInput { u: clamped }, moved)
}
