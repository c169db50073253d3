//! Per-joint feedback particle filters on the circle.
//!
//! Each joint runs its own ensemble of phase oscillators with heterogeneous
//! frequencies. Particles are corrected by a gain `K(theta)` that solves the
//! weighted Poisson equation in a finite Fourier basis (Galerkin).

use std::f64::consts::TAU;
use std::fmt::Write as _;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::basis::Fourier;
use crate::error::{Error, Result};
use crate::phase::wrap_angle;
use crate::rng::Stream;
use crate::sensor::h_approx;

/// Galerkin normal matrices above this condition number get a ridge.
pub const GAIN_MAX_COND: f64 = 1e10;
pub const GAIN_RIDGE: f64 = 1e-8;

pub fn default_gain_basis() -> Vec<Fourier> {
    vec![Fourier::Sin(1), Fourier::Cos(1), Fourier::Sin(2), Fourier::Cos(2)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    /// Phases, always wrapped to `[0, 2 pi)`.
    pub theta: Vec<f64>,
    /// Natural frequencies, fixed once drawn.
    pub omega: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Phases i.i.d. uniform on `[0, 2 pi)`, frequencies uniform on
/// `[omega0 - delta, omega0 + delta]`.
pub fn init_particles(n: usize, delta: f64, omega0: f64, rng: &mut Stream) -> ParticleEnsemble {
    assert!(n >= 2, "need at least two particles");
    assert!((0.0..omega0).contains(&delta), "need 0 <= delta < omega0");
    let theta = (0..n).map(|_| wrap_angle(rng.random::<f64>() * TAU)).collect();
    let omega = (0..n)
        .map(|_| {
            if delta == 0.0 {
                omega0
            } else {
                omega0 - delta + 2.0 * delta * rng.random::<f64>()
            }
        })
        .collect();
    ParticleEnsemble { theta, omega }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainSolution {
    pub kappa: DVector<f64>,
    pub basis: Vec<Fourier>,
    /// Condition number of the Galerkin normal matrix.
    pub cond: f64,
    pub regularized: bool,
}

impl GainSolution {
    /// `K(theta) = sum_l kappa_l psi_l'(theta)`.
    pub fn eval(&self, theta: f64) -> f64 {
        self.kappa.iter().zip(&self.basis).map(|(k, f)| k * f.derivative(theta)).sum()
    }

    pub fn zero(basis: &[Fourier]) -> Self {
        Self {
            kappa: DVector::zeros(basis.len()),
            basis: basis.to_vec(),
            cond: 1.0,
            regularized: false,
        }
    }
}

/// Particle mean of `h(theta; r)`.
pub fn h_hat(thetas: &[f64], r: &[f64], h_basis: &[Fourier]) -> f64 {
    thetas.iter().map(|&th| h_approx(th, r, h_basis)).sum::<f64>() / thetas.len() as f64
}

/// Solves `A kappa = b` with `A_lm = mean(psi_l' psi_m')` and
/// `b_l = mean((h - h_hat) psi_l)` over the ensemble.
pub fn galerkin_gain(thetas: &[f64], r: &[f64], h_basis: &[Fourier], gain_basis: &[Fourier]) -> Result<GainSolution> {
    let mg = gain_basis.len();
    if thetas.len() <= mg {
        return Err(Error::InvalidParams(format!(
            "Galerkin gain needs more particles ({}) than basis functions ({mg})",
            thetas.len()
        )));
    }
    let hat = h_hat(thetas, r, h_basis);
    let mut a = DMatrix::<f64>::zeros(mg, mg);
    let mut b = DVector::<f64>::zeros(mg);
    let mut dpsi = vec![0.0; mg];
    for &th in thetas {
        let innov = h_approx(th, r, h_basis) - hat;
        for (l, f) in gain_basis.iter().enumerate() {
            dpsi[l] = f.derivative(th);
            b[l] += innov * f.eval(th);
        }
        for l in 0..mg {
            for m in l..mg {
                a[(l, m)] += dpsi[l] * dpsi[m];
            }
        }
    }
    let inv_n = 1.0 / thetas.len() as f64;
    for l in 0..mg {
        for m in l..mg {
            a[(l, m)] *= inv_n;
            a[(m, l)] = a[(l, m)];
        }
    }
    b *= inv_n;

    let eig = a.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |acc, &v| acc.min(v.abs()));
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    let regularized = !(cond <= GAIN_MAX_COND);
    if regularized {
        debug!("ill-conditioned Galerkin system (cond {cond:.3e}); applying ridge {GAIN_RIDGE:e}");
        for l in 0..mg {
            a[(l, l)] += GAIN_RIDGE;
        }
    }
    let kappa = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::InvalidParams("Galerkin system is singular".into()))?,
    };
    Ok(GainSolution {
        kappa,
        basis: gain_basis.to_vec(),
        cond,
        regularized,
    })
}

/// Diagnostics of one filter update.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterStep {
    pub h_hat: f64,
    pub gain: GainSolution,
}

/// One update of a joint's ensemble:
/// `theta <- wrap(theta + omega dt + K(theta)/sigma^2 (dZ - (h(theta) + h_hat)/2 dt))`.
pub fn fpf_step(
    ensemble: &ParticleEnsemble,
    dz: f64,
    r: &[f64],
    dt: f64,
    sigma_w: f64,
    h_basis: &[Fourier],
    gain_basis: &[Fourier],
) -> Result<(ParticleEnsemble, FilterStep)> {
    assert!(dt > 0.0, "filter step must be positive");
    let hat = h_hat(&ensemble.theta, r, h_basis);
    let gain = galerkin_gain(&ensemble.theta, r, h_basis, gain_basis)?;
    let inv_var = 1.0 / (sigma_w * sigma_w);
    let theta = ensemble
        .theta
        .iter()
        .zip(&ensemble.omega)
        .map(|(&th, &om)| {
            let h = h_approx(th, r, h_basis);
            let innovation = dz - 0.5 * (h + hat) * dt;
            wrap_angle(th + om * dt + gain.eval(th) * inv_var * innovation)
        })
        .collect();
    Ok((
        ParticleEnsemble {
            theta,
            omega: ensemble.omega.clone(),
        },
        FilterStep { h_hat: hat, gain },
    ))
}

/// Particle approximation of a conditional expectation.
pub fn posterior_mean<F: Fn(f64) -> f64>(thetas: &[f64], f: F) -> f64 {
    thetas.iter().map(|&th| f(th)).sum::<f64>() / thetas.len() as f64
}

/// `(modulus, argument)` of the mean of `exp(i theta)`; the argument is in `[0, 2 pi)`.
pub fn circular_mean(thetas: &[f64]) -> (f64, f64) {
    let c = posterior_mean(thetas, f64::cos);
    let s = posterior_mean(thetas, f64::sin);
    (c.hypot(s), wrap_angle(s.atan2(c)))
}

pub const PARTICLE_SNAPSHOT_HEADER: &str = "t,j,i,theta,omega";
pub const GAIN_LOG_HEADER: &str = "t,j,cond_a,kappa_norm";

pub fn particle_rows(t: f64, joint: usize, ens: &ParticleEnsemble) -> String {
    let mut s = String::new();
    for (i, (th, om)) in ens.theta.iter().zip(&ens.omega).enumerate() {
        writeln!(s, "{t},{},{},{th},{om}", joint + 1, i + 1).unwrap();
    }
    s
}

pub fn gain_row(t: f64, joint: usize, gain: &GainSolution) -> String {
    format!("{t},{},{},{}", joint + 1, gain.cond, gain.kappa.norm())
}
