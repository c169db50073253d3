use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One Fourier function of an angle: `sin(k theta)` or `cos(k theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Fourier {
    Sin(u32),
    Cos(u32),
}

impl Fourier {
    #[inline]
    pub fn eval(self, theta: f64) -> f64 {
        match self {
            Fourier::Sin(k) => (k as f64 * theta).sin(),
            Fourier::Cos(k) => (k as f64 * theta).cos(),
        }
    }

    #[inline]
    pub fn derivative(self, theta: f64) -> f64 {
        match self {
            Fourier::Sin(k) => k as f64 * (k as f64 * theta).cos(),
            Fourier::Cos(k) => -(k as f64) * (k as f64 * theta).sin(),
        }
    }
}

impl fmt::Display for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fourier::Sin(k) => write!(f, "sin{k}"),
            Fourier::Cos(k) => write!(f, "cos{k}"),
        }
    }
}

impl FromStr for Fourier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let (ctor, rest): (fn(u32) -> Fourier, &str) = if let Some(r) = s.strip_prefix("sin") {
            (Fourier::Sin, r)
        } else if let Some(r) = s.strip_prefix("cos") {
            (Fourier::Cos, r)
        } else {
            return Err(Error::Parse(format!("unknown basis function {s:?}")));
        };
        let k: u32 = rest
            .parse()
            .map_err(|_| Error::Parse(format!("bad harmonic in basis function {s:?}")))?;
        if k == 0 {
            return Err(Error::Parse(format!("harmonic must be at least 1 in {s:?}")));
        }
        Ok(ctor(k))
    }
}

impl TryFrom<String> for Fourier {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Fourier> for String {
    fn from(f: Fourier) -> String {
        f.to_string()
    }
}

/// Evaluates every basis function at `theta` into `out`.
pub fn eval_into(basis: &[Fourier], theta: f64, out: &mut [f64]) {
    for (o, f) in out.iter_mut().zip(basis) {
        *o = f.eval(theta);
    }
}

/// Particle average of each basis function.
pub fn ensemble_average(basis: &[Fourier], thetas: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; basis.len()];
    for &th in thetas {
        for (a, f) in acc.iter_mut().zip(basis) {
            *a += f.eval(th);
        }
    }
    let n = thetas.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
