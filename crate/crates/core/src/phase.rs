//! Nominal gait as a limit cycle per joint, parametrized by phase.
//!
//! Phase zero is the upward zero crossing of `x_1`; all joints share that
//! time origin, so on the cycle every joint has the same phase
//! `theta = omega0 (t - time_origin) mod 2 pi`. Off the cycle, phase is the
//! nearest tabulated point in the `(x, xdot / omega0)` plane.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::DVector;

use crate::dynamics::{Chain, ControlInput, RobotParams, RobotState};
use crate::error::{Error, Result};

/// Largest integration step used while extracting the cycle.
pub const MAX_STEP: f64 = 0.02;
/// Orbit-closure tolerance for accepting a limit cycle.
pub const CLOSURE_TOLERANCE: f64 = 1e-2;

pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed angular difference `a - b` mapped to `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitCycleAtlas {
    /// `x[j][k]` at phase `theta_k = 2 pi k / K`.
    x: Vec<Vec<f64>>,
    xdot: Vec<Vec<f64>>,
    pub period: f64,
    pub omega0: f64,
    /// Simulation time (mod period) at which phase is zero.
    pub time_origin: f64,
    /// Closure residual measured while extracting the cycle.
    pub residual: f64,
}

impl LimitCycleAtlas {
    pub fn from_tables(x: Vec<Vec<f64>>, xdot: Vec<Vec<f64>>, omega0: f64, time_origin: f64) -> Result<Self> {
        if x.is_empty() || x.len() != xdot.len() {
            return Err(Error::Parse("atlas needs matching x/xdot tables for at least one joint".into()));
        }
        let k = x[0].len();
        if k < 8 || x.iter().chain(&xdot).any(|t| t.len() != k) {
            return Err(Error::Parse(format!("atlas tables must share a length of at least 8, got {k}")));
        }
        if !(omega0 > 0.0) {
            return Err(Error::Parse("omega0 must be positive".into()));
        }
        Ok(Self {
            x,
            xdot,
            period: TAU / omega0,
            omega0,
            time_origin,
            residual: 0.0,
        })
    }

    pub fn joints(&self) -> usize {
        self.x.len()
    }

    pub fn samples(&self) -> usize {
        self.x[0].len()
    }

    pub fn theta(&self, k: usize) -> f64 {
        TAU * k as f64 / self.samples() as f64
    }

    pub fn knot(&self, joint: usize, k: usize) -> (f64, f64) {
        (self.x[joint][k], self.xdot[joint][k])
    }

    /// `(x_j, xdot_j)` at phase `theta` by periodic linear interpolation.
    pub fn point_of(&self, theta: f64, joint: usize) -> (f64, f64) {
        let kk = self.samples();
        let s = wrap_angle(theta) / TAU * kk as f64;
        let k0 = (s.floor() as usize).min(kk - 1);
        let frac = s - k0 as f64;
        let k1 = (k0 + 1) % kk;
        let lerp = |t: &[f64]| t[k0] + frac * (t[k1] - t[k0]);
        (lerp(&self.x[joint]), lerp(&self.xdot[joint]))
    }

    /// Nearest-point phase in the scaled plane `(x, xdot / omega0)`, projected
    /// onto the closest segment of the tabulated polygon.
    pub fn phase_of(&self, point: (f64, f64), joint: usize) -> f64 {
        let kk = self.samples();
        let w = 1.0 / self.omega0;
        let xs = &self.x[joint];
        let vs = &self.xdot[joint];
        let (px, pv) = (point.0, point.1 * w);
        let mut best_s = 0.0;
        let mut best_d = f64::INFINITY;
        for a in 0..kk {
            let b = (a + 1) % kk;
            let (ax, av) = (xs[a], vs[a] * w);
            let ex = xs[b] - ax;
            let ev = vs[b] * w - av;
            let len2 = ex * ex + ev * ev;
            let lam = if len2 > 0.0 {
                (((px - ax) * ex + (pv - av) * ev) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let dx = ax + lam * ex - px;
            let dv = av + lam * ev - pv;
            let d = dx * dx + dv * dv;
            if d < best_d {
                best_d = d;
                best_s = a as f64 + lam;
            }
        }
        wrap_angle(TAU * best_s / kk as f64)
    }

    /// Shape coordinates of all joints at a common phase.
    pub fn shape_at(&self, theta: f64) -> (DVector<f64>, DVector<f64>) {
        let m = self.joints();
        let mut x = DVector::zeros(m);
        let mut xdot = DVector::zeros(m);
        for j in 0..m {
            let (a, b) = self.point_of(theta, j);
            x[j] = a;
            xdot[j] = b;
        }
        (x, xdot)
    }

    /// Simulation time in `[0, period)` at which the gait is at `theta`.
    pub fn time_at(&self, theta: f64) -> f64 {
        (self.time_origin + wrap_angle(theta) / self.omega0).rem_euclid(self.period)
    }

    /// On-cycle phase at simulation time `t`.
    pub fn phase_at_time(&self, t: f64) -> f64 {
        wrap_angle(self.omega0 * (t - self.time_origin))
    }

    pub fn to_joint_csv(&self, joint: usize) -> String {
        let mut out = String::new();
        writeln!(out, "# period={}", self.period).unwrap();
        writeln!(out, "# omega0={}", self.omega0).unwrap();
        writeln!(out, "# K={}", self.samples()).unwrap();
        writeln!(out, "# time_origin={}", self.time_origin).unwrap();
        writeln!(out, "# joint={}", joint + 1).unwrap();
        out.push_str("theta,x,xdot\n");
        for k in 0..self.samples() {
            writeln!(out, "{},{},{}", self.theta(k), self.x[joint][k], self.xdot[joint][k]).unwrap();
        }
        out
    }

    /// Parses one CSV per joint, in joint order.
    pub fn from_joint_csvs<S: AsRef<str>>(files: &[S]) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        let mut omega0 = None;
        let mut origin = None;
        for text in files {
            let mut x = Vec::new();
            let mut v = Vec::new();
            let mut declared_k = None;
            for line in text.as_ref().lines() {
                let line = line.trim();
                if line.is_empty() || line == "theta,x,xdot" {
                    continue;
                }
                if let Some(meta) = line.strip_prefix('#') {
                    if let Some((key, val)) = meta.trim().split_once('=') {
                        let val = val.trim();
                        match key.trim() {
                            "omega0" => omega0 = Some(parse_f64(val)?),
                            "time_origin" => origin = Some(parse_f64(val)?),
                            "K" => declared_k = Some(val.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?),
                            _ => {}
                        }
                    }
                    continue;
                }
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 3 {
                    return Err(Error::Parse(format!("atlas row needs 3 columns: {line}")));
                }
                x.push(parse_f64(cols[1])?);
                v.push(parse_f64(cols[2])?);
            }
            if let Some(k) = declared_k {
                if k != x.len() {
                    return Err(Error::Parse(format!("header declares K={k}, found {} rows", x.len())));
                }
            }
            xs.push(x);
            vs.push(v);
        }
        let omega0 = omega0.ok_or_else(|| Error::Parse("missing omega0 metadata".into()))?;
        LimitCycleAtlas::from_tables(xs, vs, omega0, origin.unwrap_or(0.0))
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

fn closure_residual(a: &RobotState, b: &RobotState) -> f64 {
    let dx = a.shape() - b.shape();
    let dv = a.shape_velocity() - b.shape_velocity();
    (dx.norm_squared() + dv.norm_squared()).sqrt()
}

/// Settles the open-loop gait from a straight chain at rest, then tabulates
/// one period at `samples_per_period` uniform phases.
pub fn find_limit_cycle(params: &RobotParams, settle_periods: usize, samples_per_period: usize) -> Result<LimitCycleAtlas> {
    assert!(settle_periods >= 1, "need at least one settling period");
    assert!(samples_per_period >= 8, "need at least 8 samples per period");
    let chain = Chain::new(params.clone())?;
    let u = ControlInput::zeros(params.n);
    let kk = samples_per_period;
    let period = params.period();
    let substeps = ((period / kk as f64) / MAX_STEP).ceil() as usize;
    let h = period / (kk * substeps) as f64;

    let mut state = RobotState::at_rest(params.n, 0.0);
    for _ in 0..settle_periods * kk * substeps {
        state = chain.step(&state, &u, h)?;
    }

    // One more period, knot by knot, to measure closure and locate the crossing.
    let window_start = state.clone();
    let mut knots = Vec::with_capacity(kk + 1);
    knots.push(state.clone());
    for _ in 0..kk {
        for _ in 0..substeps {
            state = chain.step(&state, &u, h)?;
        }
        knots.push(state.clone());
    }
    let residual = closure_residual(&state, &window_start);
    if !(residual <= CLOSURE_TOLERANCE) {
        return Err(Error::NoLimitCycle {
            residual,
            tolerance: CLOSURE_TOLERANCE,
        });
    }

    let origin = match (0..kk).find(|&k| knots[k].q[0] - knots[k].q[1] <= 0.0 && knots[k + 1].q[0] - knots[k + 1].q[1] > 0.0) {
        Some(k) => locate_crossing(&chain, &knots[k], h, substeps, &u)?,
        // Rest point or a gait whose first joint never changes sign.
        None => window_start,
    };

    let m = params.n - 1;
    let mut x = vec![vec![0.0; kk]; m];
    let mut xdot = vec![vec![0.0; kk]; m];
    let mut s = origin.clone();
    for k in 0..kk {
        let sx = s.shape();
        let sv = s.shape_velocity();
        for j in 0..m {
            x[j][k] = sx[j];
            xdot[j][k] = sv[j];
        }
        for _ in 0..substeps {
            s = chain.step(&s, &u, h)?;
        }
    }
    let mut atlas = LimitCycleAtlas::from_tables(x, xdot, params.omega0, origin.t.rem_euclid(period))?;
    atlas.residual = residual;
    Ok(atlas)
}

/// Refines the upward zero crossing of `x_1` after `from`, returning the
/// state exactly at the crossing.
fn locate_crossing(chain: &Chain, from: &RobotState, h: f64, substeps: usize, u: &ControlInput) -> Result<RobotState> {
    let x1 = |s: &RobotState| s.q[0] - s.q[1];
    let mut s = from.clone();
    for _ in 0..substeps {
        let next = chain.step(&s, u, h)?;
        if x1(&next) > 0.0 {
            if x1(&s) == 0.0 {
                return Ok(s);
            }
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let trial = chain.step(&s, u, mid)?;
                if x1(&trial) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            return chain.step(&s, u, hi);
        }
        s = next;
    }
    Ok(s)
}
