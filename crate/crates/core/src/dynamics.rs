//! Planar n-link chain on a frictional surface.
//!
//! The configuration is split into the shape `x = D q` (relative joint
//! angles) and the group `(psi, r_cm)`. The shape obeys a second-order ODE
//! driven by joint torques, springs, joint damping and ground friction; the
//! group follows from the quasi-static force/torque balance (group inertia
//! neglected), so the integrated state is `(x, xdot, psi, r_cm)`.
//!
//! Link `j` has centre `p_j`, tangent `t_j = (cos q_j, sin q_j)` and normal
//! `n_j = (-sin q_j, cos q_j)`; adjacent centres satisfy
//! `p_j - p_{j+1} = l_j t_j + l_{j+1} t_{j+1}`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition-number ceiling for the 3x3 group friction block.
pub const FRICTION_BLOCK_MAX_COND: f64 = 1e12;

/// Physical and actuation constants of the chain, SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    pub n: usize,
    /// Link masses [kg].
    pub mass: Vec<f64>,
    /// Link half-lengths [m].
    pub half_length: Vec<f64>,
    /// Link moments of inertia about the centre of mass [kg m^2].
    pub inertia: Vec<f64>,
    /// Tangential friction coefficients [1/s].
    pub c_t: Vec<f64>,
    /// Nominal normal friction coefficients [1/s].
    pub c_n_bar: Vec<f64>,
    /// Joint torsional springs [N m/rad], length n-1.
    pub kappa: Vec<f64>,
    /// Joint viscous friction [N m s/rad], length n-1.
    pub zeta: Vec<f64>,
    /// Torque amplitudes [N m], length n-1.
    pub tau0: Vec<f64>,
    /// Torque phases [rad], length n-1.
    pub beta: Vec<f64>,
    /// Drive frequency [rad/s].
    pub omega0: f64,
}

impl RobotParams {
    /// The five-link reference robot with travelling-wave torque phasing.
    pub fn table_ii() -> Self {
        let n = 5;
        Self {
            n,
            mass: vec![1.0; n],
            half_length: vec![1.0; n],
            inertia: vec![1.0 / 3.0; n],
            c_t: vec![0.1; n],
            c_n_bar: vec![0.5; n],
            kappa: vec![3.0; n - 1],
            zeta: vec![0.1; n - 1],
            tau0: vec![2.0, 1.1, 1.0, 2.0],
            beta: travelling_wave_phases(n),
            omega0: 1.0,
        }
    }

    /// Uniform chain of `n` links with the reference per-link constants and
    /// unit torque amplitude at every joint.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 2, "a chain needs at least two links");
        Self {
            n,
            mass: vec![1.0; n],
            half_length: vec![1.0; n],
            inertia: vec![1.0 / 3.0; n],
            c_t: vec![0.1; n],
            c_n_bar: vec![0.5; n],
            kappa: vec![3.0; n - 1],
            zeta: vec![0.1; n - 1],
            tau0: vec![1.0; n - 1],
            beta: travelling_wave_phases(n),
            omega0: 1.0,
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega0
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Structural checks: lengths, positive masses/lengths/inertias, finite
    /// nonnegative friction. Frictionless chains pass.
    pub fn check_structure(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(Error::InvalidParams(format!("n = {n}, need at least 2 links")));
        }
        let per_link = [
            ("mass", &self.mass),
            ("half_length", &self.half_length),
            ("inertia", &self.inertia),
            ("c_t", &self.c_t),
            ("c_n_bar", &self.c_n_bar),
        ];
        for (name, v) in per_link {
            if v.len() != n {
                return Err(Error::InvalidParams(format!("{name} has length {}, expected {n}", v.len())));
            }
        }
        let per_joint = [
            ("kappa", &self.kappa),
            ("zeta", &self.zeta),
            ("tau0", &self.tau0),
            ("beta", &self.beta),
        ];
        for (name, v) in per_joint {
            if v.len() != n - 1 {
                return Err(Error::InvalidParams(format!(
                    "{name} has length {}, expected {}",
                    v.len(),
                    n - 1
                )));
            }
        }
        for (name, v) in [("mass", &self.mass), ("half_length", &self.half_length), ("inertia", &self.inertia)] {
            if let Some(bad) = v.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
                return Err(Error::InvalidParams(format!("{name} entries must be positive, got {bad}")));
            }
        }
        for (name, v) in [("c_t", &self.c_t), ("c_n_bar", &self.c_n_bar), ("zeta", &self.zeta)] {
            if let Some(bad) = v.iter().find(|&&a| !(a >= 0.0 && a.is_finite())) {
                return Err(Error::InvalidParams(format!("{name} entries must be nonnegative, got {bad}")));
            }
        }
        let all_finite = self.kappa.iter().chain(&self.tau0).chain(&self.beta).all(|a| a.is_finite());
        if !all_finite || !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::InvalidParams("non-finite joint constants or non-positive omega0".into()));
        }
        Ok(())
    }

    /// Full validation, including the friction anisotropy `c_n_bar > c_t`.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        for j in 0..self.n {
            if self.c_n_bar[j] <= self.c_t[j] {
                return Err(Error::InvalidParams(format!(
                    "link {}: c_n_bar = {} must exceed c_t = {}",
                    j + 1,
                    self.c_n_bar[j],
                    self.c_t[j]
                )));
            }
        }
        Ok(())
    }
}

/// Default torque phasing `beta_j = (j - 1) 2 pi / n`.
pub fn travelling_wave_phases(n: usize) -> Vec<f64> {
    (0..n - 1).map(|j| j as f64 * 2.0 * PI / n as f64).collect()
}

/// Absolute link angles and rates plus the centre of mass.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub r_cm: Vector2<f64>,
    pub t: f64,
}

impl RobotState {
    /// Straight chain at rest.
    pub fn at_rest(n: usize, psi: f64) -> Self {
        Self {
            q: DVector::from_element(n, psi),
            qdot: DVector::zeros(n),
            r_cm: Vector2::zeros(),
            t: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn shape(&self) -> DVector<f64> {
        DVector::from_fn(self.n() - 1, |j, _| self.q[j] - self.q[j + 1])
    }

    pub fn shape_velocity(&self) -> DVector<f64> {
        DVector::from_fn(self.n() - 1, |j, _| self.qdot[j] - self.qdot[j + 1])
    }

    pub fn orientation(&self) -> f64 {
        self.q.mean()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).chain(self.r_cm.iter()).all(|v| v.is_finite()) && self.t.is_finite()
    }
}

/// Per-link normal-friction modulation `c_n = c_n_bar (1 + u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlInput {
    pub u: DVector<f64>,
}

impl ControlInput {
    pub fn zeros(n: usize) -> Self {
        Self { u: DVector::zeros(n) }
    }

    pub fn from_vec(u: Vec<f64>) -> Self {
        Self { u: DVector::from_vec(u) }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Zero normal friction (`1 + u = 0`) is accepted; negative is not.
    pub fn check(&self) -> Result<()> {
        for (index, &u) in self.u.iter().enumerate() {
            let value = 1.0 + u;
            if !(value >= 0.0) {
                return Err(Error::InvalidControl { index, value });
            }
        }
        Ok(())
    }

    pub fn squared_norm(&self) -> f64 {
        self.u.norm_squared()
    }
}

/// Configuration-dependent damping blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct FrictionMatrices {
    pub r_qq: DMatrix<f64>,
    pub r_qv: DMatrix<f64>,
    pub r_vv: Matrix2<f64>,
}

/// Difference operator `D` ((n-1) x n) and its right inverse `D^+ = D^T (D D^T)^-1`.
pub fn difference_operator(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(n >= 2, "difference operator needs n >= 2");
    let d = DMatrix::from_fn(n - 1, n, |i, j| {
        if j == i {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    });
    let ddt = &d * d.transpose();
    let inv = ddt.cholesky().expect("D D^T is positive definite").inverse();
    let d_plus = d.transpose() * inv;
    (d, d_plus)
}

/// Sum operator `[A x]_j = x_j + x_{j+1}`.
fn sum_operator(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n - 1, n, |i, j| if j == i || j == i + 1 { 1.0 } else { 0.0 })
}

/// `tau_j(t) = tau0_j sin(omega0 t + beta_j)`.
pub fn open_loop_torque(t: f64, params: &RobotParams) -> DVector<f64> {
    DVector::from_fn(params.n - 1, |j, _| params.tau0[j] * (params.omega0 * t + params.beta[j]).sin())
}

pub fn rotation(psi: f64) -> Matrix2<f64> {
    let (s, c) = psi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// The chain model: parameters plus the configuration-independent matrices.
#[derive(Clone, Debug)]
pub struct Chain {
    params: RobotParams,
    d: DMatrix<f64>,
    d_plus: DMatrix<f64>,
    /// `H = L A^T (D M^-1 D^T)^-1 A L`.
    h: DMatrix<f64>,
    /// `B = M^-1 D^T (D M^-1 D^T)^-1 A L`; link centres are `p = r_cm + B t`.
    b: DMatrix<f64>,
    total_mass: f64,
}

/// Integrated variables: shape, shape rate, orientation, centre of mass.
#[derive(Clone, Debug)]
struct Reduced {
    x: DVector<f64>,
    xdot: DVector<f64>,
    psi: f64,
    r: Vector2<f64>,
}

impl Reduced {
    fn pack(&self) -> DVector<f64> {
        let m = self.x.len();
        let mut y = DVector::zeros(2 * m + 3);
        y.rows_mut(0, m).copy_from(&self.x);
        y.rows_mut(m, m).copy_from(&self.xdot);
        y[2 * m] = self.psi;
        y[2 * m + 1] = self.r.x;
        y[2 * m + 2] = self.r.y;
        y
    }

    fn unpack(y: &DVector<f64>) -> Self {
        let m = (y.len() - 3) / 2;
        Self {
            x: y.rows(0, m).into_owned(),
            xdot: y.rows(m, m).into_owned(),
            psi: y[2 * m],
            r: Vector2::new(y[2 * m + 1], y[2 * m + 2]),
        }
    }
}

impl Chain {
    pub fn new(params: RobotParams) -> Result<Self> {
        params.check_structure()?;
        let n = params.n;
        let (d, d_plus) = difference_operator(n);
        let a = sum_operator(n);
        let m_inv = DMatrix::from_diagonal(&DVector::from_iterator(n, params.mass.iter().map(|m| 1.0 / m)));
        let l = DMatrix::from_diagonal(&DVector::from_column_slice(&params.half_length));
        let g = &d * &m_inv * d.transpose();
        let g_inv = g
            .cholesky()
            .ok_or_else(|| Error::InvalidParams("D M^-1 D^T is singular".into()))?
            .inverse();
        let al = &a * &l;
        let h = al.transpose() * &g_inv * &al;
        let b = &m_inv * d.transpose() * &g_inv * &al;
        let total_mass = params.total_mass();
        Ok(Self {
            params,
            d,
            d_plus,
            h,
            b,
            total_mass,
        })
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn d_plus(&self) -> &DMatrix<f64> {
        &self.d_plus
    }

    pub fn h_matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `q = D^+ x + e psi`.
    pub fn angles_from(&self, x: &DVector<f64>, psi: f64) -> DVector<f64> {
        let mut q = &self.d_plus * x;
        q.add_scalar_mut(psi);
        q
    }

    /// `[I(q)]_ij = H_ij cos(q_i - q_j) + J_i delta_ij`.
    pub fn inertia_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { self.params.inertia[i] } else { 0.0 };
            self.h[(i, j)] * (q[i] - q[j]).cos() + diag
        })
    }

    /// `[C(q)]_ij = H_ij sin(q_i - q_j)`, multiplying `qdot^2` elementwise.
    pub fn coriolis_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.h[(i, j)] * (q[i] - q[j]).sin())
    }

    pub fn friction_matrices(&self, q: &DVector<f64>, psi: f64, u: &ControlInput) -> Result<FrictionMatrices> {
        u.check()?;
        let n = self.n();
        let p = &self.params;
        // Per-link weights m_j c_t,j and m_j c_n,j (with modulation).
        let mct = DVector::from_fn(n, |j, _| p.mass[j] * p.c_t[j]);
        let mcn = DVector::from_fn(n, |j, _| p.mass[j] * p.c_n_bar[j] * (1.0 + u.u[j]));
        let bs = DMatrix::from_fn(n, n, |i, j| self.b[(i, j)] * (q[i] - q[j]).sin());
        let bc = DMatrix::from_fn(n, n, |i, j| self.b[(i, j)] * (q[i] - q[j]).cos());
        let c = q.map(|qj| (qj - psi).cos());
        let s = q.map(|qj| (qj - psi).sin());

        let bs_t = bs.transpose();
        let bc_t = bc.transpose();
        let scale_rows = |m: &DMatrix<f64>, w: &DVector<f64>| {
            let mut out = m.clone();
            for (i, mut row) in out.row_iter_mut().enumerate() {
                row *= w[i];
            }
            out
        };
        let wt_bs = scale_rows(&bs, &mct);
        let wn_bc = scale_rows(&bc, &mcn);
        let mut r_qq = &bs_t * &wt_bs + &bc_t * &wn_bc;
        for j in 0..n {
            r_qq[(j, j)] += p.c_n_bar[j] * (1.0 + u.u[j]) * p.inertia[j];
        }

        let wt_c = mct.component_mul(&c);
        let wt_s = mct.component_mul(&s);
        let wn_c = mcn.component_mul(&c);
        let wn_s = mcn.component_mul(&s);
        let r_qv1 = &bs_t * &wt_c - &bc_t * &wn_s;
        let r_qv2 = &bs_t * &wt_s + &bc_t * &wn_c;
        let mut r_qv = DMatrix::zeros(n, 2);
        r_qv.set_column(0, &r_qv1);
        r_qv.set_column(1, &r_qv2);

        let v11 = c.dot(&wt_c) + s.dot(&wn_s);
        let v22 = s.dot(&wt_s) + c.dot(&wn_c);
        let v12 = s.dot(&wt_c) - s.dot(&wn_c);
        let r_vv = Matrix2::new(v11, v12, v12, v22);

        Ok(FrictionMatrices { r_qq, r_qv, r_vv })
    }

    /// Quasi-static group closure: returns `(psi_dot, v)` with `v = R(psi)^T r_cm_dot`
    /// in the body frame.
    fn group_closure(
        &self,
        fm: &FrictionMatrices,
        xdot: &DVector<f64>,
    ) -> Result<(f64, Vector2<f64>)> {
        let n = self.n();
        let e = DVector::from_element(n, 1.0);
        let r_qq_e = &fm.r_qq * &e;
        let e_rqq_e = e.dot(&r_qq_e);
        let rvq_e = fm.r_qv.transpose() * &e;
        let block = Matrix3::new(
            e_rqq_e, rvq_e[0], rvq_e[1], //
            rvq_e[0], fm.r_vv[(0, 0)], fm.r_vv[(0, 1)], //
            rvq_e[1], fm.r_vv[(1, 0)], fm.r_vv[(1, 1)],
        );
        let eig = block.symmetric_eigenvalues();
        let max = eig.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(cond <= FRICTION_BLOCK_MAX_COND) {
            return Err(Error::SingularFrictionBlock { cond });
        }
        let qdot_shape = &self.d_plus * xdot;
        // R_qq is symmetric, so e^T R_qq = (R_qq e)^T.
        let rhs = Vector3::new(
            r_qq_e.dot(&qdot_shape),
            fm.r_qv.column(0).dot(&qdot_shape),
            fm.r_qv.column(1).dot(&qdot_shape),
        );
        let z = block
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularFrictionBlock { cond })?;
        Ok((-z[0], Vector2::new(-z[1], -z[2])))
    }

    /// Group velocity `(psi_dot, r_cm_dot)` in the world frame.
    pub fn group_velocity(
        &self,
        state: &RobotState,
        xdot: &DVector<f64>,
        u: &ControlInput,
    ) -> Result<(f64, Vector2<f64>)> {
        let psi = state.orientation();
        let fm = self.friction_matrices(&state.q, psi, u)?;
        let (psi_dot, v) = self.group_closure(&fm, xdot)?;
        Ok((psi_dot, rotation(psi) * v))
    }

    fn shape_accel_reduced(
        &self,
        x: &DVector<f64>,
        xdot: &DVector<f64>,
        psi: f64,
        tau: &DVector<f64>,
        u: &ControlInput,
    ) -> Result<(DVector<f64>, f64, Vector2<f64>)> {
        let p = &self.params;
        let q = self.angles_from(x, psi);
        let fm = self.friction_matrices(&q, psi, u)?;
        let (psi_dot, v) = self.group_closure(&fm, xdot)?;
        let mut qdot = &self.d_plus * xdot;
        qdot.add_scalar_mut(psi_dot);

        let joint = DVector::from_fn(p.n - 1, |j, _| tau[j] - p.kappa[j] * x[j] - p.zeta[j] * xdot[j]);
        let qdot_sq = qdot.map(|a| a * a);
        let v_dyn = DVector::from_column_slice(v.as_slice());
        let rhs = self.d.transpose() * joint
            - self.coriolis_matrix(&q) * qdot_sq
            - &fm.r_qq * &qdot
            - &fm.r_qv * v_dyn;
        let inertia = self.inertia_matrix(&q);
        let qddot = inertia
            .cholesky()
            .ok_or_else(|| Error::InvalidParams("inertia matrix lost positive definiteness".into()))?
            .solve(&rhs);
        Ok((&self.d * qddot, psi_dot, v))
    }

    /// Shape acceleration `xddot` under torque `tau`; the group rates come
    /// from the quasi-static closure, not from `state.qdot`.
    pub fn shape_acceleration(
        &self,
        state: &RobotState,
        tau: &DVector<f64>,
        u: &ControlInput,
    ) -> Result<DVector<f64>> {
        let (xddot, _, _) =
            self.shape_accel_reduced(&state.shape(), &state.shape_velocity(), state.orientation(), tau, u)?;
        Ok(xddot)
    }

    fn derivative(&self, t: f64, y: &DVector<f64>, u: &ControlInput) -> Result<DVector<f64>> {
        let s = Reduced::unpack(y);
        let tau = open_loop_torque(t, &self.params);
        let (xddot, psi_dot, v) = self.shape_accel_reduced(&s.x, &s.xdot, s.psi, &tau, u)?;
        let r_dot = rotation(s.psi) * v;
        Ok(Reduced {
            x: s.xdot,
            xdot: xddot,
            psi: psi_dot,
            r: r_dot,
        }
        .pack())
    }

    /// Builds a full state from shape coordinates, filling `qdot` from the closure.
    pub fn state_from_shape(
        &self,
        x: &DVector<f64>,
        xdot: &DVector<f64>,
        psi: f64,
        r_cm: Vector2<f64>,
        t: f64,
        u: &ControlInput,
    ) -> Result<RobotState> {
        let q = self.angles_from(x, psi);
        let fm = self.friction_matrices(&q, psi, u)?;
        let (psi_dot, _) = self.group_closure(&fm, xdot)?;
        let mut qdot = &self.d_plus * xdot;
        qdot.add_scalar_mut(psi_dot);
        Ok(RobotState { q, qdot, r_cm, t })
    }

    /// One classical RK4 step of size `dt` with the control held constant.
    pub fn step(&self, state: &RobotState, u: &ControlInput, dt: f64) -> Result<RobotState> {
        assert!(dt > 0.0, "step size must be positive");
        let y0 = Reduced {
            x: state.shape(),
            xdot: state.shape_velocity(),
            psi: state.orientation(),
            r: state.r_cm,
        }
        .pack();
        let t = state.t;
        let k1 = self.derivative(t, &y0, u)?;
        let k2 = self.derivative(t + 0.5 * dt, &(&y0 + &k1 * (0.5 * dt)), u)?;
        let k3 = self.derivative(t + 0.5 * dt, &(&y0 + &k2 * (0.5 * dt)), u)?;
        let k4 = self.derivative(t + dt, &(&y0 + &k3 * dt), u)?;
        let y1 = y0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let t1 = t + dt;
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t1 });
        }
        let s = Reduced::unpack(&y1);
        let next = self
            .state_from_shape(&s.x, &s.xdot, s.psi, s.r, t1, u)
            .map_err(|e| match e {
                Error::SingularFrictionBlock { .. } | Error::InvalidControl { .. } => e,
                _ => Error::NonFinite { t: t1 },
            })?;
        if !next.is_finite() {
            return Err(Error::NonFinite { t: t1 });
        }
        Ok(next)
    }

    /// `(kinetic, potential)` with kinetic `1/2 m |r_cm_dot|^2 + 1/2 qdot^T I qdot`.
    /// The centre-of-mass velocity comes from the closure at `u = 0`.
    pub fn total_energy(&self, state: &RobotState) -> Result<(f64, f64)> {
        let xdot = state.shape_velocity();
        let r_dot = if xdot.iter().all(|&v| v == 0.0) {
            Vector2::zeros()
        } else {
            self.group_velocity(state, &xdot, &ControlInput::zeros(self.n()))?.1
        };
        Ok(self.energy_with_velocity(state, &r_dot))
    }

    /// Energy for an explicitly supplied centre-of-mass velocity.
    pub fn energy_with_velocity(&self, state: &RobotState, r_cm_dot: &Vector2<f64>) -> (f64, f64) {
        let inertia = self.inertia_matrix(&state.q);
        let kinetic = 0.5 * self.total_mass * r_cm_dot.norm_squared() + 0.5 * state.qdot.dot(&(inertia * &state.qdot));
        let x = state.shape();
        let potential = 0.5 * x.iter().zip(&self.params.kappa).map(|(xj, k)| k * xj * xj).sum::<f64>();
        (kinetic, potential)
    }
}

pub fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|j| format!("q{j}")));
    cols.extend((1..=n).map(|j| format!("qdot{j}")));
    cols.extend((1..n).map(|j| format!("x{j}")));
    cols.extend(["psi", "xcm", "ycm"].map(String::from));
    cols.join(",")
}

pub fn trajectory_row(state: &RobotState) -> String {
    let mut cols = vec![state.t.to_string()];
    cols.extend(state.q.iter().map(f64::to_string));
    cols.extend(state.qdot.iter().map(f64::to_string));
    cols.extend(state.shape().iter().map(f64::to_string));
    cols.push(state.orientation().to_string());
    cols.push(state.r_cm.x.to_string());
    cols.push(state.r_cm.y.to_string());
    cols.join(",")
}
