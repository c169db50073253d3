//! Independent reference implementations and oracle comparisons shared by
//! the integration tests.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod oracle;

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3};
use snakelab::dynamics::RobotParams;

fn tangent(q: f64) -> Vector2<f64> {
    Vector2::new(q.cos(), q.sin())
}

fn normal(q: f64) -> Vector2<f64> {
    Vector2::new(-q.sin(), q.cos())
}

/// Coefficients `g[j][k]` with link centre `p_j - r_cm = sum_k g[j][k] t_k`,
/// built by walking the chain from the head:
/// `p_{j+1} = p_j - l_j t_j - l_{j+1} t_{j+1}`.
pub fn walk_coefficients(p: &RobotParams) -> Vec<Vec<f64>> {
    let n = p.n;
    let mut g = vec![vec![0.0; n]; n];
    for j in 0..n - 1 {
        g[j + 1] = g[j].clone();
        g[j + 1][j] -= p.half_length[j];
        g[j + 1][j + 1] -= p.half_length[j + 1];
    }
    let m: f64 = p.mass.iter().sum();
    let mean: Vec<f64> = (0..n).map(|k| (0..n).map(|j| p.mass[j] * g[j][k]).sum::<f64>() / m).collect();
    for row in g.iter_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            *v -= mean[k];
        }
    }
    g
}

/// Link centres relative to the centre of mass.
pub fn link_positions(p: &RobotParams, q: &DVector<f64>) -> Vec<Vector2<f64>> {
    let g = walk_coefficients(p);
    (0..p.n)
        .map(|j| (0..p.n).fold(Vector2::zeros(), |acc, k| acc + tangent(q[k]) * g[j][k]))
        .collect()
}

/// Kinetic energy of the shape motion, link velocities from central
/// differences of the positions.
pub fn shape_kinetic_energy(p: &RobotParams, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
    let h = 1e-6;
    let fwd = link_positions(p, &(q + qdot * h));
    let bwd = link_positions(p, &(q - qdot * h));
    let mut e = 0.0;
    for j in 0..p.n {
        let v = (fwd[j] - bwd[j]) / (2.0 * h);
        e += 0.5 * p.mass[j] * v.norm_squared() + 0.5 * p.inertia[j] * qdot[j] * qdot[j];
    }
    e
}

/// Inertia matrix from the polarization identity on the kinetic energy.
pub fn inertia_from_energy(p: &RobotParams, q: &DVector<f64>) -> DMatrix<f64> {
    let n = p.n;
    DMatrix::from_fn(n, n, |a, b| {
        let mut plus = DVector::zeros(n);
        let mut minus = DVector::zeros(n);
        plus[a] += 1.0;
        plus[b] += 1.0;
        minus[a] += 1.0;
        minus[b] -= 1.0;
        (shape_kinetic_energy(p, q, &plus) - shape_kinetic_energy(p, q, &minus)) / 2.0
    })
}

/// Inertia matrix from the analytic position Jacobians of the chain walk.
pub fn inertia_from_jacobian(p: &RobotParams, q: &DVector<f64>) -> DMatrix<f64> {
    let n = p.n;
    let g = walk_coefficients(p);
    DMatrix::from_fn(n, n, |a, b| {
        let mut s = 0.0;
        for j in 0..n {
            s += p.mass[j] * g[j][a] * g[j][b] * normal(q[a]).dot(&normal(q[b]));
        }
        if a == b {
            s += p.inertia[a];
        }
        s
    })
}

/// Per-link world velocities for angle rates `qdot` and body-frame centre
/// of mass velocity `v`.
pub fn link_velocities(p: &RobotParams, q: &DVector<f64>, psi: f64, qdot: &DVector<f64>, v: &Vector2<f64>) -> Vec<Vector2<f64>> {
    let g = walk_coefficients(p);
    let (s, c) = psi.sin_cos();
    let r_dot = Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y);
    (0..p.n)
        .map(|j| (0..p.n).fold(r_dot, |acc, k| acc + normal(q[k]) * (g[j][k] * qdot[k])))
        .collect()
}

/// Friction forces on every link and friction torques about each link centre.
pub fn friction_forces(
    p: &RobotParams,
    q: &DVector<f64>,
    psi: f64,
    u: &[f64],
    qdot: &DVector<f64>,
    v: &Vector2<f64>,
) -> (Vec<Vector2<f64>>, Vec<f64>) {
    let vel = link_velocities(p, q, psi, qdot, v);
    let mut forces = Vec::with_capacity(p.n);
    let mut torques = Vec::with_capacity(p.n);
    for j in 0..p.n {
        let t = tangent(q[j]);
        let nn = normal(q[j]);
        let cn = p.c_n_bar[j] * (1.0 + u[j]);
        forces.push(-(t * (p.c_t[j] * vel[j].dot(&t)) + nn * (cn * vel[j].dot(&nn))) * p.mass[j]);
        torques.push(-cn * p.inertia[j] * qdot[j]);
    }
    (forces, torques)
}

/// Generalized friction force on `(q, v)`: `Q_q` (length n) and `Q_v` in the
/// body frame.
pub fn generalized_friction(
    p: &RobotParams,
    q: &DVector<f64>,
    psi: f64,
    u: &[f64],
    qdot: &DVector<f64>,
    v: &Vector2<f64>,
) -> (DVector<f64>, Vector2<f64>) {
    let g = walk_coefficients(p);
    let (forces, torques) = friction_forces(p, q, psi, u, qdot, v);
    let qq = DVector::from_fn(p.n, |k, _| {
        torques[k] + (0..p.n).map(|j| forces[j].dot(&(normal(q[k]) * g[j][k]))).sum::<f64>()
    });
    let total = forces.iter().fold(Vector2::zeros(), |a, f| a + f);
    let (s, c) = psi.sin_cos();
    (qq, Vector2::new(c * total.x + s * total.y, -s * total.x + c * total.y))
}

/// Full `(n+2) x (n+2)` damping matrix assembled column by column from the
/// per-link force model.
pub fn damping_matrix(p: &RobotParams, q: &DVector<f64>, psi: f64, u: &[f64]) -> DMatrix<f64> {
    let n = p.n;
    let mut r = DMatrix::zeros(n + 2, n + 2);
    for col in 0..n + 2 {
        let mut qdot = DVector::zeros(n);
        let mut v = Vector2::zeros();
        if col < n {
            qdot[col] = 1.0;
        } else {
            v[col - n] = 1.0;
        }
        let (fq, fv) = generalized_friction(p, q, psi, u, &qdot, &v);
        for i in 0..n {
            r[(i, col)] = -fq[i];
        }
        r[(n, col)] = -fv.x;
        r[(n + 1, col)] = -fv.y;
    }
    r
}

/// Net force and net torque about the centre of mass.
pub fn net_wrench(p: &RobotParams, q: &DVector<f64>, psi: f64, u: &[f64], qdot: &DVector<f64>, v: &Vector2<f64>) -> Vector3<f64> {
    let pos = link_positions(p, q);
    let (forces, torques) = friction_forces(p, q, psi, u, qdot, v);
    let mut w = Vector3::zeros();
    for j in 0..p.n {
        w.x += forces[j].x;
        w.y += forces[j].y;
        w.z += pos[j].x * forces[j].y - pos[j].y * forces[j].x + torques[j];
    }
    w
}

/// Right inverse of the difference operator built from a generic SVD pseudo-inverse.
pub fn shape_right_inverse(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = DMatrix::from_fn(n - 1, n, |i, j| match j as isize - i as isize {
        0 => 1.0,
        1 => -1.0,
        _ => 0.0,
    });
    let pinv = d.clone().pseudo_inverse(1e-14).unwrap();
    (d, pinv)
}

/// Quasi-static group closure: find `(psi_dot, v)` that make the net friction
/// force and torque vanish for the given shape rate.
pub fn quasi_static_closure(p: &RobotParams, q: &DVector<f64>, psi: f64, u: &[f64], xdot: &DVector<f64>) -> (f64, Vector2<f64>) {
    let n = p.n;
    let (_, d_plus) = shape_right_inverse(n);
    let base = &d_plus * xdot;
    let w0 = net_wrench(p, q, psi, u, &base, &Vector2::zeros());
    let mut a = Matrix3::zeros();
    let unit = DVector::from_element(n, 1.0);
    let cols = [
        net_wrench(p, q, psi, u, &(&base + &unit), &Vector2::zeros()) - w0,
        net_wrench(p, q, psi, u, &base, &Vector2::new(1.0, 0.0)) - w0,
        net_wrench(p, q, psi, u, &base, &Vector2::new(0.0, 1.0)) - w0,
    ];
    for (c, col) in cols.iter().enumerate() {
        a.set_column(c, col);
    }
    let z = a.lu().solve(&(-w0)).unwrap();
    (z[0], Vector2::new(z[1], z[2]))
}

/// Velocity-dependent inertial forces `d/dt(I qdot) - 1/2 grad_q (qdot^T I qdot) - I qddot`
/// from finite differences of the Jacobian-built inertia.
pub fn inertial_forces(p: &RobotParams, q: &DVector<f64>, qdot: &DVector<f64>) -> DVector<f64> {
    let h = 1e-5;
    let n = p.n;
    let idot = (inertia_from_jacobian(p, &(q + qdot * h)) - inertia_from_jacobian(p, &(q - qdot * h))) / (2.0 * h);
    let mut out = idot * qdot;
    for k in 0..n {
        let mut e = DVector::zeros(n);
        e[k] = h;
        let ip = inertia_from_jacobian(p, &(q + &e));
        let im = inertia_from_jacobian(p, &(q - &e));
        let dk = (qdot.dot(&(ip * qdot)) - qdot.dot(&(im * qdot))) / (2.0 * h);
        out[k] -= 0.5 * dk;
    }
    out
}

/// Shape acceleration assembled from the per-link model: Lagrange's equations
/// with the quasi-static group closure.
pub fn shape_acceleration(
    p: &RobotParams,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    psi: f64,
    tau: &DVector<f64>,
    u: &[f64],
) -> DVector<f64> {
    let n = p.n;
    let (d, d_plus) = shape_right_inverse(n);
    let mut q = &d_plus * x;
    q.add_scalar_mut(psi);
    let (psi_dot, v) = quasi_static_closure(p, &q, psi, u, xdot);
    let mut qdot = &d_plus * xdot;
    qdot.add_scalar_mut(psi_dot);
    let joint = DVector::from_fn(n - 1, |j, _| tau[j] - p.kappa[j] * x[j] - p.zeta[j] * xdot[j]);
    let (fq, _) = generalized_friction(p, &q, psi, u, &qdot, &v);
    let rhs = d.transpose() * joint + fq - inertial_forces(p, &q, &qdot);
    let qddot = inertia_from_jacobian(p, &q).lu().solve(&rhs).unwrap();
    d * qddot
}

/// Von Mises kernel density of `thetas` on a uniform grid of `m` points.
pub fn kde(thetas: &[f64], m: usize, concentration: f64) -> Vec<f64> {
    let norm = 1.0 / (TAU * bessel_i0(concentration));
    (0..m)
        .map(|k| {
            let g = TAU * k as f64 / m as f64;
            thetas.iter().map(|&t| (concentration * (g - t).cos()).exp()).sum::<f64>() * norm / thetas.len() as f64
        })
        .collect()
}

fn bessel_i0(x: f64) -> f64 {
    // Power series; converges quickly for the moderate arguments used here.
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (x / 2.0) * (x / 2.0) / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Gain solving `-(rho K)' = (h - h_hat) rho` on a periodic grid, with the
/// constant fixed so that `K` integrates to zero (gradient form).
pub fn poisson_gain_on_grid(rho: &[f64], h: &[f64]) -> Vec<f64> {
    let m = rho.len();
    let dx = TAU / m as f64;
    let mass: f64 = rho.iter().sum::<f64>() * dx;
    let h_hat: f64 = rho.iter().zip(h).map(|(r, hv)| r * hv).sum::<f64>() * dx / mass;
    // Cumulative integral at grid points with the midpoint rule on cell edges.
    let mut f = vec![0.0; m];
    for k in 1..m {
        let a = (h[k - 1] - h_hat) * rho[k - 1];
        let b = (h[k] - h_hat) * rho[k];
        f[k] = f[k - 1] + 0.5 * (a + b) * dx;
    }
    let inv: f64 = rho.iter().map(|r| 1.0 / r).sum();
    let c: f64 = f.iter().zip(rho).map(|(fv, r)| fv / r).sum::<f64>() / inv;
    f.iter().zip(rho).map(|(fv, r)| (c - fv) / r).collect()
}

/// Relative `L2(rho)` distance between two grid functions.
pub fn relative_l2(a: &[f64], b: &[f64], rho: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).zip(rho).map(|((x, y), r)| r * (x - y).powi(2)).sum();
    let den: f64 = b.iter().zip(rho).map(|(y, r)| r * y * y).sum();
    (num / den).sqrt()
}

/// Draws from `(1 + a cos(theta - mu)) / 2 pi` by rejection.
pub fn tilted_sample(n: usize, a: f64, mu: f64, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = snakelab::rng::stream(seed, "tilted", 0);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let th = rng.random::<f64>() * TAU;
        if rng.random::<f64>() * (1.0 + a) < 1.0 + a * (th - mu).cos() {
            out.push(th);
        }
    }
    out
}

fn sensor_basis() -> Vec<snakelab::basis::Fourier> {
    use snakelab::basis::Fourier;
    vec![Fourier::Sin(1), Fourier::Sin(2), Fourier::Cos(2)]
}

fn grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| TAU * i as f64 / m as f64).collect()
}

/// Relative L2 error of the Galerkin gain against `cos` for exactly uniform
/// particles observing `sin` with basis `{sin, cos}`.
pub fn analytic_gain_error() -> f64 {
    use snakelab::basis::Fourier;
    let thetas = grid(1000);
    let g = snakelab::fpf::galerkin_gain(&thetas, &[1.0, 0.0, 0.0], &sensor_basis(), &[Fourier::Sin(1), Fourier::Cos(1)])
        .unwrap();
    let k: Vec<f64> = grid(512).iter().map(|&t| g.eval(t)).collect();
    let c: Vec<f64> = grid(512).iter().map(|&t| t.cos()).collect();
    relative_l2(&k, &c, &[1.0; 512])
}

/// Relative L2(rho) errors of the order-4 Galerkin gain against the grid
/// Poisson solve on `count` random tilted ensembles.
pub fn grid_gain_errors(count: u64) -> Vec<f64> {
    use rand::Rng;
    let xs = grid(512);
    let mut rng = snakelab::rng::stream(4, "gain-oracle", 0);
    (0..count)
        .map(|e| {
            let a = 0.3 * rng.random::<f64>();
            let mu = rng.random::<f64>() * TAU;
            let r = [1.0, 0.2 * (rng.random::<f64>() - 0.5), 0.2 * (rng.random::<f64>() - 0.5)];
            let thetas = tilted_sample(20_000, a, mu, e);
            let g = snakelab::fpf::galerkin_gain(&thetas, &r, &sensor_basis(), &snakelab::fpf::default_gain_basis())
                .unwrap();
            let rho = kde(&thetas, 512, 20.0);
            let h: Vec<f64> = xs.iter().map(|&t| snakelab::sensor::h_approx(t, &r, &sensor_basis())).collect();
            let exact = poisson_gain_on_grid(&rho, &h);
            let approx: Vec<f64> = xs.iter().map(|&t| g.eval(t)).collect();
            relative_l2(&approx, &exact, &rho)
        })
        .collect()
}
