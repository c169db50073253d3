//! Line-by-line transcription of one learning step for the three-link,
//! four-particle toy, sharing only the simulator step and noise streams with
//! the library.

use std::f64::consts::{PI, SQRT_2, TAU};

use rand_distr::{Distribution, StandardNormal};
use snakelab::basis::Fourier;
use snakelab::config::ExperimentConfig;
use snakelab::dynamics::ControlInput;
use snakelab::harness::Learner;

/// Largest relative deviation between library and oracle and where it occurred.
#[derive(Debug, Default)]
pub struct Deviation {
    pub max: f64,
    pub at: &'static str,
    pub count: usize,
}

impl Deviation {
    fn record(&mut self, a: f64, b: f64, what: &'static str) {
        let d = (a - b).abs() / (1.0 + b.abs());
        self.count += 1;
        if !(d <= self.max) {
            self.max = d;
            self.at = what;
        }
    }
}

/// Runs `steps` learning steps alongside the oracle.
pub fn max_deviation(cfg: &ExperimentConfig, steps: usize) -> Deviation {
    let cfg = cfg.clone();
    let mut dev = Deviation::default();
    let mut close = |a: f64, b: f64, what: &'static str| dev.record(a, b, what);
    let mut learner = Learner::new(&cfg).unwrap();
    let chain = learner.chain().clone();
    let mut noise = learner.noise_streams().to_vec();
    let mut state = learner.state().clone();
    let mut thetas: Vec<Vec<f64>> = learner.bank().ensembles.iter().map(|e| e.theta.clone()).collect();
    let omegas: Vec<Vec<f64>> = learner.bank().ensembles.iter().map(|e| e.omega.clone()).collect();
    let mut r: Vec<Vec<f64>> = learner.bank().weights.r.clone();
    let mut w: Vec<f64> = learner.weights().to_vector().iter().copied().collect();

    let n = 3;
    let joints = 2;
    let np = 4.0;
    let l = &cfg.learning;
    let (dt, a_amp, omega0, sigma, alpha_h) = (l.dt, l.amplitude, cfg.robot.omega0, cfg.sensor.sigma_w, cfg.sensor.alpha_h);
    let h_of = |th: f64, r: &[f64]| r[0] * th.sin() + r[1] * (2.0 * th).sin() + r[2] * (2.0 * th).cos();
    let phi_h = |th: f64| [th.sin(), (2.0 * th).sin(), (2.0 * th).cos()];
    let phi_q = |th: f64| [th.cos(), th.sin(), (2.0 * th).cos(), (2.0 * th).sin()];
    assert_eq!(l.features, vec![Fourier::Cos(1), Fourier::Sin(1), Fourier::Cos(2), Fourier::Sin(2)]);
    assert_eq!((cfg.robot.n, cfg.filter.particles), (3, 4));
    assert_eq!(cfg.filter.gain_basis, vec![Fourier::Sin(1), Fourier::Cos(1)]);

    // Particle-averaged Q features at control u.
    let q_features = |th: &[Vec<f64>], u: &[f64]| -> Vec<f64> {
        let mut g1 = vec![0.0; joints * 4];
        let mut g2 = vec![0.0; joints * 8];
        for j in 0..joints {
            for p in &th[j] {
                let f = phi_q(*p);
                for m in 0..4 {
                    g1[j * 4 + m] += f[m] / np;
                    g2[j * 8 + m] += u[j] * f[m] / np;
                    g2[j * 8 + 4 + m] += u[j + 1] * f[m] / np;
                }
            }
        }
        let g3: Vec<f64> = u.iter().map(|v| 0.5 * v * v).collect();
        [g1, g2, g3].concat()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // Minimizer of the quadratic: slope at zero from unit probes.
    let minimize = |th: &[Vec<f64>], w: &[f64]| -> (Vec<f64>, f64) {
        let zero = q_features(th, &[0.0; 3]);
        let w3 = &w[w.len() - n..];
        let u: Vec<f64> = (0..n)
            .map(|k| {
                let mut e = [0.0; 3];
                e[k] = 1.0;
                let slope = dot(w, &q_features(th, &e)) - dot(w, &zero) - 0.5 * w3[k];
                -slope / w3[k]
            })
            .collect();
        let h = dot(w, &q_features(th, &u));
        (u, h)
    };

    for _ in 0..steps {
        let rec = learner.step().unwrap();

        let t = state.t;
        close(rec.t, t, "t");
        let u: Vec<f64> = (1..=n)
            .map(|j| {
                let s = j as f64 * PI / 5.0;
                a_amp * (SQRT_2 * omega0 * t + s).sin() + a_amp * (PI * omega0 * t + s).sin()
            })
            .collect();
        for i in 0..n {
            close(rec.u.u[i], u[i], "u");
        }
        let next = chain.step(&state, &ControlInput::from_vec(u.clone()), dt).unwrap();

        let x = state.shape();
        let dz: Vec<f64> = (0..joints)
            .map(|j| {
                let xi: f64 = StandardNormal.sample(&mut noise[j]);
                x[j] * dt + sigma * dt.sqrt() * xi
            })
            .collect();
        for j in 0..joints {
            close(rec.dz[j], dz[j], "dZ");
        }

        let th_now = thetas.clone();
        for j in 0..joints {
            let hat = th_now[j].iter().map(|&p| h_of(p, &r[j])).sum::<f64>() / np;
            close(rec.joints[j].h_hat, hat, "h_hat");
            // 2x2 Galerkin system for the basis (sin, cos).
            let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &p in &th_now[j] {
                let (d1, d2) = (p.cos(), -p.sin());
                a11 += d1 * d1 / np;
                a12 += d1 * d2 / np;
                a22 += d2 * d2 / np;
                b1 += (h_of(p, &r[j]) - hat) * p.sin() / np;
                b2 += (h_of(p, &r[j]) - hat) * p.cos() / np;
            }
            let det = a11 * a22 - a12 * a12;
            let k1 = (b1 * a22 - b2 * a12) / det;
            let k2 = (a11 * b2 - a12 * b1) / det;
            if rec.joints[j].gain.regularized {
                close(1.0, 0.0, "unexpected ridge");
            }
            close(rec.joints[j].gain.kappa[0], k1, "kappa1");
            close(rec.joints[j].gain.kappa[1], k2, "kappa2");

            let mut avg = [0.0; 3];
            for &p in &th_now[j] {
                let f = phi_h(p);
                for m in 0..3 {
                    avg[m] += f[m] / np;
                }
            }
            for (i, p) in th_now[j].iter().enumerate() {
                let gain = k1 * p.cos() - k2 * p.sin();
                let innov = dz[j] - 0.5 * (h_of(*p, &r[j]) + hat) * dt;
                thetas[j][i] = (p + omegas[j][i] * dt + gain / (sigma * sigma) * innov).rem_euclid(TAU);
            }
            for m in 0..3 {
                r[j][m] += alpha_h * (dz[j] - hat * dt) * avg[m];
            }
        }
        for j in 0..joints {
            for i in 0..4 {
                let lib = learner.bank().ensembles[j].theta[i];
                let d = (lib - thetas[j][i] + PI).rem_euclid(TAU) - PI;
                close(d, 0.0, "particle");
            }
            for m in 0..3 {
                close(learner.bank().weights.r[j][m], r[j][m], "r");
            }
        }

        let psi_now = state.q.mean();
        let psi_next = next.q.mean();
        let cost = (psi_next - psi_now) / dt + u.iter().map(|v| v * v).sum::<f64>() / (2.0 * l.epsilon);
        close(rec.cost, cost, "cost");

        let phi_now = q_features(&th_now, &u);
        let h_now = dot(&w, &phi_now);
        close(rec.h_now, h_now, "H_now");
        let (us_now, hmin_now) = minimize(&th_now, &w);
        let (us_next, hmin_next) = minimize(&thetas, &w);
        close(rec.h_min_now, hmin_now, "H_min_now");
        close(rec.h_min_next, hmin_next, "H_min_next");
        for i in 0..n {
            close(rec.u_star_now.u[i], us_now[i], "u*_now");
            close(rec.u_star_next.u[i], us_next[i], "u*_next");
        }
        let e = (hmin_next - hmin_now) / dt + l.gamma * (cost - h_now);
        close(rec.bellman_error, e, "E");
        let f_next = q_features(&thetas, &us_next);
        let f_now = q_features(&th_now, &us_now);
        for i in 0..w.len() {
            let g = (f_next[i] - f_now[i]) / dt - l.gamma * phi_now[i];
            w[i] -= dt * l.alpha * e * g;
        }
        let lib_w: Vec<f64> = rec.weights.to_vector().iter().copied().collect();
        for i in 0..w.len() {
            close(lib_w[i], w[i], "w");
        }
        state = next;
        for i in 0..n {
            close(learner.state().q[i], state.q[i], "q");
        }
    }
    dev
}
