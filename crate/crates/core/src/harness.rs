//! End-to-end experiments: open-loop gait, the learning loop and closed-loop
//! evaluation of a learned policy.
//!
//! One learning step, in order:
//! exploration input -> simulator step -> observation increments ->
//! per-joint sensor-weight and particle updates -> stage cost ->
//! Bellman error -> Q-weight update.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use log::{debug, info};
use rand::Rng;

use crate::config::{steps_for, ExperimentConfig};
use crate::dynamics::{Chain, ControlInput, RobotState};
use crate::error::{Error, Result};
use crate::fpf::{circular_mean, fpf_step, h_hat, init_particles, GainSolution, ParticleEnsemble};
use crate::phase::{angle_diff, find_limit_cycle, LimitCycleAtlas};
use crate::qlearn::{
    bellman_error, bellman_gradient, clamp_control, exploration_input, features_from_moments,
    minimize_from_moments, stage_cost, update_q_weights, FeatureConfig, PhaseMoments, QWeights,
};
use crate::rng::{stream, Stream};
use crate::sensor::{observe, update_sensor_weights, SensorWeights};

/// Per-joint particle ensembles together with the learned sensor weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    pub ensembles: Vec<ParticleEnsemble>,
    pub weights: SensorWeights,
}

/// What one joint's filter produced in a step.
#[derive(Clone, Debug, PartialEq)]
pub struct JointUpdate {
    pub h_hat: f64,
    pub gain: GainSolution,
}

impl FilterBank {
    /// Fresh ensembles drawn from the `tag` streams, zero sensor weights.
    pub fn new(cfg: &ExperimentConfig, tag: &str) -> Self {
        let joints = cfg.robot.n - 1;
        let ensembles = (0..joints)
            .map(|j| {
                init_particles(
                    cfg.filter.particles,
                    cfg.filter.delta,
                    cfg.robot.omega0,
                    &mut stream(cfg.seeds.master, tag, j as u64),
                )
            })
            .collect();
        Self {
            ensembles,
            weights: SensorWeights::zeros(joints, cfg.sensor.m_h()),
        }
    }

    pub fn thetas(&self) -> Vec<&[f64]> {
        self.ensembles.iter().map(|e| e.theta.as_slice()).collect()
    }

    pub fn moments(&self, features: &FeatureConfig) -> PhaseMoments {
        PhaseMoments::from_ensembles(&self.thetas(), features)
    }

    /// Updates every joint from its own increment. Joint `j` reads only
    /// `dz[j]`, its ensemble and `r_j`.
    pub fn update(&mut self, dz: &[f64], cfg: &ExperimentConfig, dt: f64) -> Result<Vec<JointUpdate>> {
        let sensor = &cfg.sensor;
        let mut out = Vec::with_capacity(self.ensembles.len());
        for (j, ens) in self.ensembles.iter_mut().enumerate() {
            let r = &self.weights.r[j];
            let hat = h_hat(&ens.theta, r, &sensor.basis);
            let (next, info) = fpf_step(ens, dz[j], r, dt, sensor.sigma_w, &sensor.basis, &cfg.filter.gain_basis)?;
            let r_next = update_sensor_weights(r, dz[j], hat, &ens.theta, sensor.alpha_h, dt, &sensor.basis);
            *ens = next;
            self.weights.r[j] = r_next;
            out.push(JointUpdate {
                h_hat: hat,
                gain: info.gain,
            });
        }
        Ok(out)
    }
}

/// Random state on the nominal gait: one common phase for every joint,
/// uniform orientation, centre of mass at the origin, and the simulation
/// clock set so the torque is in step with that phase.
pub fn sample_initial_state(chain: &Chain, atlas: &LimitCycleAtlas, rng: &mut Stream) -> Result<RobotState> {
    let theta0 = rng.random::<f64>() * TAU;
    let psi = rng.random::<f64>() * TAU;
    let (x, xdot) = atlas.shape_at(theta0);
    chain.state_from_shape(
        &x,
        &xdot,
        psi,
        nalgebra::Vector2::zeros(),
        atlas.time_at(theta0),
        &ControlInput::zeros(chain.n()),
    )
}

/// Every intermediate quantity of one learning step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub u: ControlInput,
    pub dz: Vec<f64>,
    pub joints: Vec<JointUpdate>,
    pub cost: f64,
    pub h_now: f64,
    pub u_star_now: ControlInput,
    pub h_min_now: f64,
    pub u_star_next: ControlInput,
    pub h_min_next: f64,
    pub bellman_error: f64,
    pub weights: QWeights,
}

/// Per-episode log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// `n_T T`, the nominal episode length.
    pub duration: f64,
    pub dt: f64,
    pub bellman_errors: Vec<f64>,
    pub costs: Vec<f64>,
    /// Orientation before every step and after the last one.
    pub psi_trace: Vec<f64>,
    pub weight_snapshot: QWeights,
    pub sensor_snapshot: SensorWeights,
    /// RMSE of `h_hat_j` against the true observation function, per joint.
    pub h_rmse: Vec<f64>,
    /// Circular RMSE of the ensemble mean phase against the nearest-point
    /// phase of `(x_j, xdot_j)`, after removing the constant offset below.
    pub phase_rmse: Vec<f64>,
    pub phase_offset: Vec<f64>,
}

impl EpisodeLog {
    pub fn steps(&self) -> usize {
        self.bellman_errors.len()
    }

    pub fn net_dpsi(&self) -> f64 {
        self.psi_trace.last().unwrap_or(&0.0) - self.psi_trace.first().unwrap_or(&0.0)
    }

    pub fn mean_cost(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len().max(1) as f64
    }
}

/// `e = (1 / (n_T T)) sum_k E(k)^2 dt`.
pub fn episode_error(log: &EpisodeLog) -> f64 {
    assert!(!log.bellman_errors.is_empty(), "empty episode");
    log.bellman_errors.iter().map(|e| e * e * log.dt).sum::<f64>() / log.duration
}

pub const METRICS_HEADER: &str = "episode,avg_bellman_error,net_dpsi,mean_cost";

pub fn metrics_csv(logs: &[EpisodeLog]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for log in logs {
        writeln!(s, "{},{},{},{}", log.episode, episode_error(log), log.net_dpsi(), log.mean_cost()).unwrap();
    }
    s
}

/// Read-only view handed to observers after each learning step.
pub struct StepView<'a> {
    pub episode: usize,
    pub step: usize,
    pub before: &'a RobotState,
    pub after: &'a RobotState,
    pub record: &'a StepRecord,
    pub bank: &'a FilterBank,
}

/// State of the learning loop.
#[derive(Clone, Debug)]
pub struct Learner {
    cfg: ExperimentConfig,
    chain: Chain,
    atlas: LimitCycleAtlas,
    features: FeatureConfig,
    bank: FilterBank,
    weights: QWeights,
    noise: Vec<Stream>,
    init_rng: Stream,
    state: RobotState,
}

impl Learner {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let atlas = find_limit_cycle(&cfg.robot, cfg.atlas.settle_periods, cfg.atlas.samples)?;
        Self::with_atlas(cfg, atlas)
    }

    pub fn with_atlas(cfg: &ExperimentConfig, atlas: LimitCycleAtlas) -> Result<Self> {
        let chain = Chain::new(cfg.robot.clone())?;
        let features = cfg.feature_config();
        let master = cfg.seeds.master;
        let l = &cfg.learning;
        let weights = QWeights::random(
            &features,
            (l.w3_init[0], l.w3_init[1]),
            l.w_init_spread,
            &mut stream(master, "q-weights", 0),
        );
        let bank = FilterBank::new(cfg, "particles");
        let noise = (0..cfg.robot.n - 1).map(|j| stream(master, "noise", j as u64)).collect();
        let mut init_rng = stream(master, "episode-init", 0);
        let state = sample_initial_state(&chain, &atlas, &mut init_rng)?;
        Ok(Self {
            cfg: cfg.clone(),
            chain,
            atlas,
            features,
            bank,
            weights,
            noise,
            init_rng,
            state,
        })
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn weights(&self) -> &QWeights {
        &self.weights
    }

    pub fn noise_streams(&self) -> &[Stream] {
        &self.noise
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn atlas(&self) -> &LimitCycleAtlas {
        &self.atlas
    }

    pub fn features(&self) -> &FeatureConfig {
        &self.features
    }

    /// Draws a fresh robot state; filters and all weights carry over.
    pub fn reset_state(&mut self) -> Result<()> {
        self.state = sample_initial_state(&self.chain, &self.atlas, &mut self.init_rng)?;
        Ok(())
    }

    /// One pass of the learning loop from the current state.
    pub fn step(&mut self) -> Result<StepRecord> {
        let cfg = &self.cfg;
        let l = &cfg.learning;
        let dt = l.dt;
        let n = cfg.robot.n;

        let u = exploration_input(self.state.t, l.amplitude, cfg.robot.omega0, n);
        let next = self.chain.step(&self.state, &u, dt)?;
        let dz = observe(&self.state, dt, &cfg.sensor, &mut self.noise);

        let moments_now = self.bank.moments(&self.features);
        let joints = self.bank.update(&dz, cfg, dt)?;
        let moments_next = self.bank.moments(&self.features);

        let cost = l.turn.sign() * (next.orientation() - self.state.orientation()) / dt
            + stage_cost(0.0, 0.0, &u, l.epsilon, dt);
        let w = &self.weights;
        let phi_now = features_from_moments(&moments_now, &u, &self.features);
        let h_now = w.to_vector().dot(&phi_now);
        let (u_star_now, h_min_now) = minimize_from_moments(&moments_now, w, &self.features)?;
        let (u_star_next, h_min_next) = minimize_from_moments(&moments_next, w, &self.features)?;
        let error = bellman_error(h_min_next, h_min_now, cost, h_now, l.gamma, dt);
        let grad = bellman_gradient(
            &features_from_moments(&moments_next, &u_star_next, &self.features),
            &features_from_moments(&moments_now, &u_star_now, &self.features),
            &phi_now,
            l.gamma,
            dt,
        );
        self.weights = update_q_weights(w, error, &grad, l.alpha, dt, &self.features);
        let record = StepRecord {
            t: self.state.t,
            u,
            dz,
            joints,
            cost,
            h_now,
            u_star_now,
            h_min_now,
            u_star_next,
            h_min_next,
            bellman_error: error,
            weights: self.weights.clone(),
        };
        self.state = next;
        Ok(record)
    }

    /// Runs one episode from a freshly sampled state.
    pub fn run_episode(&mut self, episode: usize, observer: &mut dyn FnMut(&StepView)) -> Result<EpisodeLog> {
        let steps = self.cfg.steps_per_episode();
        let joints = self.cfg.robot.n - 1;
        let wrap = |e: Error, step: usize| Error::InEpisode {
            episode,
            step,
            source: Box::new(e),
        };
        self.reset_state().map_err(|e| wrap(e, 0))?;

        let mut errors = Vec::with_capacity(steps);
        let mut costs = Vec::with_capacity(steps);
        let mut psi = Vec::with_capacity(steps + 1);
        let mut h_sq = vec![0.0; joints];
        let mut phase_diffs = vec![Vec::with_capacity(steps); joints];
        psi.push(self.state.orientation());
        for k in 0..steps {
            let before = self.state.clone();
            // Tracking is scored on the filter state that produced h_hat(k).
            let x = before.shape();
            let xdot = before.shape_velocity();
            for j in 0..joints {
                let (_, mean) = circular_mean(&self.bank.ensembles[j].theta);
                let reference = self.atlas.phase_of((x[j], xdot[j]), j);
                phase_diffs[j].push(angle_diff(mean, reference));
            }
            let record = self.step().map_err(|e| wrap(e, k))?;
            for j in 0..joints {
                let truth = self.cfg.sensor.h_true.eval(x[j], xdot[j]);
                h_sq[j] += (record.joints[j].h_hat - truth).powi(2);
            }
            errors.push(record.bellman_error);
            costs.push(record.cost);
            psi.push(self.state.orientation());
            observer(&StepView {
                episode,
                step: k,
                before: &before,
                after: &self.state,
                record: &record,
                bank: &self.bank,
            });
        }
        let mut phase_rmse = Vec::with_capacity(joints);
        let mut phase_offset = Vec::with_capacity(joints);
        for diffs in &phase_diffs {
            let (off, rmse) = offset_rmse(diffs);
            phase_offset.push(off);
            phase_rmse.push(rmse);
        }
        let l = &self.cfg.learning;
        Ok(EpisodeLog {
            episode,
            duration: l.periods_per_episode as f64 * self.cfg.robot.period(),
            dt: l.dt,
            bellman_errors: errors,
            costs,
            psi_trace: psi,
            weight_snapshot: self.weights.clone(),
            sensor_snapshot: self.bank.weights.clone(),
            h_rmse: h_sq.iter().map(|s| (s / steps as f64).sqrt()).collect(),
            phase_rmse,
            phase_offset,
        })
    }
}

/// Circular mean of a set of angle differences and the RMSE about it.
pub fn offset_rmse(diffs: &[f64]) -> (f64, f64) {
    let (_, offset) = circular_mean(diffs);
    let offset = angle_diff(offset, 0.0);
    let ms = diffs.iter().map(|&d| angle_diff(d, offset).powi(2)).sum::<f64>() / diffs.len().max(1) as f64;
    (offset, ms.sqrt())
}

#[derive(Clone, Debug)]
pub struct LearningOutcome {
    pub weights: QWeights,
    pub sensor: SensorWeights,
    pub episodes: Vec<EpisodeLog>,
    pub atlas: LimitCycleAtlas,
}

pub fn run_learning(cfg: &ExperimentConfig) -> Result<LearningOutcome> {
    run_learning_observed(cfg, &mut |_| {})
}

pub fn run_learning_observed(cfg: &ExperimentConfig, observer: &mut dyn FnMut(&StepView)) -> Result<LearningOutcome> {
    let mut learner = Learner::new(cfg)?;
    let mut episodes = Vec::with_capacity(cfg.learning.episodes);
    for e in 1..=cfg.learning.episodes {
        let log = learner.run_episode(e, observer)?;
        debug!(
            "episode {e}: e = {:.4e}, dpsi = {:.4}, |r|max = {:.3}",
            episode_error(&log),
            log.net_dpsi(),
            log.sensor_snapshot.max_abs()
        );
        episodes.push(log);
    }
    info!("learning finished after {} episodes", episodes.len());
    Ok(LearningOutcome {
        weights: learner.weights.clone(),
        sensor: learner.bank.weights.clone(),
        episodes,
        atlas: learner.atlas,
    })
}

#[derive(Clone, Debug)]
pub struct OpenLoopRun {
    pub atlas: LimitCycleAtlas,
    /// Initial state followed by the state after every step.
    pub trajectory: Vec<RobotState>,
}

impl OpenLoopRun {
    pub fn net_dpsi(&self) -> f64 {
        self.trajectory.last().unwrap().orientation() - self.trajectory[0].orientation()
    }

    pub fn displacement(&self) -> nalgebra::Vector2<f64> {
        self.trajectory.last().unwrap().r_cm - self.trajectory[0].r_cm
    }
}

/// Uncontrolled gait from a seeded random point on the limit cycle.
pub fn run_open_loop(cfg: &ExperimentConfig, periods: usize) -> Result<OpenLoopRun> {
    let atlas = find_limit_cycle(&cfg.robot, cfg.atlas.settle_periods, cfg.atlas.samples)?;
    let chain = Chain::new(cfg.robot.clone())?;
    let mut rng = stream(cfg.seeds.master, "eval-init", 0);
    let mut state = sample_initial_state(&chain, &atlas, &mut rng)?;
    let u = ControlInput::zeros(cfg.robot.n);
    let steps = steps_for(periods, &cfg.robot, cfg.learning.dt);
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push(state.clone());
    for _ in 0..steps {
        state = chain.step(&state, &u, cfg.learning.dt)?;
        trajectory.push(state.clone());
    }
    Ok(OpenLoopRun { atlas, trajectory })
}

#[derive(Clone, Debug)]
pub struct EvaluationRun {
    /// Initial state followed by the state after every step, warm-up included.
    pub trajectory: Vec<RobotState>,
    /// Applied control per step.
    pub controls: Vec<ControlInput>,
    /// Number of warm-up steps (zero control) at the start.
    pub warmup_steps: usize,
    pub clamp_events: usize,
    pub sensor: SensorWeights,
}

impl EvaluationRun {
    /// Orientation change over the controlled window.
    pub fn net_dpsi(&self) -> f64 {
        self.trajectory.last().unwrap().orientation() - self.trajectory[self.warmup_steps].orientation()
    }

    pub fn mean_control_norm(&self) -> f64 {
        let window = &self.controls[self.warmup_steps..];
        window.iter().map(|u| u.u.norm()).sum::<f64>() / window.len().max(1) as f64
    }
}

/// Closed-loop rollout of the learned policy. The filters start fresh
/// (from `sensor` weights) and lock during an uncontrolled warm-up, then the
/// clamped minimizer drives the friction for `periods` periods.
pub fn run_evaluation(cfg: &ExperimentConfig, w: &QWeights, sensor: &SensorWeights, periods: usize) -> Result<EvaluationRun> {
    cfg.validate()?;
    let features = cfg.feature_config();
    if let Some((index, &value)) = w.w3.iter().enumerate().find(|(_, &v)| !(v > crate::qlearn::W3_TOL)) {
        return Err(Error::NonConvexHamiltonian { index, value });
    }
    let atlas = find_limit_cycle(&cfg.robot, cfg.atlas.settle_periods, cfg.atlas.samples)?;
    let chain = Chain::new(cfg.robot.clone())?;
    let master = cfg.seeds.master;
    let mut state = sample_initial_state(&chain, &atlas, &mut stream(master, "eval-init", 0))?;
    let mut bank = FilterBank::new(cfg, "eval-particles");
    bank.weights = sensor.clone();
    let mut noise: Vec<Stream> = (0..cfg.robot.n - 1).map(|j| stream(master, "eval-noise", j as u64)).collect();

    let dt = cfg.learning.dt;
    let warmup_steps = steps_for(cfg.evaluation.warmup_periods, &cfg.robot, dt);
    let steps = steps_for(cfg.evaluation.warmup_periods + periods, &cfg.robot, dt);
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps);
    let mut clamp_events = 0;
    trajectory.push(state.clone());
    for k in 0..steps {
        let u = if k < warmup_steps {
            ControlInput::zeros(cfg.robot.n)
        } else {
            let (u_star, _) = minimize_from_moments(&bank.moments(&features), w, &features)?;
            let (u, clamped) = clamp_control(&u_star, cfg.learning.policy_clamp);
            if clamped {
                clamp_events += 1;
                debug!("policy clamped at t = {:.3}: {:?}", state.t, u_star.u.as_slice());
            }
            u
        };
        let next = chain.step(&state, &u, dt)?;
        let dz = observe(&state, dt, &cfg.sensor, &mut noise);
        bank.update(&dz, cfg, dt)?;
        state = next;
        trajectory.push(state.clone());
        controls.push(u);
    }
    Ok(EvaluationRun {
        trajectory,
        controls,
        warmup_steps,
        clamp_events,
        sensor: bank.weights,
    })
}

/// Sensor weights as checkpoint lines `r<j>,index,value`.
pub fn sensor_checkpoint(sensor: &SensorWeights) -> String {
    let mut s = String::new();
    for (j, r) in sensor.r.iter().enumerate() {
        for (i, v) in r.iter().enumerate() {
            writeln!(s, "r{},{i},{v}", j + 1).unwrap();
        }
    }
    s
}

/// Reads `r<j>` lines; joints absent from the text stay at zero.
pub fn sensor_from_checkpoint(text: &str, joints: usize, m_h: usize) -> Result<SensorWeights> {
    let mut w = SensorWeights::zeros(joints, m_h);
    for line in text.lines().map(str::trim).filter(|l| l.starts_with('r')) {
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("bad sensor checkpoint line: {line}"));
        if cols.len() != 3 {
            return Err(bad());
        }
        let j: usize = cols[0][1..].parse().map_err(|_| bad())?;
        let i: usize = cols[1].parse().map_err(|_| bad())?;
        let v: f64 = cols[2].parse().map_err(|_| bad())?;
        if j == 0 || j > joints || i >= m_h {
            return Err(bad());
        }
        w.r[j - 1][i] = v;
    }
    Ok(w)
}
