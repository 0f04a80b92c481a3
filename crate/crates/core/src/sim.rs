//! The online planning loop in simulation: sense, augment, replan, switch,
//! control, integrate, log.

use alloc::string::ToString;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::controller::{
    adversary_from_costate, disturbance_from_costate, performance_control, safety_from_costate,
    select_mode_from_values, ControllerMode, Costate, SwitchConfig, TrackingTables,
};
use crate::dynamics::{
    relative_derivative, relative_state, tracking_derivative, Disturbance, ModelParams,
    PlannerControl, PlannerState, RelativeState, TrackerControl, TrackingState,
};
use crate::rng::{derive_seed, Rng};
use crate::rrt::{plan, to_trajectory, PlannerConfig, Trajectory};
use crate::teb::{augment_obstacle, teb_in_planner_frame, TebBox};
use crate::world::{check_sensor_range, SensorConfig, World};
use crate::{Error, Result};

/// Slack on per-axis containment checks (m).
pub const CONTAINMENT_SLACK: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceMode {
    None,
    RandomUniform { seed: u64 },
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Control period (s).
    pub dt: f64,
    pub substeps: usize,
    pub disturbance: DisturbanceMode,
    pub max_time: f64,
    /// Planner cruise speed (m/s).
    pub v_plan: f64,
    /// Base seed for the per-replan planner streams.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            substeps: 10,
            disturbance: DisturbanceMode::None,
            max_time: 300.0,
            v_plan: 0.5,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig("control period must be positive".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidConfig("substeps must be at least 1".into()));
        }
        if !(self.v_plan > 0.0 && self.v_plan.is_finite()) {
            return Err(Error::InvalidConfig("planner speed must be positive".into()));
        }
        if !(self.max_time > 0.0) {
            return Err(Error::InvalidConfig("max_time must be positive".into()));
        }
        Ok(())
    }

    /// Largest planner displacement per control period.
    pub fn dx_plan(&self) -> f64 {
        self.v_plan * self.dt
    }
}

/// Source of wall-clock time for latency measurements.
pub trait Clock {
    /// Seconds since an arbitrary origin.
    fn now(&mut self) -> f64;
}

/// Clock that never advances; latencies read as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now(&mut self) -> f64 {
        0.0
    }
}

/// Classical RK4 on the tracking model with `u` and `d` held over `dt`.
pub fn integrate_tracking(
    s: &TrackingState,
    u: &TrackerControl,
    d: &Disturbance,
    params: &ModelParams,
    dt: f64,
    substeps: usize,
) -> Result<TrackingState> {
    let f = |x: [f64; 10]| -> Result<[f64; 10]> {
        Ok(tracking_derivative(&TrackingState::from_array(x), u, d, params)?.to_array())
    };
    rk4(s.to_array(), f, dt, substeps).map(TrackingState::from_array)
}

/// RK4 on the relative model with all three inputs held over `dt`.
pub fn integrate_relative(
    r: &RelativeState,
    u: &TrackerControl,
    up: &PlannerControl,
    d: &Disturbance,
    params: &ModelParams,
    dt: f64,
    substeps: usize,
) -> Result<RelativeState> {
    let f = |x: [f64; 10]| -> Result<[f64; 10]> {
        Ok(relative_derivative(&RelativeState::from_array(x), u, up, d, params)?.to_array())
    };
    rk4(r.to_array(), f, dt, substeps).map(RelativeState::from_array)
}

fn rk4(
    mut x: [f64; 10],
    f: impl Fn([f64; 10]) -> Result<[f64; 10]>,
    dt: f64,
    substeps: usize,
) -> Result<[f64; 10]> {
    let h = dt / substeps.max(1) as f64;
    let axpy = |x: &[f64; 10], k: &[f64; 10], a: f64| -> [f64; 10] {
        core::array::from_fn(|i| x[i] + a * k[i])
    };
    for _ in 0..substeps.max(1) {
        let k1 = f(x)?;
        let k2 = f(axpy(&x, &k1, 0.5 * h))?;
        let k3 = f(axpy(&x, &k2, 0.5 * h))?;
        let k4 = f(axpy(&x, &k3, h))?;
        for i in 0..10 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(x)
}

/// Wind for one control period.
pub fn disturbance_sample(
    mode: &DisturbanceMode,
    costate: &Costate,
    params: &ModelParams,
    rng: &mut Rng,
) -> Disturbance {
    match mode {
        DisturbanceMode::None => Disturbance::default(),
        DisturbanceMode::RandomUniform { .. } => Disturbance {
            dx: rng.uniform(-params.d_max, params.d_max),
            dy: rng.uniform(-params.d_max, params.d_max),
            dz: rng.uniform(-params.d_max, params.d_max),
        },
        DisturbanceMode::Adversarial => disturbance_from_costate(costate, params),
    }
}

/// Everything an episode needs besides tables, bound and world.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSetup {
    pub params: ModelParams,
    pub sim: SimConfig,
    pub planner: PlannerConfig,
    pub sensor: SensorConfig,
    pub switch: SwitchConfig,
    pub start: PlannerState,
    pub goal: PlannerState,
}

impl EpisodeSetup {
    pub fn validate(&self, teb: &TebBox, world: &World) -> Result<()> {
        self.params.validate()?;
        self.sim.validate()?;
        self.planner.validate()?;
        self.sensor.validate()?;
        self.switch.validate()?;
        check_sensor_range(self.sensor.range, teb, self.sim.dx_plan())?;
        for (p, err) in [(self.start, Error::StartInObstacle), (self.goal, Error::GoalInObstacle)] {
            let a = p.to_array();
            if !self.planner.bounds.contains(a) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{a:?} lies outside the planner workspace"
                )));
            }
            if world.raw_boxes().any(|o| augment_obstacle(o, teb).contains(a)) {
                return Err(err);
            }
        }
        Ok(())
    }
}

/// One control period of the loop, recorded after integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub s: TrackingState,
    pub p: PlannerState,
    pub r: RelativeState,
    /// Interpolated subsystem values at `r`.
    pub values: [f64; 3],
    pub mode: ControllerMode,
    pub u: TrackerControl,
    /// Mean planner velocity over the period.
    pub up: PlannerControl,
    pub d: Disturbance,
    /// A table look-up during the period or at `r` left its grid.
    pub clamped: bool,
    pub replanned: bool,
    /// Tracker position inside a raw obstacle.
    pub collision: bool,
    /// Error box around the planner touches a raw obstacle.
    pub teb_hits_obstacle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    ReachedGoal,
    TimedOut,
    PlannerFailed { reason: alloc::string::String },
    AttitudeAbort { reason: alloc::string::String },
}

/// Records plus the non-deterministic side channel of control latencies.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub records: Vec<StepRecord>,
    pub outcome: Outcome,
    pub replans: usize,
    /// Wall-clock seconds spent computing controls, per period.
    pub latencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: usize,
    /// Largest per-axis `|s.pos - p|`.
    pub max_error: [f64; 3],
    pub max_value: [f64; 3],
    pub collisions: usize,
    pub teb_obstacle_hits: usize,
    pub reached_goal: bool,
    pub time_to_goal: Option<f64>,
    pub safety_fraction: f64,
    pub performance_fraction: f64,
    pub mean_latency_s: f64,
    pub replans: usize,
    pub clamped_steps: usize,
    /// Per-axis error stayed within the bound plus slack at every record.
    pub containment_held: bool,
    pub outcome: Outcome,
}

impl Metrics {
    /// Goal reached with no collision and the error inside the bound.
    pub fn success(&self) -> bool {
        self.reached_goal
            && self.collisions == 0
            && self.teb_obstacle_hits == 0
            && self.containment_held
    }
}

pub fn compute_metrics(log: &EpisodeLog, teb: &TebBox) -> Result<Metrics> {
    if log.records.is_empty() {
        return Err(Error::InvalidConfig("episode log has no records".into()));
    }
    let n = log.records.len();
    let mut max_error = [0.0f64; 3];
    let mut max_value = [f64::NEG_INFINITY; 3];
    let (mut collisions, mut hits, mut safety, mut clamped) = (0, 0, 0, 0);
    for rec in &log.records {
        let e = [rec.r.xr, rec.r.yr, rec.r.zr];
        for i in 0..3 {
            max_error[i] = max_error[i].max(e[i].abs());
            max_value[i] = max_value[i].max(rec.values[i]);
        }
        collisions += rec.collision as usize;
        hits += rec.teb_hits_obstacle as usize;
        safety += (rec.mode == ControllerMode::Safety) as usize;
        clamped += rec.clamped as usize;
    }
    let reached = log.outcome == Outcome::ReachedGoal;
    let mean_latency_s = if log.latencies.is_empty() {
        0.0
    } else {
        log.latencies.iter().sum::<f64>() / log.latencies.len() as f64
    };
    Ok(Metrics {
        steps: n,
        max_error,
        max_value,
        collisions,
        teb_obstacle_hits: hits,
        reached_goal: reached,
        time_to_goal: reached.then(|| log.records[n - 1].t),
        safety_fraction: safety as f64 / n as f64,
        performance_fraction: (n - safety) as f64 / n as f64,
        mean_latency_s,
        replans: log.replans,
        clamped_steps: clamped,
        containment_held: (0..3).all(|i| max_error[i] <= teb.half_widths[i] + CONTAINMENT_SLACK),
        outcome: log.outcome.clone(),
    })
}

fn at_goal(
    s: &TrackingState,
    p: &PlannerState,
    goal: &PlannerState,
    teb: &TebBox,
    radius: f64,
) -> bool {
    let pos = s.position();
    let g = goal.to_array();
    p.distance(goal) <= radius && (0..3).all(|i| (pos[i] - g[i]).abs() <= teb.half_widths[i])
}

/// Runs one episode from rest at `setup.start`.
///
/// Validation problems are returned as errors. Planner failures and attitude
/// guard trips end the episode and are reported through [`Outcome`].
pub fn run_episode(
    setup: &EpisodeSetup,
    tables: &TrackingTables,
    teb: &TebBox,
    mut world: World,
    clock: &mut dyn Clock,
) -> Result<EpisodeLog> {
    setup.validate(teb, &world)?;
    let EpisodeSetup {
        params,
        sim,
        planner,
        sensor,
        switch,
        start,
        goal,
    } = setup;
    let mut wind_rng = match sim.disturbance {
        DisturbanceMode::RandomUniform { seed } => Rng::seed_from_u64(seed),
        _ => Rng::seed_from_u64(0),
    };
    let mut s = TrackingState::at_rest(*start);
    let mut p = *start;
    let mut traj: Option<(Trajectory, f64)> = None;
    let mut log = EpisodeLog {
        records: Vec::new(),
        outcome: Outcome::TimedOut,
        replans: 0,
        latencies: Vec::new(),
    };
    let steps = libm::ceil(sim.max_time / sim.dt) as usize;
    for k in 0..steps {
        let t = k as f64 * sim.dt;
        if at_goal(&s, &p, goal, teb, planner.goal_radius) {
            log.outcome = Outcome::ReachedGoal;
            break;
        }
        let sensed = world.sense(s.position(), sensor);
        let exhausted = match &traj {
            None => true,
            Some((tr, t0)) => t - t0 >= tr.duration() && p.distance(goal) > planner.goal_radius,
        };
        let parked = traj.is_some() && p.distance(goal) <= planner.goal_radius;
        let mut replanned = false;
        if (sensed.any_new || exhausted) && !parked {
            let aug: Vec<_> = world
                .revealed_obstacles()
                .iter()
                .map(|o| augment_obstacle(o, teb))
                .collect();
            let cfg = PlannerConfig {
                seed: derive_seed(sim.seed, log.replans as u64),
                ..*planner
            };
            match plan(p, *goal, &aug, &cfg).and_then(|path| to_trajectory(&path, sim.v_plan)) {
                Ok(tr) => traj = Some((tr, t)),
                Err(e) => {
                    log.outcome = Outcome::PlannerFailed {
                        reason: e.to_string(),
                    };
                    break;
                }
            }
            log.replans += 1;
            replanned = true;
        }
        let p_next = match &traj {
            Some((tr, t0)) => tr.sample(t + sim.dt - t0).state,
            None => p,
        };
        let r_next = relative_state(&s, &p_next);

        let tic = clock.now();
        let (values_next, vclamp) = tables.values(&r_next);
        let mode = select_mode_from_values(&values_next, teb, switch);
        let costate = tables.costate(&r_next);
        let u = match mode {
            ControllerMode::Safety => safety_from_costate(&costate, params),
            ControllerMode::Performance => performance_control(&r_next, tables, params, switch),
        };
        log.latencies.push(clock.now() - tic);

        let d = disturbance_sample(&sim.disturbance, &costate, params, &mut wind_rng);
        s = match integrate_tracking(&s, &u, &d, params, sim.dt, sim.substeps) {
            Ok(next) => next,
            Err(e) => {
                log.outcome = Outcome::AttitudeAbort {
                    reason: e.to_string(),
                };
                break;
            }
        };
        let up = PlannerControl {
            bx: (p_next.x - p.x) / sim.dt,
            by: (p_next.y - p.y) / sim.dt,
            bz: (p_next.z - p.z) / sim.dt,
        };
        p = p_next;
        let r = relative_state(&s, &p);
        let (values, rclamp) = tables.values(&r);
        log.records.push(StepRecord {
            t: t + sim.dt,
            s,
            p,
            r,
            values,
            mode,
            u,
            up,
            d,
            clamped: vclamp || costate.clamped || rclamp,
            replanned,
            collision: world.point_in_obstacle(s.position()),
            teb_hits_obstacle: world.box_hits_obstacle(&teb_in_planner_frame(
                &TrackingState::at_rest(p),
                teb,
            )),
        });
    }
    if log.outcome == Outcome::TimedOut && at_goal(&s, &p, goal, teb, planner.goal_radius) {
        log.outcome = Outcome::ReachedGoal;
    }
    Ok(log)
}

/// Trace of a closed-loop game rollout on the relative system.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Subsystem values at the start.
    pub initial: [f64; 3],
    /// Largest subsystem values seen along the way.
    pub peak: [f64; 3],
    pub clamped: bool,
}

/// Optimal tracker against the worst planner and wind, re-deciding every
/// `control_dt` seconds.
pub fn adversarial_rollout(
    r0: &RelativeState,
    tables: &TrackingTables,
    params: &ModelParams,
    duration: f64,
    control_dt: f64,
    substeps: usize,
) -> Result<Rollout> {
    let (initial, mut clamped) = tables.values(r0);
    let mut peak = initial;
    let mut r = *r0;
    let steps = libm::ceil(duration / control_dt) as usize;
    for _ in 0..steps {
        let c = tables.costate(&r);
        let u = safety_from_costate(&c, params);
        let up = adversary_from_costate(&c, params);
        let d = disturbance_from_costate(&c, params);
        r = integrate_relative(&r, &u, &up, &d, params, control_dt, substeps)?;
        let (v, cl) = tables.values(&r);
        clamped |= cl || c.clamped;
        for i in 0..3 {
            peak[i] = peak[i].max(v[i]);
        }
    }
    Ok(Rollout {
        initial,
        peak,
        clamped,
    })
}
