//! Single-tree RRT over 3D position and constant-speed trajectories.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dynamics::PlannerState;
use crate::rng::Rng;
use crate::teb::Aabb;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Maximum tree edge length (m).
    pub step: f64,
    pub goal_bias: f64,
    pub max_iters: usize,
    pub goal_radius: f64,
    pub seed: u64,
    pub bounds: Aabb,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            goal_bias: 0.1,
            max_iters: 20000,
            goal_radius: 0.25,
            seed: 0,
            bounds: Aabb {
                min: [-14.0, -6.0, -3.0],
                max: [14.0, 6.0, 3.0],
            },
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig("planner step must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(Error::InvalidConfig("goal bias must lie in [0, 1]".into()));
        }
        if !(self.goal_radius >= 0.0) {
            return Err(Error::InvalidConfig("goal radius must be non-negative".into()));
        }
        Aabb::new(self.bounds.min, self.bounds.max)?;
        Ok(())
    }
}

/// Whether the closed segment `a`-`b` misses every box. Touching a face
/// counts as a hit.
pub fn segment_free(a: [f64; 3], b: [f64; 3], obstacles: &[Aabb]) -> bool {
    obstacles.iter().all(|o| !segment_hits(a, b, o))
}

fn segment_hits(a: [f64; 3], b: [f64; 3], o: &Aabb) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..3 {
        let d = b[i] - a[i];
        if d == 0.0 {
            if a[i] < o.min[i] || a[i] > o.max[i] {
                return false;
            }
            continue;
        }
        let (mut lo, mut hi) = ((o.min[i] - a[i]) / d, (o.max[i] - a[i]) / d);
        if lo > hi {
            core::mem::swap(&mut lo, &mut hi);
        }
        t0 = t0.max(lo);
        t1 = t1.min(hi);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Piecewise-linear path with at least two distinct consecutive waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPolyline {
    waypoints: Vec<PlannerState>,
}

impl PathPolyline {
    pub fn new(waypoints: Vec<PlannerState>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath("a path needs at least two waypoints"));
        }
        if waypoints.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPath("consecutive waypoints coincide"));
        }
        if waypoints.iter().any(|w| !w.to_array().iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidPath("non-finite waypoint"));
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[PlannerState] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    pub fn is_free(&self, obstacles: &[Aabb]) -> bool {
        self.waypoints
            .windows(2)
            .all(|w| segment_free(w[0].to_array(), w[1].to_array(), obstacles))
    }
}

fn steer(from: [f64; 3], to: [f64; 3], step: f64) -> [f64; 3] {
    let d = dist(from, to);
    if d <= step {
        return to;
    }
    let s = step / d;
    core::array::from_fn(|i| from[i] + s * (to[i] - from[i]))
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    libm::sqrt((0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum())
}

/// Plans from `start` towards `goal` around the (already augmented) boxes.
///
/// A direct segment is tried first. Otherwise the tree grows from `start`
/// with goal-biased samples; every new node also tries a straight link to the
/// goal, and the search stops early once a node lands within `goal_radius`.
pub fn plan(
    start: PlannerState,
    goal: PlannerState,
    obstacles: &[Aabb],
    cfg: &PlannerConfig,
) -> Result<PathPolyline> {
    let (s, g) = (start.to_array(), goal.to_array());
    if obstacles.iter().any(|o| o.contains(s)) {
        return Err(Error::StartInObstacle);
    }
    if obstacles.iter().any(|o| o.contains(g)) {
        return Err(Error::GoalInObstacle);
    }
    if s == g {
        return Err(Error::InvalidPath("start and goal coincide"));
    }
    if segment_free(s, g, obstacles) {
        return PathPolyline::new(alloc::vec![start, goal]);
    }

    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut nodes: Vec<[f64; 3]> = alloc::vec![s];
    let mut parent: Vec<usize> = alloc::vec![0];
    let b = &cfg.bounds;
    for _ in 0..cfg.max_iters {
        let sample = if rng.next_f64() < cfg.goal_bias {
            g
        } else {
            core::array::from_fn(|i| rng.uniform(b.min[i], b.max[i]))
        };
        let mut near = 0;
        let mut best = f64::INFINITY;
        for (k, n) in nodes.iter().enumerate() {
            let d = dist(*n, sample);
            if d < best {
                best = d;
                near = k;
            }
        }
        let new = steer(nodes[near], sample, cfg.step);
        if new == nodes[near] || !b.contains(new) || !segment_free(nodes[near], new, obstacles) {
            continue;
        }
        nodes.push(new);
        parent.push(near);
        let leaf = nodes.len() - 1;
        let links_goal = new == g || segment_free(new, g, obstacles);
        if links_goal || dist(new, g) <= cfg.goal_radius {
            let mut chain = Vec::new();
            let mut k = leaf;
            loop {
                chain.push(PlannerState::from_array(nodes[k]));
                if k == 0 {
                    break;
                }
                k = parent[k];
            }
            chain.reverse();
            if links_goal && new != g {
                chain.push(goal);
            }
            return PathPolyline::new(chain);
        }
    }
    Err(Error::PlannerExhausted {
        iterations: cfg.max_iters,
    })
}

/// A path traversed at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    waypoints: Vec<PlannerState>,
    times: Vec<f64>,
    speed: f64,
}

/// Planner state at a query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub state: PlannerState,
    /// The query time lay past the end of the trajectory.
    pub clamped: bool,
}

pub fn to_trajectory(path: &PathPolyline, speed: f64) -> Result<Trajectory> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!(
            "planner speed must be positive, got {speed}"
        )));
    }
    let wp = path.waypoints().to_vec();
    let mut times = Vec::with_capacity(wp.len());
    let mut t = 0.0;
    times.push(t);
    for w in wp.windows(2) {
        t += w[0].distance(&w[1]) / speed;
        times.push(t);
    }
    Ok(Trajectory {
        waypoints: wp,
        times,
        speed,
    })
}

impl Trajectory {
    pub fn waypoints(&self) -> &[PlannerState] {
        &self.waypoints
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn end(&self) -> PlannerState {
        *self.waypoints.last().expect("trajectory has waypoints")
    }

    /// Linear interpolation in time; times past the end return the final
    /// waypoint with `clamped` set, negative times the first waypoint.
    pub fn sample(&self, t: f64) -> TrajectorySample {
        if t >= self.duration() {
            return TrajectorySample {
                state: self.end(),
                clamped: t > self.duration(),
            };
        }
        if t <= 0.0 {
            return TrajectorySample {
                state: self.waypoints[0],
                clamped: false,
            };
        }
        let k = self.times.partition_point(|&tk| tk <= t) - 1;
        let (a, b) = (self.waypoints[k].to_array(), self.waypoints[k + 1].to_array());
        let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        TrajectorySample {
            state: PlannerState::from_array(core::array::from_fn(|i| a[i] + s * (b[i] - a[i]))),
            clamped: false,
        }
    }
}

pub fn sample_trajectory(traj: &Trajectory, t: f64) -> TrajectorySample {
    traj.sample(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn cube(lo: f64, hi: f64) -> Aabb {
        Aabb {
            min: [lo; 3],
            max: [hi; 3],
        }
    }

    fn p(x: f64, y: f64, z: f64) -> PlannerState {
        PlannerState::new(x, y, z)
    }

    #[test]
    fn segment_examples() {
        assert!(!segment_free([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], &[cube(-0.5, 0.5)]));
        assert!(segment_free([-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], &[cube(2.0, 3.0)]));
        assert!(!segment_free([-1.0, 0.0, 0.0], [-0.5, 0.0, 0.0], &[cube(-0.5, 0.5)]));
        // Grazing an edge is a hit too.
        assert!(!segment_free([-1.0, 0.5, 0.5], [1.0, 0.5, 0.5], &[cube(-0.5, 0.5)]));
        assert!(segment_free([-1.0, 0.51, 0.0], [1.0, 0.51, 0.0], &[cube(-0.5, 0.5)]));
    }

    #[test]
    fn empty_world_takes_the_shortcut() {
        let path = plan(p(-1.0, 0.0, 0.0), p(1.0, 0.0, 0.0), &[], &PlannerConfig::default())
            .unwrap();
        assert_eq!(path.waypoints(), &[p(-1.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]);
    }

    fn wall_with_gap() -> Vec<Aabb> {
        vec![
            Aabb {
                min: [-0.5, -6.0, -3.0],
                max: [0.5, 1.0, 3.0],
            },
            Aabb {
                min: [-0.5, 2.5, -3.0],
                max: [0.5, 6.0, 3.0],
            },
        ]
    }

    #[test]
    fn endpoints_inside_obstacles_are_refused() {
        let cfg = PlannerConfig::default();
        let o = [cube(-0.5, 0.5)];
        assert_eq!(plan(p(0.0, 0.0, 0.0), p(3.0, 0.0, 0.0), &o, &cfg), Err(Error::StartInObstacle));
        assert_eq!(plan(p(3.0, 0.0, 0.0), p(0.5, 0.0, 0.0), &o, &cfg), Err(Error::GoalInObstacle));
    }

    #[test]
    fn impossible_plans_exhaust() {
        let closed = [Aabb {
            min: [-0.5, -7.0, -4.0],
            max: [0.5, 7.0, 4.0],
        }];
        let cfg = PlannerConfig {
            max_iters: 300,
            ..Default::default()
        };
        assert_eq!(
            plan(p(-3.0, 0.0, 0.0), p(3.0, 0.0, 0.0), &closed, &cfg),
            Err(Error::PlannerExhausted { iterations: 300 })
        );
    }

    #[test]
    fn trajectory_examples() {
        let one = PathPolyline::new(vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0)]).unwrap();
        let t = to_trajectory(&one, 0.5).unwrap();
        assert_eq!(t.duration(), 2.0);
        assert_eq!(t.sample(0.0).state, p(0.0, 0.0, 0.0));
        assert_eq!(t.sample(1.0).state, p(0.5, 0.0, 0.0));
        let past = t.sample(5.0);
        assert!(past.clamped);
        assert_eq!(past.state, p(1.0, 0.0, 0.0));

        let two = PathPolyline::new(vec![p(0.0, 0.0, 0.0), p(0.5, 0.0, 0.0), p(0.5, 0.5, 0.0)])
            .unwrap();
        assert_eq!(to_trajectory(&two, 0.5).unwrap().times(), &[0.0, 1.0, 2.0]);

        assert!(PathPolyline::new(vec![p(1.0, 1.0, 1.0), p(1.0, 1.0, 1.0)]).is_err());
        assert!(PathPolyline::new(vec![p(1.0, 1.0, 1.0)]).is_err());
        assert!(to_trajectory(&one, 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn wall_paths_are_free_and_reproducible(seed in any::<u64>(), y0 in -4.0f64..4.0) {
            let walls = wall_with_gap();
            let cfg = PlannerConfig { seed, ..Default::default() };
            let a = plan(p(-4.0, y0, 0.0), p(4.0, -y0, 0.0), &walls, &cfg).unwrap();
            prop_assert!(a.is_free(&walls));
            let last = a.waypoints().last().unwrap();
            prop_assert!(last.distance(&p(4.0, -y0, 0.0)) <= cfg.goal_radius);
            let b = plan(p(-4.0, y0, 0.0), p(4.0, -y0, 0.0), &walls, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn samples_move_at_most_one_step(
            pts in proptest::collection::vec(proptest::array::uniform3(-5.0f64..5.0), 2..8),
            dt in 0.01f64..0.5,
        ) {
            let wps: Vec<_> = pts.iter().map(|a| PlannerState::from_array(*a)).collect();
            prop_assume!(wps.windows(2).all(|w| w[0] != w[1]));
            let traj = to_trajectory(&PathPolyline::new(wps).unwrap(), 0.5).unwrap();
            let mut prev = traj.sample(0.0).state;
            let mut t = 0.0;
            while t < traj.duration() + 1.0 {
                t += dt;
                let next = traj.sample(t).state;
                prop_assert!(prev.distance(&next) <= 0.5 * dt + 1e-9);
                prev = next;
            }
        }

        #[test]
        fn segment_test_agrees_with_dense_sampling(
            a in proptest::array::uniform3(-2.0f64..2.0),
            b in proptest::array::uniform3(-2.0f64..2.0),
        ) {
            let o = cube(-0.5, 0.5);
            let hit = (0..=2000).any(|k| {
                let s = k as f64 / 2000.0;
                o.contains(core::array::from_fn(|i| a[i] + s * (b[i] - a[i])))
            });
            // Sampling can miss a grazing hit but never invents one.
            if hit {
                prop_assert!(!segment_free(a, b, &[o]));
            }
        }
    }
}
