//! Static box obstacles, the limited-range sensor and ground-truth checks.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dynamics::PlannerState;
use crate::teb::{Aabb, TebBox};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Per-axis reveal distance (m).
    pub range: f64,
    /// Largest edge of a revealable obstacle cell (m).
    pub cell_edge: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            range: 2.0,
            cell_edge: 1.5,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "sensor range must be positive, got {}",
                self.range
            )));
        }
        if !(self.cell_edge > 0.0 && self.cell_edge.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "cell edge must be positive, got {}",
                self.cell_edge
            )));
        }
        Ok(())
    }
}

/// Smallest sensor range that keeps the planner from committing into unseen
/// obstacles: `2·max(half_width) + dx_plan`.
pub fn min_sensing_distance(teb: &TebBox, dx_plan: f64) -> f64 {
    2.0 * teb.max_half_width() + dx_plan
}

pub fn check_sensor_range(range: f64, teb: &TebBox, dx_plan: f64) -> Result<()> {
    let required = min_sensing_distance(teb, dx_plan);
    if range < required {
        return Err(Error::SensingRange { range, required });
    }
    Ok(())
}

/// A box obstacle split into cells that are revealed independently.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    aabb: Aabb,
    cells: Vec<Aabb>,
    revealed: Vec<bool>,
}

impl Obstacle {
    pub fn new(aabb: Aabb, cell_edge: f64) -> Result<Self> {
        if !(cell_edge > 0.0) {
            return Err(Error::InvalidConfig("cell edge must be positive".into()));
        }
        let ext = aabb.extent();
        let n: [usize; 3] = core::array::from_fn(|i| {
            (libm::ceil(ext[i] / cell_edge) as usize).max(1)
        });
        let split = |i: usize, k: usize| -> f64 {
            if k == n[i] {
                aabb.max[i]
            } else {
                aabb.min[i] + ext[i] * k as f64 / n[i] as f64
            }
        };
        let mut cells = Vec::with_capacity(n[0] * n[1] * n[2]);
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    cells.push(Aabb {
                        min: [split(0, i), split(1, j), split(2, k)],
                        max: [split(0, i + 1), split(1, j + 1), split(2, k + 1)],
                    });
                }
            }
        }
        let revealed = alloc::vec![false; cells.len()];
        Ok(Self {
            aabb,
            cells,
            revealed,
        })
    }

    pub fn aabb(&self) -> &Aabb {
        &self.aabb
    }

    pub fn cells(&self) -> &[Aabb] {
        &self.cells
    }

    pub fn revealed(&self) -> &[bool] {
        &self.revealed
    }
}

/// Obstacles, workspace bounds and mission endpoints as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub bounds: Aabb,
    pub obstacles: Vec<Aabb>,
    pub start: PlannerState,
    pub goal: PlannerState,
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        Aabb::new(self.bounds.min, self.bounds.max)?;
        for o in &self.obstacles {
            Aabb::new(o.min, o.max)?;
        }
        for (name, p) in [("start", self.start), ("goal", self.goal)] {
            if !self.bounds.contains(p.to_array()) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{name} {:?} lies outside the workspace",
                    p.to_array()
                )));
            }
        }
        Ok(())
    }

    /// Obstacle course from (-12,0,0) to (12,0,0): three walls, each with a
    /// single opening, plus a pillar between the last two.
    pub fn paper_course() -> Self {
        let b = |min: [f64; 3], max: [f64; 3]| Aabb { min, max };
        Self {
            bounds: b([-14.0, -6.0, -3.0], [14.0, 6.0, 3.0]),
            obstacles: alloc::vec![
                // wall at x = -6 with an opening at y in [1, 5]
                b([-6.5, -6.0, -3.0], [-5.5, 1.0, 3.0]),
                b([-6.5, 5.0, -3.0], [-5.5, 6.0, 3.0]),
                // wall at x = 0 with an opening at y in [-5, -1]
                b([-0.5, -1.0, -3.0], [0.5, 6.0, 3.0]),
                b([-0.5, -6.0, -3.0], [0.5, -5.0, 3.0]),
                // pillar
                b([2.5, -1.5, -3.0], [3.5, 1.5, 3.0]),
                // wall at x = 6 with an opening at z in [-1.5, 2]
                b([5.5, -6.0, -3.0], [6.5, 6.0, -1.5]),
                b([5.5, -6.0, 2.0], [6.5, 6.0, 3.0]),
            ],
            start: PlannerState::new(-12.0, 0.0, 0.0),
            goal: PlannerState::new(12.0, 0.0, 0.0),
        }
    }
}

/// Cells newly revealed by one sensor sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sensed {
    pub cells: Vec<Aabb>,
    pub any_new: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub bounds: Aabb,
    obstacles: Vec<Obstacle>,
}

impl World {
    pub fn new(bounds: Aabb, boxes: &[Aabb], cell_edge: f64) -> Result<Self> {
        let obstacles = boxes
            .iter()
            .map(|b| Obstacle::new(*b, cell_edge))
            .collect::<Result<_>>()?;
        Ok(Self { bounds, obstacles })
    }

    pub fn from_environment(env: &Environment, sensor: &SensorConfig) -> Result<Self> {
        env.validate()?;
        Self::new(env.bounds, &env.obstacles, sensor.cell_edge)
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn raw_boxes(&self) -> impl Iterator<Item = &Aabb> {
        self.obstacles.iter().map(|o| &o.aabb)
    }

    /// Reveal every cell within per-axis distance `cfg.range` of `pos`.
    pub fn sense(&mut self, pos: [f64; 3], cfg: &SensorConfig) -> Sensed {
        let mut out = Sensed::default();
        for o in &mut self.obstacles {
            if o.aabb.chebyshev_distance(pos) > cfg.range {
                continue;
            }
            for (cell, seen) in o.cells.iter().zip(o.revealed.iter_mut()) {
                if !*seen && cell.chebyshev_distance(pos) <= cfg.range {
                    *seen = true;
                    out.cells.push(*cell);
                }
            }
        }
        out.any_new = !out.cells.is_empty();
        out
    }

    pub fn revealed_obstacles(&self) -> Vec<Aabb> {
        self.obstacles
            .iter()
            .flat_map(|o| {
                o.cells
                    .iter()
                    .zip(&o.revealed)
                    .filter(|(_, r)| **r)
                    .map(|(c, _)| *c)
            })
            .collect()
    }

    pub fn revealed_count(&self) -> usize {
        self.obstacles
            .iter()
            .map(|o| o.revealed.iter().filter(|r| **r).count())
            .sum()
    }

    /// Ground truth, closed boxes.
    pub fn point_in_obstacle(&self, pos: [f64; 3]) -> bool {
        self.obstacles.iter().any(|o| o.aabb.contains(pos))
    }

    /// Whether a box touches any raw obstacle.
    pub fn box_hits_obstacle(&self, b: &Aabb) -> bool {
        self.obstacles.iter().any(|o| o.aabb.intersects(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube(lo: f64, hi: f64) -> Aabb {
        Aabb {
            min: [lo; 3],
            max: [hi; 3],
        }
    }

    fn world(boxes: &[Aabb]) -> World {
        World::new(cube(-20.0, 20.0), boxes, 1.5).unwrap()
    }

    #[test]
    fn sensing_examples() {
        let mut w = world(&[cube(0.0, 1.0)]);
        let cfg = SensorConfig::default();
        let s = w.sense([0.5; 3], &cfg);
        assert!(s.any_new);
        assert_eq!(s.cells, alloc::vec![cube(0.0, 1.0)]);
        assert!(!w.sense([0.5; 3], &cfg).any_new);

        let mut far = world(&[cube(0.0, 1.0)]);
        assert!(!far.sense([3.5, 3.5, 3.5], &cfg).any_new);
        assert!(far.revealed_obstacles().is_empty());
        // Chebyshev: 2 m along one axis is still in range.
        assert!(far.sense([3.0, 0.5, 0.5], &cfg).any_new);
    }

    #[test]
    fn cells_tile_the_box() {
        let b = Aabb {
            min: [0.0, -1.0, 2.0],
            max: [4.0, 0.5, 2.3],
        };
        let o = Obstacle::new(b, 1.5).unwrap();
        assert_eq!(o.cells().len(), 3);
        let vol: f64 = o.cells().iter().map(Aabb::volume).sum();
        assert!((vol - b.volume()).abs() < 1e-12);
        for c in o.cells() {
            for i in 0..3 {
                assert!(c.max[i] - c.min[i] <= 1.5 + 1e-12);
            }
        }
        let mut w = world(&[b]);
        w.sense([2.0, 0.0, 2.0], &SensorConfig { range: 10.0, ..Default::default() });
        let revealed: f64 = w.revealed_obstacles().iter().map(Aabb::volume).sum();
        assert!((revealed - b.volume()).abs() < 1e-12);
    }

    #[test]
    fn point_membership_is_closed() {
        let w = world(&[cube(0.0, 1.0)]);
        assert!(w.point_in_obstacle([0.5; 3]));
        assert!(w.point_in_obstacle([1.0, 0.5, 0.5]));
        assert!(!w.point_in_obstacle([9.0; 3]));
    }

    #[test]
    fn sensing_distance_examples() {
        let teb = |h: f64| TebBox {
            half_widths: [h; 3],
            v_bar: [h; 3],
            epsilon: 0.0,
        };
        assert!((min_sensing_distance(&teb(0.81), 0.5 * 0.1) - 1.67).abs() < 1e-12);
        assert!(check_sensor_range(2.0, &teb(0.81), 0.05).is_ok());
        assert_eq!(min_sensing_distance(&teb(0.0), 0.05), 0.05);
        assert!(matches!(
            check_sensor_range(1.0, &teb(0.81), 0.05),
            Err(Error::SensingRange { .. })
        ));
    }

    #[test]
    fn paper_course_is_valid() {
        let env = Environment::paper_course();
        env.validate().unwrap();
        let w = World::from_environment(&env, &SensorConfig::default()).unwrap();
        assert!(!w.point_in_obstacle(env.start.to_array()));
        assert!(!w.point_in_obstacle(env.goal.to_array()));
    }

    proptest! {
        #[test]
        fn reveal_is_monotone_and_conservative(
            path in proptest::collection::vec(proptest::array::uniform3(-6.0f64..6.0), 1..20),
            range in 0.5f64..3.0,
        ) {
            let boxes = [cube(-1.0, 1.0), Aabb { min: [2.0, -4.0, -1.0], max: [3.0, 4.0, 0.5] }];
            let mut w = world(&boxes);
            let cfg = SensorConfig { range, cell_edge: 1.5 };
            let mut count = 0;
            for p in &path {
                w.sense(*p, &cfg);
                let now = w.revealed_count();
                prop_assert!(now >= count);
                count = now;
            }
            // Every obstacle point in range of a visited position is covered.
            let revealed = w.revealed_obstacles();
            for p in &path {
                for b in &boxes {
                    let q: [f64; 3] = core::array::from_fn(|i| p[i].clamp(b.min[i], b.max[i]));
                    if (0..3).all(|i| (q[i] - p[i]).abs() <= range) {
                        prop_assert!(revealed.iter().any(|c| c.contains(q)));
                    }
                }
            }
        }
    }
}
