//! Tracking error bound extraction and obstacle augmentation.

use serde::{Deserialize, Serialize};

use crate::dynamics::TrackingState;
use crate::grid::{ValueTable, MAX_DIM};
use crate::solver::ConvergenceReport;
use crate::{Error, Result};

/// Axis-aligned box in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        if (0..3).any(|i| !(min[i] <= max[i]) || !min[i].is_finite() || !max[i].is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "box min {min:?} must not exceed max {max:?}"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn centered(center: [f64; 3], half_widths: [f64; 3]) -> Self {
        Self {
            min: core::array::from_fn(|i| center[i] - half_widths[i]),
            max: core::array::from_fn(|i| center[i] + half_widths[i]),
        }
    }

    /// Closed membership: faces count as inside.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    /// Closed intersection: touching boxes intersect.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn translate(&self, offset: [f64; 3]) -> Self {
        Self {
            min: core::array::from_fn(|i| self.min[i] + offset[i]),
            max: core::array::from_fn(|i| self.max[i] + offset[i]),
        }
    }

    pub fn center(&self) -> [f64; 3] {
        core::array::from_fn(|i| 0.5 * (self.min[i] + self.max[i]))
    }

    pub fn extent(&self) -> [f64; 3] {
        core::array::from_fn(|i| self.max[i] - self.min[i])
    }

    pub fn volume(&self) -> f64 {
        self.extent().iter().product()
    }

    /// Per-axis (Chebyshev) distance from `p` to the box, zero inside.
    pub fn chebyshev_distance(&self, p: [f64; 3]) -> f64 {
        (0..3)
            .map(|i| (self.min[i] - p[i]).max(p[i] - self.max[i]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Per-axis half-widths of the box-shaped tracking error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TebBox {
    pub half_widths: [f64; 3],
    /// Minimum value of the X, Y and Z subsystem tables.
    pub v_bar: [f64; 3],
    pub epsilon: f64,
}

impl TebBox {
    /// Level defining the bound for subsystem `axis`.
    pub fn level(&self, axis: usize) -> f64 {
        self.v_bar[axis] + self.epsilon
    }

    pub fn max_half_width(&self) -> f64 {
        self.half_widths.iter().copied().fold(0.0, f64::max)
    }
}

pub fn min_value(table: &ValueTable) -> f64 {
    table.min_value()
}

/// Largest `|position|` reached by the sub-level set `{V <= level}` of the
/// multilinear interpolant.
///
/// Along every grid line in the position direction the interpolant is
/// piecewise linear, and any point of the sub-level set lies between lines
/// that are themselves below the level, so scanning lines is exact. Since
/// `V >= |position|` at every node, the extent can never exceed `level`; a
/// table that breaks this is rejected.
pub fn position_extent(table: &ValueTable, level: f64) -> Result<f64> {
    let min = table.min_value();
    if level < min {
        return Err(Error::EmptySublevelSet { level, min });
    }
    let grid = &table.grid;
    let axis = grid.axis(0);
    let stride = grid.strides()[0];
    let h = axis.spacing();
    let v = &table.values;
    let mut extent = f64::NEG_INFINITY;
    for line in 0..stride {
        for j in 0..axis.count {
            let flat = line + j * stride;
            if v[flat] <= level {
                extent = extent.max(axis.coord(j).abs());
            }
            if j + 1 == axis.count {
                continue;
            }
            let (a, b) = (v[flat], v[flat + stride]);
            // Crossing inside the cell where exactly one end is below the level.
            if (a <= level) != (b <= level) {
                let t = (level - a) / (b - a);
                let x = axis.coord(j) + t * h;
                extent = extent.max(x.abs());
            }
        }
    }
    if extent > level + 1e-9 {
        return Err(Error::Containment { extent, level });
    }
    Ok(extent)
}

/// Box bound from the X, Y, Z tables at levels `V̄_i + ε`.
pub fn teb_box(
    tables: [&ValueTable; 3],
    reports: [&ConvergenceReport; 3],
    epsilon: f64,
) -> Result<TebBox> {
    let mut half_widths = [0.0; 3];
    let mut v_bar = [0.0; 3];
    for i in 0..3 {
        if !(tables[i].meta.converged && reports[i].converged) {
            return Err(Error::Unconverged(tables[i].meta.subsystem.clone()));
        }
        v_bar[i] = tables[i].min_value();
        half_widths[i] = position_extent(tables[i], v_bar[i] + epsilon)?;
        if !(half_widths[i] > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "tracking error bound for {} has zero width",
                tables[i].meta.subsystem
            )));
        }
    }
    Ok(TebBox {
        half_widths,
        v_bar,
        epsilon,
    })
}

/// Minkowski sum of an obstacle with the error box.
pub fn augment_obstacle(o: &Aabb, teb: &TebBox) -> Aabb {
    Aabb {
        min: core::array::from_fn(|i| o.min[i] - teb.half_widths[i]),
        max: core::array::from_fn(|i| o.max[i] + teb.half_widths[i]),
    }
}

/// Planner positions compatible with tracker state `s`: the error box
/// centred on the tracker position.
pub fn teb_in_planner_frame(s: &TrackingState, teb: &TebBox) -> Aabb {
    Aabb::centered(s.position(), teb.half_widths)
}

/// Whether every node of the sub-level set `{V <= level}` satisfies
/// `|position| <= level`. Used by the verification suites.
pub fn sublevel_contained(table: &ValueTable, level: f64) -> bool {
    let mut idx = [0usize; MAX_DIM];
    table.values.iter().enumerate().all(|(flat, &v)| {
        if v > level {
            return true;
        }
        table.grid.multi_index(flat, &mut idx);
        table.grid.axis(0).coord(idx[0]).abs() <= level + 1e-12
    })
}
