//! Cartesian grids, multilinear look-up, and finite-difference gradient tables.
//!
//! Values are stored flat in row-major order with the last dimension varying
//! fastest.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Highest grid dimension supported by the fixed-size index buffers.
pub const MAX_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(label: impl Into<String>, min: f64, max: f64, count: usize) -> Self {
        Self {
            label: label.into(),
            min,
            max,
            count,
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    /// Largest absolute coordinate on the axis.
    pub fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Axis>", into = "Vec<Axis>")]
pub struct GridSpec {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl TryFrom<Vec<Axis>> for GridSpec {
    type Error = Error;

    fn try_from(axes: Vec<Axis>) -> Result<Self> {
        GridSpec::new(axes)
    }
}

impl From<GridSpec> for Vec<Axis> {
    fn from(g: GridSpec) -> Self {
        g.axes
    }
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(Error::InvalidGrid(alloc::format!(
                "grid needs between 1 and {MAX_DIM} dimensions, got {}",
                axes.len()
            )));
        }
        for a in &axes {
            if !(a.min.is_finite() && a.max.is_finite()) || a.min >= a.max {
                return Err(Error::InvalidGrid(alloc::format!(
                    "axis {} needs finite min < max, got [{}, {}]",
                    a.label,
                    a.min,
                    a.max
                )));
            }
            if a.count < 3 {
                return Err(Error::InvalidGrid(alloc::format!(
                    "axis {} needs at least 3 nodes, got {}",
                    a.label,
                    a.count
                )));
            }
        }
        let mut strides = vec![1usize; axes.len()];
        for d in (0..axes.len() - 1).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].count;
        }
        let len = strides[0] * axes[0].count;
        Ok(Self { axes, strides, len })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn spacing(&self, d: usize) -> f64 {
        self.axes[d].spacing()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for (d, s) in self.strides.iter().enumerate() {
            out[d] = flat / s;
            flat %= s;
        }
    }

    pub fn node_coords(&self, flat: usize) -> Result<Vec<f64>> {
        if flat >= self.len {
            return Err(Error::IndexOutOfRange {
                index: flat,
                len: self.len,
            });
        }
        let mut idx = [0usize; MAX_DIM];
        self.multi_index(flat, &mut idx);
        Ok(self
            .axes
            .iter()
            .zip(&idx)
            .map(|(a, &i)| a.coord(i))
            .collect())
    }

    /// Grids with the same extents and node counts; labels are ignored.
    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.ndim() == other.ndim()
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.min == b.min && a.max == b.max && a.count == b.count)
    }

    /// Multilinear interpolation of `values` at `point`.
    ///
    /// Coordinates outside the grid are clamped per dimension to the
    /// boundary and the result is flagged.
    pub fn interpolate(&self, values: &[f64], point: &[f64]) -> Interpolated {
        debug_assert_eq!(values.len(), self.len);
        debug_assert_eq!(point.len(), self.ndim());
        let n = self.ndim();
        let mut base = 0usize;
        let mut frac = [0.0f64; MAX_DIM];
        let mut clamped = false;
        for d in 0..n {
            let a = &self.axes[d];
            let mut x = point[d];
            if x < a.min {
                x = a.min;
                clamped = true;
            } else if x > a.max {
                x = a.max;
                clamped = true;
            }
            let h = a.spacing();
            let t = (x - a.min) / h;
            let mut i = libm::floor(t) as usize;
            if i > a.count - 2 {
                i = a.count - 2;
            }
            let f = t - i as f64;
            frac[d] = f.clamp(0.0, 1.0);
            base += i * self.strides[d];
        }
        let mut value = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = base;
            for d in 0..n {
                if corner >> (n - 1 - d) & 1 == 1 {
                    w *= frac[d];
                    idx += self.strides[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            if w != 0.0 {
                value += w * values[idx];
            }
        }
        Interpolated { value, clamped }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub value: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    /// Name of the game the table was solved for (`X4`, `Z2`, `scalar`, ...).
    pub subsystem: String,
    pub solver_hash: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub meta: TableMeta,
}

impl ValueTable {
    pub fn new(grid: GridSpec, values: Vec<f64>, meta: TableMeta) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values, meta })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: GridSpec, meta: TableMeta, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut coords = [0.0; MAX_DIM];
        let mut idx = [0usize; MAX_DIM];
        let n = grid.ndim();
        for flat in 0..grid.len() {
            grid.multi_index(flat, &mut idx);
            for d in 0..n {
                coords[d] = grid.axis(d).coord(idx[d]);
            }
            values.push(f(&coords[..n]));
        }
        Self { grid, values, meta }
    }

    pub fn interpolate(&self, point: &[f64]) -> Interpolated {
        self.grid.interpolate(&self.values, point)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Partial derivatives of a value table, one flat array per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTable {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

impl GradientTable {
    pub fn component(&self, d: usize) -> &[f64] {
        &self.components[d]
    }

    /// Interpolates every component at `point` into `out`; returns the clamp flag.
    pub fn interpolate_into(&self, point: &[f64], out: &mut [f64]) -> bool {
        let mut clamped = false;
        for (d, comp) in self.components.iter().enumerate() {
            let it = self.grid.interpolate(comp, point);
            out[d] = it.value;
            clamped |= it.clamped;
        }
        clamped
    }
}

/// Central differences at interior nodes, first-order one-sided differences
/// at boundary nodes.
pub fn gradient_tables(table: &ValueTable) -> GradientTable {
    let grid = &table.grid;
    let v = &table.values;
    let n = grid.ndim();
    let mut components = Vec::with_capacity(n);
    let mut idx = [0usize; MAX_DIM];
    for d in 0..n {
        let stride = grid.strides()[d];
        let count = grid.axis(d).count;
        let h = grid.spacing(d);
        let mut comp = vec![0.0; grid.len()];
        for (flat, out) in comp.iter_mut().enumerate() {
            grid.multi_index(flat, &mut idx);
            let i = idx[d];
            *out = if i == 0 {
                (v[flat + stride] - v[flat]) / h
            } else if i + 1 == count {
                (v[flat] - v[flat - stride]) / h
            } else {
                (v[flat + stride] - v[flat - stride]) / (2.0 * h)
            };
        }
        components.push(comp);
    }
    GradientTable {
        grid: grid.clone(),
        components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> TableMeta {
        TableMeta {
            subsystem: "test".into(),
            solver_hash: 0,
            converged: true,
        }
    }

    fn grid1(min: f64, max: f64, n: usize) -> GridSpec {
        GridSpec::new(vec![Axis::new("x", min, max, n)]).unwrap()
    }

    fn grid4() -> GridSpec {
        GridSpec::new(vec![
            Axis::new("a", -1.0, 1.0, 5),
            Axis::new("b", 0.0, 2.0, 5),
            Axis::new("c", -0.35, 0.35, 5),
            Axis::new("d", -2.0, 3.0, 5),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_degenerate_axes() {
        assert!(GridSpec::new(vec![Axis::new("x", 1.0, 0.0, 5)]).is_err());
        assert!(GridSpec::new(vec![Axis::new("x", 0.0, 1.0, 2)]).is_err());
        assert!(GridSpec::new(Vec::new()).is_err());
    }

    #[test]
    fn node_coordinate_examples() {
        assert_eq!(grid1(-1.0, 1.0, 3).node_coords(1).unwrap(), vec![0.0]);
        let g = GridSpec::new(vec![Axis::new("x", 0.0, 1.0, 3), Axis::new("y", 0.0, 1.0, 3)])
            .unwrap();
        assert_eq!(g.node_coords(4).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(
            g.node_coords(9),
            Err(Error::IndexOutOfRange { index: 9, len: 9 })
        ));
    }

    #[test]
    fn flat_index_round_trip() {
        let g = grid4();
        assert_eq!(g.len(), 625);
        let mut idx = [0usize; MAX_DIM];
        for flat in 0..g.len() {
            g.multi_index(flat, &mut idx);
            assert_eq!(g.flat_index(&idx[..4]), flat);
            let coords = g.node_coords(flat).unwrap();
            for d in 0..4 {
                assert_eq!(coords[d], g.axis(d).coord(idx[d]));
            }
        }
    }

    #[test]
    fn interpolation_examples() {
        let t = ValueTable::from_fn(grid1(0.0, 1.0, 11), meta(), |x| 3.0 * x[0]);
        let at_node = t.interpolate(&[0.3]);
        assert!((at_node.value - t.values[3]).abs() < 1e-15);
        assert!(!at_node.clamped);
        let mid = t.interpolate(&[0.05]);
        assert!((mid.value - 0.15).abs() < 1e-12);
        let out = t.interpolate(&[2.0]);
        assert_eq!(out.value, t.values[10]);
        assert!(out.clamped);
    }

    #[test]
    fn gradient_examples() {
        let t = ValueTable::from_fn(grid1(-1.0, 1.0, 9), meta(), |x| 2.0 * x[0]);
        for g in gradient_tables(&t).component(0) {
            assert!((g - 2.0).abs() < 1e-12);
        }

        // |x| on 21 nodes: spacing 0.1, kink at node 10.
        let t = ValueTable::from_fn(grid1(-1.0, 1.0, 21), meta(), |x| x[0].abs());
        let grad = gradient_tables(&t);
        for (i, g) in grad.component(0).iter().enumerate() {
            let x = t.grid.axis(0).coord(i);
            if x <= -0.1 + 1e-12 {
                assert!((g + 1.0).abs() < 1e-9, "node {i}: {g}");
            } else if x >= 0.1 - 1e-12 {
                assert!((g - 1.0).abs() < 1e-9, "node {i}: {g}");
            } else {
                assert!(g.abs() < 1e-12);
            }
        }

        let g2 = GridSpec::new(vec![Axis::new("x", 0.0, 1.0, 6), Axis::new("y", -1.0, 1.0, 4)])
            .unwrap();
        let t = ValueTable::from_fn(g2, meta(), |p| p[0] + 5.0 * p[1]);
        let grad = gradient_tables(&t);
        for k in 0..t.values.len() {
            assert!((grad.component(0)[k] - 1.0).abs() < 1e-12);
            assert!((grad.component(1)[k] - 5.0).abs() < 1e-12);
        }
    }

    fn affine(c: [f64; 5], p: &[f64]) -> f64 {
        c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * p[2] + c[4] * p[3]
    }

    proptest! {
        #[test]
        fn multilinear_reproduces_affine_functions(
            c in proptest::array::uniform5(-3.0f64..3.0),
            pts in proptest::collection::vec(proptest::array::uniform4(0.0f64..1.0), 1000),
        ) {
            let g = grid4();
            let t = ValueTable::from_fn(g.clone(), meta(), |p| affine(c, p));
            for u in pts {
                let p: Vec<f64> = (0..4).map(|d| {
                    let a = g.axis(d);
                    a.min + u[d] * (a.max - a.min)
                }).collect();
                let it = t.interpolate(&p);
                prop_assert!(!it.clamped);
                prop_assert!((it.value - affine(c, &p)).abs() < 1e-12);
            }
        }

        #[test]
        fn affine_gradients_are_exact(c in proptest::array::uniform5(-3.0f64..3.0)) {
            let t = ValueTable::from_fn(grid4(), meta(), |p| affine(c, p));
            let grad = gradient_tables(&t);
            for d in 0..4 {
                for g in grad.component(d) {
                    prop_assert!((g - c[d + 1]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn interpolation_is_monotone_in_node_values(
            seed_vals in proptest::collection::vec(-1.0f64..1.0, 625),
            node in 0usize..625,
            bump in 0.0f64..2.0,
            u in proptest::array::uniform4(-0.2f64..1.2),
        ) {
            let g = grid4();
            let p: Vec<f64> = (0..4).map(|d| {
                let a = g.axis(d);
                a.min + u[d] * (a.max - a.min)
            }).collect();
            let before = g.interpolate(&seed_vals, &p).value;
            let mut raised = seed_vals.clone();
            raised[node] += bump;
            let after = g.interpolate(&raised, &p).value;
            prop_assert!(after >= before - 1e-15);
        }
    }
}
