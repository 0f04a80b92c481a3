//! Episode logs and value-function slices as CSV and JSON.

use std::collections::BTreeMap;
use std::io::Write;

use fastrack_core::controller::ControllerMode;
use fastrack_core::grid::ValueTable;
use fastrack_core::sim::{EpisodeLog, Outcome, StepRecord};
use serde::Serialize;

use crate::error::{Error, Result};

/// Column order of the episode CSV.
pub const EPISODE_COLUMNS: [&str; 41] = [
    "t", "x", "vx", "theta_x", "omega_x", "y", "vy", "theta_y", "omega_y", "z", "vz", "px", "py",
    "pz", "xr", "vxr", "theta_xr", "omega_xr", "yr", "vyr", "theta_yr", "omega_yr", "zr", "vzr",
    "v_x4", "v_y4", "v_z2", "mode", "ax", "ay", "az", "bx", "by", "bz", "dx", "dy", "dz", "clamped",
    "replanned", "collision", "teb_hits_obstacle",
];

fn row(rec: &StepRecord) -> Vec<String> {
    let mut out = Vec::with_capacity(EPISODE_COLUMNS.len());
    let num = |v: f64| format!("{v:?}");
    out.push(num(rec.t));
    out.extend(rec.s.to_array().map(num));
    out.extend(rec.p.to_array().map(num));
    out.extend(rec.r.to_array().map(num));
    out.extend(rec.values.map(num));
    out.push(
        match rec.mode {
            ControllerMode::Safety => "safety",
            ControllerMode::Performance => "performance",
        }
        .into(),
    );
    out.extend([rec.u.ax, rec.u.ay, rec.u.az].map(num));
    out.extend([rec.up.bx, rec.up.by, rec.up.bz].map(num));
    out.extend([rec.d.dx, rec.d.dy, rec.d.dz].map(num));
    for flag in [rec.clamped, rec.replanned, rec.collision, rec.teb_hits_obstacle] {
        out.push(u8::from(flag).to_string());
    }
    out
}

/// One row per record, floats in shortest round-trip form.
pub fn write_episode_csv<W: Write>(log: &EpisodeLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EPISODE_COLUMNS)?;
    for rec in &log.records {
        w.write_record(row(rec))?;
    }
    w.flush().map_err(|e| Error::io("<episode csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct EpisodeJson<'a> {
    outcome: &'a Outcome,
    replans: usize,
    records: &'a [StepRecord],
}

/// Records and outcome. Latencies are wall-clock data and only enter the
/// metrics.
pub fn episode_json(log: &EpisodeLog) -> String {
    serde_json::to_string_pretty(&EpisodeJson {
        outcome: &log.outcome,
        replans: log.replans,
        records: &log.records,
    })
    .expect("episode serializes")
}

/// Parsed `export-slice` arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub fixed: BTreeMap<String, f64>,
    pub free: [String; 2],
}

impl SliceSpec {
    /// `fix` entries look like `vx=1.0`; `free` like `xr,theta_x`.
    pub fn parse(fix: &[String], free: &str) -> Result<Self> {
        let mut fixed = BTreeMap::new();
        for f in fix {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--fix expects name=value, got {f:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("--fix {k}: {v:?} is not a number")))?;
            if fixed.insert(k.trim().to_string(), v).is_some() {
                return Err(Error::Config(format!("--fix {k} given twice")));
            }
        }
        let names: Vec<&str> = free.split(',').map(str::trim).collect();
        let [a, b] = names[..] else {
            return Err(Error::Config(format!("--free expects exactly two names, got {free:?}")));
        };
        if a == b {
            return Err(Error::Config("--free names must differ".into()));
        }
        Ok(Self {
            fixed,
            free: [a.into(), b.into()],
        })
    }
}

/// `(coord_a, coord_b, value)` over the grid nodes of the two free axes.
/// Axes that are neither free nor fixed sit at zero.
pub fn slice(table: &ValueTable, spec: &SliceSpec) -> Result<Vec<[f64; 3]>> {
    let labels: Vec<&str> = table.grid.axes().iter().map(|a| a.label.as_str()).collect();
    let find = |name: &str| {
        labels
            .iter()
            .position(|l| *l == name)
            .ok_or_else(|| Error::Config(format!("no axis {name:?}; table axes are {labels:?}")))
    };
    let fa = find(&spec.free[0])?;
    let fb = find(&spec.free[1])?;
    let mut point = vec![0.0; labels.len()];
    for (k, &v) in &spec.fixed {
        let d = find(k)?;
        if d == fa || d == fb {
            return Err(Error::Config(format!("{k} is both fixed and free")));
        }
        point[d] = v;
    }
    let (ax, bx) = (table.grid.axis(fa), table.grid.axis(fb));
    let mut rows = Vec::with_capacity(ax.count * bx.count);
    for i in 0..ax.count {
        for j in 0..bx.count {
            point[fa] = ax.coord(i);
            point[fb] = bx.coord(j);
            rows.push([point[fa], point[fb], table.interpolate(&point).value]);
        }
    }
    Ok(rows)
}

pub fn write_slice_csv<W: Write>(names: &[String; 2], rows: &[[f64; 3]], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([names[0].as_str(), names[1].as_str(), "value"])?;
    for r in rows {
        w.write_record(r.map(|v| format!("{v:?}")))?;
    }
    w.flush().map_err(|e| Error::io("<slice csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use fastrack_core::grid::{Axis, GridSpec, TableMeta};

    fn cost_table() -> ValueTable {
        let grid = GridSpec::new(vec![
            Axis::new("xr", -1.0, 1.0, 5),
            Axis::new("vx", -1.0, 1.0, 3),
            Axis::new("theta_x", -0.3, 0.3, 4),
        ])
        .unwrap();
        let meta = TableMeta {
            subsystem: "X".into(),
            solver_hash: 0,
            converged: true,
        };
        ValueTable::from_fn(grid, meta, |x| x[0].abs())
    }

    #[test]
    fn slice_shape_and_cost_rows() {
        let spec = SliceSpec::parse(&["vx=0.5".into()], "xr,theta_x").unwrap();
        let rows = slice(&cost_table(), &spec).unwrap();
        assert_eq!(rows.len(), 5 * 4);
        for r in rows {
            assert!((r[2] - r[0].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_names_are_rejected() {
        let t = cost_table();
        assert!(slice(&t, &SliceSpec::parse(&[], "xr,nope").unwrap()).is_err());
        assert!(slice(&t, &SliceSpec::parse(&["xr=1".into()], "xr,vx").unwrap()).is_err());
        assert!(SliceSpec::parse(&[], "xr").is_err());
        assert!(SliceSpec::parse(&["vx".into()], "xr,theta_x").is_err());
    }

    #[test]
    fn episode_header_matches_row_width() {
        let rec = StepRecord {
            t: 0.1,
            s: Default::default(),
            p: Default::default(),
            r: Default::default(),
            values: [0.0; 3],
            mode: ControllerMode::Safety,
            u: Default::default(),
            up: Default::default(),
            d: Default::default(),
            clamped: false,
            replanned: true,
            collision: false,
            teb_hits_obstacle: false,
        };
        assert_eq!(row(&rec).len(), EPISODE_COLUMNS.len());
    }
}
