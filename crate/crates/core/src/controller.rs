//! Hybrid tracking controller: optimal safety control from gradient look-up,
//! worst-case planner and disturbance, and the mode switch.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    subsystem_project, Disturbance, ModelParams, PlannerControl, RelativeState, SubsystemId,
    TrackerControl,
};
use crate::grid::{GradientTable, ValueTable};
use crate::teb::TebBox;
use crate::{Error, Result};

/// Costate magnitudes below this are treated as zero.
pub const TIE: f64 = 1e-9;

fn sign(q: f64) -> f64 {
    if q.abs() < TIE {
        0.0
    } else {
        q.signum()
    }
}

/// Value and gradient tables of one subsystem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemTables {
    pub value: ValueTable,
    pub gradient: GradientTable,
}

/// Tables for the X4, Y4 and Z2 subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingTables {
    subs: [SubsystemTables; 3],
}

/// Interpolated gradients at a relative state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Costate {
    pub x: [f64; 4],
    pub y: [f64; 4],
    pub z: [f64; 2],
    /// Some subsystem query fell outside its grid.
    pub clamped: bool,
}

impl TrackingTables {
    pub fn new(x: SubsystemTables, y: SubsystemTables, z: SubsystemTables) -> Result<Self> {
        for (t, id) in [(&x, SubsystemId::X4), (&y, SubsystemId::Y4), (&z, SubsystemId::Z2)] {
            let n = t.value.grid.ndim();
            if n != id.dim() || !t.gradient.grid.same_shape(&t.value.grid) {
                return Err(Error::DimensionMismatch {
                    expected: id.dim(),
                    found: n,
                });
            }
        }
        Ok(Self { subs: [x, y, z] })
    }

    pub fn get(&self, id: SubsystemId) -> &SubsystemTables {
        &self.subs[id.axis()]
    }

    pub fn costate(&self, r: &RelativeState) -> Costate {
        let mut c = Costate::default();
        let sx = subsystem_project(r, SubsystemId::X4);
        let sy = subsystem_project(r, SubsystemId::Y4);
        let sz = subsystem_project(r, SubsystemId::Z2);
        let cx = self.subs[0].gradient.interpolate_into(sx.as_slice(), &mut c.x);
        let cy = self.subs[1].gradient.interpolate_into(sy.as_slice(), &mut c.y);
        let cz = self.subs[2].gradient.interpolate_into(sz.as_slice(), &mut c.z);
        c.clamped = cx || cy || cz;
        c
    }

    /// Interpolated `(V_X4, V_Y4, V_Z2)` and whether any query clamped.
    pub fn values(&self, r: &RelativeState) -> ([f64; 3], bool) {
        let mut out = [0.0; 3];
        let mut clamped = false;
        for (i, id) in SubsystemId::ALL.into_iter().enumerate() {
            let s = subsystem_project(r, id);
            let v = self.subs[i].value.interpolate(s.as_slice());
            out[i] = v.value;
            clamped |= v.clamped;
        }
        (out, clamped)
    }
}

/// Minimiser of `q · f` over tracker controls.
pub fn safety_from_costate(c: &Costate, params: &ModelParams) -> TrackerControl {
    let az = if c.z[1].abs() < TIE {
        params.hover_thrust()
    } else if params.k_t * c.z[1] > 0.0 {
        0.0
    } else {
        params.az_max
    };
    TrackerControl {
        ax: -params.a_max * sign(c.x[3]),
        ay: -params.a_max * sign(c.y[3]),
        az,
    }
}

/// Planner velocity maximising `q · f`, i.e. running away from the tracker.
pub fn adversary_from_costate(c: &Costate, params: &ModelParams) -> PlannerControl {
    PlannerControl {
        bx: -params.b_max * sign(c.x[0]),
        by: -params.b_max * sign(c.y[0]),
        bz: -params.b_max * sign(c.z[0]),
    }
}

/// Wind maximising `q · f`.
pub fn disturbance_from_costate(c: &Costate, params: &ModelParams) -> Disturbance {
    Disturbance {
        dx: params.d_max * sign(c.x[0]),
        dy: params.d_max * sign(c.y[0]),
        dz: params.d_max * sign(c.z[0]),
    }
}

pub fn safety_control(
    r: &RelativeState,
    tables: &TrackingTables,
    params: &ModelParams,
) -> TrackerControl {
    safety_from_costate(&tables.costate(r), params)
}

pub fn planner_adversary(
    r: &RelativeState,
    tables: &TrackingTables,
    params: &ModelParams,
) -> PlannerControl {
    adversary_from_costate(&tables.costate(r), params)
}

pub fn worst_disturbance(
    r: &RelativeState,
    tables: &TrackingTables,
    params: &ModelParams,
) -> Disturbance {
    disturbance_from_costate(&tables.costate(r), params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Safety,
    Performance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerformanceKind {
    /// Same law as the safety controller.
    Mirror,
    /// Clipped PD feedback on relative position and velocity.
    Proportional {
        kp: f64,
        kd: f64,
        kp_z: f64,
        kd_z: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchConfig {
    /// Width of the strip below `V̄ + ε` in which safety control takes over.
    pub margin: f64,
    pub performance: PerformanceKind,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            margin: 0.05,
            performance: PerformanceKind::Mirror,
        }
    }
}

impl SwitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "switch margin must be positive, got {}",
                self.margin
            )));
        }
        if let PerformanceKind::Proportional { kp, kd, kp_z, kd_z } = self.performance {
            if [kp, kd, kp_z, kd_z].iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(Error::InvalidConfig("feedback gains must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Safety mode once any subsystem value reaches the strip below its level.
pub fn select_mode_from_values(values: &[f64; 3], teb: &TebBox, cfg: &SwitchConfig) -> ControllerMode {
    let near_edge = (0..3).any(|i| values[i] >= teb.level(i) - cfg.margin);
    if near_edge {
        ControllerMode::Safety
    } else {
        ControllerMode::Performance
    }
}

pub fn select_mode(
    r_next: &RelativeState,
    tables: &TrackingTables,
    teb: &TebBox,
    cfg: &SwitchConfig,
) -> ControllerMode {
    select_mode_from_values(&tables.values(r_next).0, teb, cfg)
}

/// Proportional law; always inside the control bounds.
pub fn proportional_control(
    r: &RelativeState,
    params: &ModelParams,
    kp: f64,
    kd: f64,
    kp_z: f64,
    kd_z: f64,
) -> TrackerControl {
    let clip = |a: f64| a.clamp(-params.a_max, params.a_max);
    let az = params.hover_thrust() - (kp_z * r.zr + kd_z * r.vz) / params.k_t;
    TrackerControl {
        ax: clip(-kp * r.xr - kd * r.vx),
        ay: clip(-kp * r.yr - kd * r.vy),
        az: if az.is_nan() { params.hover_thrust() } else { az.clamp(0.0, params.az_max) },
    }
}

pub fn performance_control(
    r: &RelativeState,
    tables: &TrackingTables,
    params: &ModelParams,
    cfg: &SwitchConfig,
) -> TrackerControl {
    match cfg.performance {
        PerformanceKind::Mirror => safety_control(r, tables, params),
        PerformanceKind::Proportional { kp, kd, kp_z, kd_z } => {
            proportional_control(r, params, kp, kd, kp_z, kd_z)
        }
    }
}
