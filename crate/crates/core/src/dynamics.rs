//! Tracking, planning and relative dynamics of the near-hover quadrotor
//! example, and the slot maps between their state spaces.
//!
//! The planner injection `Q` and projection `π` are never materialised as
//! matrices: the planner state occupies exactly the three position slots of
//! the tracker state.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pitch/roll magnitude beyond which derivative evaluation is refused.
pub const THETA_GUARD: f64 = 0.6;

/// State of the 10D tracking quadrotor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    pub omega_x: f64,
    pub omega_y: f64,
}

/// Position of the 3D holonomic planning model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Tracker state expressed relative to the planner, `r = s - Q p`.
///
/// Only [`relative_state`] builds one from a tracker/planner pair; the public
/// fields exist for tables, logs and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RelativeState {
    pub xr: f64,
    pub yr: f64,
    pub zr: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    pub omega_x: f64,
    pub omega_y: f64,
}

/// Desired pitch/roll (rad) and thrust command.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackerControl {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

/// Planner velocity command (m/s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerControl {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

/// Wind velocity (m/s) acting on the position rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d0: f64,
    pub d1: f64,
    pub n0: f64,
    pub k_t: f64,
    pub g: f64,
    /// Attitude command bound in radians.
    pub a_max: f64,
    pub az_max: f64,
    pub b_max: f64,
    pub d_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        let g = 9.81;
        Self {
            d0: 10.0,
            d1: 8.0,
            n0: 10.0,
            k_t: 0.91,
            g,
            a_max: 10f64.to_radians(),
            az_max: 1.5 * g,
            b_max: 0.5,
            d_max: 0.1,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("d0", self.d0),
            ("d1", self.d1),
            ("n0", self.n0),
            ("k_t", self.k_t),
            ("g", self.g),
            ("a_max", self.a_max),
            ("az_max", self.az_max),
            ("b_max", self.b_max),
            ("d_max", self.d_max),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "model parameter {name} must be positive, got {v}"
                )));
            }
        }
        if self.a_max >= THETA_GUARD {
            return Err(Error::InvalidConfig(alloc::format!(
                "a_max {} rad must stay below the attitude guard {THETA_GUARD}",
                self.a_max
            )));
        }
        Ok(())
    }

    /// Thrust command that exactly cancels gravity.
    pub fn hover_thrust(&self) -> f64 {
        self.g / self.k_t
    }
}

/// One of the three decoupled relative subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubsystemId {
    /// `(xr, vx, theta_x, omega_x)`
    X4,
    /// `(yr, vy, theta_y, omega_y)`
    Y4,
    /// `(zr, vz)`
    Z2,
}

impl SubsystemId {
    pub const ALL: [SubsystemId; 3] = [SubsystemId::X4, SubsystemId::Y4, SubsystemId::Z2];

    pub fn dim(self) -> usize {
        match self {
            SubsystemId::X4 | SubsystemId::Y4 => 4,
            SubsystemId::Z2 => 2,
        }
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            SubsystemId::X4 => &["xr", "vx", "theta_x", "omega_x"],
            SubsystemId::Y4 => &["yr", "vy", "theta_y", "omega_y"],
            SubsystemId::Z2 => &["zr", "vz"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SubsystemId::X4 => "X4",
            SubsystemId::Y4 => "Y4",
            SubsystemId::Z2 => "Z2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "X4" => Some(SubsystemId::X4),
            "Y4" => Some(SubsystemId::Y4),
            "Z2" => Some(SubsystemId::Z2),
            _ => None,
        }
    }

    /// Index of the position axis (0 = x, 1 = y, 2 = z).
    pub fn axis(self) -> usize {
        match self {
            SubsystemId::X4 => 0,
            SubsystemId::Y4 => 1,
            SubsystemId::Z2 => 2,
        }
    }
}

/// Low-dimensional subsystem state; unused trailing slots of `Z2` are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubState {
    pub id: SubsystemId,
    pub values: [f64; 4],
}

impl SubState {
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.id.dim()]
    }
}

impl TrackingState {
    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn at_rest(pos: PlannerState) -> Self {
        Self {
            x: pos.x,
            y: pos.y,
            z: pos.z,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Packs the state in `(x, vx, θx, ωx, y, vy, θy, ωy, z, vz)` order.
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.x,
            self.vx,
            self.theta_x,
            self.omega_x,
            self.y,
            self.vy,
            self.theta_y,
            self.omega_y,
            self.z,
            self.vz,
        ]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        Self {
            x: a[0],
            vx: a[1],
            theta_x: a[2],
            omega_x: a[3],
            y: a[4],
            vy: a[5],
            theta_y: a[6],
            omega_y: a[7],
            z: a[8],
            vz: a[9],
        }
    }
}

impl PlannerState {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, other: &PlannerState) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        libm::sqrt(dx * dx + dy * dy + dz * dz)
    }
}

impl RelativeState {
    pub fn position(&self) -> [f64; 3] {
        [self.xr, self.yr, self.zr]
    }

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.xr,
            self.vx,
            self.theta_x,
            self.omega_x,
            self.yr,
            self.vy,
            self.theta_y,
            self.omega_y,
            self.zr,
            self.vz,
        ]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        Self {
            xr: a[0],
            vx: a[1],
            theta_x: a[2],
            omega_x: a[3],
            yr: a[4],
            vy: a[5],
            theta_y: a[6],
            omega_y: a[7],
            zr: a[8],
            vz: a[9],
        }
    }
}

/// `r = s - Q p`: subtract the planner position from the tracker position.
pub fn relative_state(s: &TrackingState, p: &PlannerState) -> RelativeState {
    RelativeState {
        xr: s.x - p.x,
        yr: s.y - p.y,
        zr: s.z - p.z,
        vx: s.vx,
        vy: s.vy,
        vz: s.vz,
        theta_x: s.theta_x,
        theta_y: s.theta_y,
        omega_x: s.omega_x,
        omega_y: s.omega_y,
    }
}

/// `p = π(s - r)`: the planner position implied by a tracker and relative state.
pub fn project_to_planner(s: &TrackingState, r: &RelativeState) -> PlannerState {
    PlannerState::new(s.x - r.xr, s.y - r.yr, s.z - r.zr)
}

fn check_attitude(theta_x: f64, theta_y: f64) -> Result<()> {
    for angle in [theta_x, theta_y] {
        if !(angle.abs() < THETA_GUARD) {
            return Err(Error::AttitudeGuard {
                angle,
                guard: THETA_GUARD,
            });
        }
    }
    Ok(())
}

/// Time derivative of the tracking quadrotor. The returned struct holds rates.
pub fn tracking_derivative(
    s: &TrackingState,
    u: &TrackerControl,
    d: &Disturbance,
    params: &ModelParams,
) -> Result<TrackingState> {
    check_attitude(s.theta_x, s.theta_y)?;
    let ModelParams {
        d0, d1, n0, k_t, g, ..
    } = *params;
    Ok(TrackingState {
        x: s.vx + d.dx,
        y: s.vy + d.dy,
        z: s.vz + d.dz,
        vx: g * libm::tan(s.theta_x),
        vy: g * libm::tan(s.theta_y),
        vz: k_t * u.az - g,
        theta_x: -d1 * s.theta_x + s.omega_x,
        theta_y: -d1 * s.theta_y + s.omega_y,
        omega_x: -d0 * s.theta_x + n0 * u.ax,
        omega_y: -d0 * s.theta_y + n0 * u.ay,
    })
}

/// Time derivative of the relative system. Position rows subtract the
/// planner velocity; all other rows match [`tracking_derivative`].
pub fn relative_derivative(
    r: &RelativeState,
    u: &TrackerControl,
    up: &PlannerControl,
    d: &Disturbance,
    params: &ModelParams,
) -> Result<RelativeState> {
    check_attitude(r.theta_x, r.theta_y)?;
    let ModelParams {
        d0, d1, n0, k_t, g, ..
    } = *params;
    Ok(RelativeState {
        xr: r.vx - up.bx + d.dx,
        yr: r.vy - up.by + d.dy,
        zr: r.vz - up.bz + d.dz,
        vx: g * libm::tan(r.theta_x),
        vy: g * libm::tan(r.theta_y),
        vz: k_t * u.az - g,
        theta_x: -d1 * r.theta_x + r.omega_x,
        theta_y: -d1 * r.theta_y + r.omega_y,
        omega_x: -d0 * r.theta_x + n0 * u.ax,
        omega_y: -d0 * r.theta_y + n0 * u.ay,
    })
}

/// Extracts the slots belonging to one subsystem.
pub fn subsystem_project(r: &RelativeState, id: SubsystemId) -> SubState {
    let values = match id {
        SubsystemId::X4 => [r.xr, r.vx, r.theta_x, r.omega_x],
        SubsystemId::Y4 => [r.yr, r.vy, r.theta_y, r.omega_y],
        SubsystemId::Z2 => [r.zr, r.vz, 0.0, 0.0],
    };
    SubState { id, values }
}
