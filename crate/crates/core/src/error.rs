use core::fmt;

use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Pitch or roll outside the guarded range where `tan` is evaluated.
    AttitudeGuard { angle: f64, guard: f64 },
    IndexOutOfRange { index: usize, len: usize },
    InvalidGrid(String),
    DimensionMismatch { expected: usize, found: usize },
    CflViolation { dt: f64, limit: f64 },
    EmptySublevelSet { level: f64, min: f64 },
    /// A node inside the sub-level set lies further out than the level, so
    /// the table cannot satisfy `V >= l`.
    Containment { extent: f64, level: f64 },
    Unconverged(String),
    StartInObstacle,
    GoalInObstacle,
    PlannerExhausted { iterations: usize },
    InvalidPath(&'static str),
    InvalidConfig(String),
    SensingRange { range: f64, required: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::AttitudeGuard { angle, guard } => {
                write!(f, "attitude angle {angle} rad outside guard of ±{guard} rad")
            }
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for {len} nodes")
            }
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::CflViolation { dt, limit } => {
                write!(f, "time step {dt} exceeds CFL limit {limit}")
            }
            Error::EmptySublevelSet { level, min } => {
                write!(f, "sub-level set at {level} is empty (table minimum {min})")
            }
            Error::Containment { extent, level } => write!(
                f,
                "sub-level set at {level} reaches position {extent}, table violates V >= l"
            ),
            Error::Unconverged(which) => write!(f, "value function for {which} did not converge"),
            Error::StartInObstacle => f.write_str("planner start lies inside an obstacle"),
            Error::GoalInObstacle => f.write_str("planner goal lies inside an obstacle"),
            Error::PlannerExhausted { iterations } => {
                write!(f, "planner found no path after {iterations} iterations")
            }
            Error::InvalidPath(msg) => write!(f, "invalid path: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::SensingRange { range, required } => write!(
                f,
                "sensor range {range} m is below the minimum sensing distance \
                 2*TEB + dx = {required} m"
            ),
        }
    }
}

impl core::error::Error for Error {}
