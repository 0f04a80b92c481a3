//! The single JSON document that describes a run.

use std::fs;
use std::path::{Path, PathBuf};

use fastrack_core::controller::SwitchConfig;
use fastrack_core::dynamics::{ModelParams, SubsystemId};
use fastrack_core::grid::{Axis, GridSpec};
use fastrack_core::rrt::PlannerConfig;
use fastrack_core::sim::{EpisodeSetup, SimConfig};
use fastrack_core::solver::{GameModel, SolverConfig, SubsystemSpec};
use fastrack_core::world::{Environment, SensorConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters as written in config files. The attitude bound is given
/// in degrees and converted once here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d0: f64,
    pub d1: f64,
    pub n0: f64,
    pub k_t: f64,
    pub g: f64,
    pub a_max_deg: f64,
    pub az_max: f64,
    pub b_max: f64,
    pub d_max: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelParams::default().into()
    }
}

impl From<ModelParams> for ModelConfig {
    fn from(p: ModelParams) -> Self {
        Self {
            d0: p.d0,
            d1: p.d1,
            n0: p.n0,
            k_t: p.k_t,
            g: p.g,
            a_max_deg: p.a_max.to_degrees(),
            az_max: p.az_max,
            b_max: p.b_max,
            d_max: p.d_max,
        }
    }
}

impl ModelConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            d0: self.d0,
            d1: self.d1,
            n0: self.n0,
            k_t: self.k_t,
            g: self.g,
            a_max: self.a_max_deg.to_radians(),
            az_max: self.az_max,
            b_max: self.b_max,
            d_max: self.d_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub x4: GridSpec,
    pub y4: GridSpec,
    pub z2: GridSpec,
}

impl Default for Grids {
    fn default() -> Self {
        let four = |p: &str| {
            GridSpec::new(vec![
                Axis::new(format!("{p}r"), -2.0, 2.0, 31),
                Axis::new(format!("v{p}"), -2.0, 2.0, 31),
                Axis::new(format!("theta_{p}"), -0.35, 0.35, 31),
                Axis::new(format!("omega_{p}"), -2.0, 2.0, 31),
            ])
            .expect("default grid")
        };
        Self {
            x4: four("x"),
            y4: four("y"),
            z2: GridSpec::new(vec![
                Axis::new("zr", -2.0, 2.0, 101),
                Axis::new("vz", -2.0, 2.0, 101),
            ])
            .expect("default grid"),
        }
    }
}

/// A low-dimensional game solved on its own instead of the quadrotor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyGame {
    pub model: GameModel,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grids: Grids,
    pub solver: SolverConfig,
    pub switch: SwitchConfig,
    pub planner: PlannerConfig,
    pub sim: SimConfig,
    pub sensor: SensorConfig,
    /// Environment file. The built-in obstacle course when absent.
    pub environment: Option<PathBuf>,
    pub output: PathBuf,
    pub game: Option<ToyGame>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            grids: Grids::default(),
            solver: SolverConfig::default(),
            switch: SwitchConfig::default(),
            planner: PlannerConfig::default(),
            sim: SimConfig::default(),
            sensor: SensorConfig::default(),
            environment: None,
            output: PathBuf::from("out"),
            game: None,
        }
    }
}

impl RunConfig {
    /// Reads and validates a config. Relative environment and output paths
    /// are taken relative to the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(env) = &cfg.environment {
            if env.is_relative() {
                cfg.environment = Some(base.join(env));
            }
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.params().validate()?;
        self.solver.validate()?;
        self.switch.validate()?;
        self.planner.validate()?;
        self.sim.validate()?;
        self.sensor.validate()?;
        match &self.game {
            Some(toy) => {
                SubsystemSpec::new(toy.model, toy.grid.clone())?;
            }
            None => {
                self.subsystem_specs()?;
            }
        }
        Ok(())
    }

    pub fn subsystem_specs(&self) -> Result<[SubsystemSpec; 3]> {
        let params = self.model.params();
        let spec = |id, grid: &GridSpec| SubsystemSpec::new(GameModel::Quad { id, params }, grid.clone());
        Ok([
            spec(SubsystemId::X4, &self.grids.x4)?,
            spec(SubsystemId::Y4, &self.grids.y4)?,
            spec(SubsystemId::Z2, &self.grids.z2)?,
        ])
    }

    pub fn environment(&self) -> Result<Environment> {
        let env = match &self.environment {
            Some(path) => load_environment(path)?,
            None => Environment::paper_course(),
        };
        env.validate()?;
        Ok(env)
    }

    /// Episode settings for `env`. The planner samples inside the
    /// environment bounds.
    pub fn episode_setup(&self, env: &Environment) -> EpisodeSetup {
        let mut planner = self.planner;
        planner.bounds = env.bounds;
        EpisodeSetup {
            params: self.model.params(),
            sim: self.sim,
            planner,
            sensor: self.sensor,
            switch: self.switch,
            start: env.start,
            goal: env.goal,
        }
    }
}

pub fn load_environment(path: &Path) -> Result<Environment> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degrees_convert_once() {
        let m = ModelConfig::default();
        assert!((m.a_max_deg - 10.0).abs() < 1e-12);
        assert!((m.params().a_max - 0.174_532_925_199_432_95).abs() < 1e-15);
    }

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        back.validate().unwrap();
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"sensor": {"range": 3.0}}"#).unwrap();
        assert_eq!(cfg.sensor.range, 3.0);
        assert_eq!(cfg.sim, SimConfig::default());
    }

    #[test]
    fn inverted_axis_is_rejected() {
        let text = r#"{"grids": {
            "x4": [{"label":"xr","min":1.0,"max":-1.0,"count":5},
                   {"label":"vx","min":-1.0,"max":1.0,"count":5},
                   {"label":"theta_x","min":-0.3,"max":0.3,"count":5},
                   {"label":"omega_x","min":-1.0,"max":1.0,"count":5}],
            "y4": [{"label":"yr","min":-1.0,"max":1.0,"count":5},
                   {"label":"vy","min":-1.0,"max":1.0,"count":5},
                   {"label":"theta_y","min":-0.3,"max":0.3,"count":5},
                   {"label":"omega_y","min":-1.0,"max":1.0,"count":5}],
            "z2": [{"label":"zr","min":-1.0,"max":1.0,"count":5},
                   {"label":"vz","min":-1.0,"max":1.0,"count":5}]}}"#;
        assert!(serde_json::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sensr": {}}"#).is_err());
    }
}
