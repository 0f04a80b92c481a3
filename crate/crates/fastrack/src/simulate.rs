use std::time::Instant;

use fastrack_core::sim::{compute_metrics, run_episode, Clock, EpisodeLog, Metrics, Outcome};
use fastrack_core::world::World;

use crate::config::RunConfig;
use crate::error::{exit, Error, Result};
use crate::precompute::LoadedTables;

/// Monotonic wall clock for controller latency.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn now(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Checks that `loaded` holds converged quadrotor tables solved for the
/// games and solver settings of `cfg`.
pub fn check_tables(cfg: &RunConfig, loaded: &LoadedTables) -> Result<()> {
    if loaded.tracking.is_none() {
        return Err(Error::Config(format!(
            "{} does not hold X4/Y4/Z2 tables",
            loaded.dir.display()
        )));
    }
    for t in &loaded.values {
        if !t.meta.converged {
            return Err(Error::Convergence(format!("{} table is not converged", t.meta.subsystem)));
        }
    }
    let specs = cfg.subsystem_specs()?;
    for (spec, t) in specs.iter().zip(&loaded.values) {
        if spec.solver_hash(&cfg.solver) != t.meta.solver_hash {
            return Err(Error::Config(format!(
                "{} table was computed for a different model, grid or solver configuration",
                t.meta.subsystem
            )));
        }
    }
    if loaded.teb.is_none() {
        return Err(Error::Config("teb.json is missing".into()));
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, loaded: &LoadedTables, clock: &mut dyn Clock) -> Result<(EpisodeLog, Metrics)> {
    check_tables(cfg, loaded)?;
    let (tables, teb) = (loaded.tracking.as_ref().unwrap(), loaded.teb.as_ref().unwrap());
    let env = cfg.environment()?;
    let world = World::from_environment(&env, &cfg.sensor)?;
    let setup = cfg.episode_setup(&env);
    let log = run_episode(&setup, tables, teb, world, clock)?;
    let metrics = compute_metrics(&log, teb)?;
    Ok((log, metrics))
}

/// Exit code for a finished episode.
pub fn episode_exit_code(m: &Metrics) -> i32 {
    if m.success() {
        return exit::OK;
    }
    match m.outcome {
        Outcome::PlannerFailed { .. } => exit::PLANNER,
        Outcome::AttitudeAbort { .. } => exit::SAFETY,
        _ if m.collisions > 0 || m.teb_obstacle_hits > 0 || !m.containment_held => exit::SAFETY,
        _ => exit::OTHER,
    }
}
