//! Offline stage: solve the games, derive the error bound, write artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use fastrack_core::controller::{SubsystemTables, TrackingTables};
use fastrack_core::grid::ValueTable;
use fastrack_core::hash::hash_values;
use fastrack_core::solver::{
    solve_decomposed_with, ConvergenceReport, GameModel, Solution, Solver, SolverConfig,
    SubsystemSpec,
};
use fastrack_core::teb::{teb_box, TebBox};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::tables::{load_gradient, load_table, save_gradient, save_table, value_path};

/// Nodes per parallel work item.
const CHUNK: usize = 4096;

pub const MANIFEST: &str = "precompute.json";
pub const TEB_FILE: &str = "teb.json";

/// One solved table as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub model: GameModel,
    /// FNV-1a hash of the stored values.
    pub value_hash: u64,
    pub solver_hash: u64,
    pub report: ConvergenceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub solver: SolverConfig,
    pub tables: Vec<TableEntry>,
    /// Present for the decomposed quadrotor when every table converged.
    pub teb: Option<TebBox>,
}

/// [`Solver`] with node updates spread over the rayon pool. `progress` sees
/// the step count and the step's largest change.
pub fn solve_parallel(
    spec: &SubsystemSpec,
    cfg: &SolverConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<Solution> {
    let mut solver = Solver::new(spec, *cfg)?;
    while !solver.is_done() {
        let delta = solver.step_with(|kernel, prev, next| {
            next.par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(i, out)| kernel.update_range(prev, i * CHUNK, out));
        });
        progress(solver.steps(), delta);
    }
    Ok(solver.finish())
}

#[derive(Debug, Clone)]
pub struct Precomputed {
    pub solutions: Vec<Solution>,
    pub teb: Option<TebBox>,
    pub manifest: Manifest,
}

/// Solves every game of `cfg` and returns solutions plus manifest, without
/// touching the disk.
pub fn compute(cfg: &RunConfig, progress: &mut dyn FnMut(&str, usize, f64)) -> Result<Precomputed> {
    cfg.validate()?;
    let solutions: Vec<Solution> = match &cfg.game {
        Some(toy) => {
            let spec = SubsystemSpec::new(toy.model, toy.grid.clone())?;
            vec![solve_parallel(&spec, &cfg.solver, |k, d| progress(spec.name(), k, d))?]
        }
        None => {
            let specs = cfg.subsystem_specs()?;
            solve_decomposed_with(&specs, &cfg.solver, |spec, c| {
                solve_parallel(spec, c, |k, d| progress(spec.name(), k, d))
                    .map_err(|e| match e {
                        Error::Core(e) => e,
                        other => fastrack_core::Error::InvalidConfig(other.to_string()),
                    })
            })?
            .into()
        }
    };
    let models: Vec<GameModel> = match &cfg.game {
        Some(toy) => vec![toy.model],
        None => cfg.subsystem_specs()?.iter().map(|s| s.model).collect(),
    };
    let tables = solutions
        .iter()
        .zip(models)
        .map(|(s, model)| TableEntry {
            name: s.value.meta.subsystem.clone(),
            model,
            value_hash: hash_values(&s.value.values),
            solver_hash: s.value.meta.solver_hash,
            report: s.report.clone(),
        })
        .collect();
    let all_converged = solutions.iter().all(|s| s.report.converged);
    let teb = if cfg.game.is_none() && all_converged {
        Some(teb_box(
            [&solutions[0].value, &solutions[1].value, &solutions[2].value],
            [&solutions[0].report, &solutions[1].report, &solutions[2].report],
            cfg.solver.epsilon,
        )?)
    } else {
        None
    };
    Ok(Precomputed {
        manifest: Manifest {
            solver: cfg.solver,
            tables,
            teb,
        },
        solutions,
        teb,
    })
}

/// Writes tables, gradients, reports, `teb.json` and the manifest to `dir`.
pub fn write_artifacts(pre: &Precomputed, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for sol in &pre.solutions {
        let name = &sol.value.meta.subsystem;
        save_table(&sol.value, &value_path(dir, name))?;
        save_gradient(&sol.gradient, &sol.value.meta, dir, name)?;
        write_json(&dir.join(format!("{name}.report.json")), &sol.report)?;
    }
    if let Some(teb) = &pre.teb {
        write_json(&dir.join(TEB_FILE), teb)?;
    }
    write_json(&dir.join(MANIFEST), &pre.manifest)
}

/// Fails with a convergence error when any table did not converge.
pub fn check_converged(manifest: &Manifest) -> Result<()> {
    let bad: Vec<&str> = manifest
        .tables
        .iter()
        .filter(|t| !t.report.converged)
        .map(|t| t.name.as_str())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Convergence(format!(
            "{} not converged; artifacts are flagged converged=false",
            bad.join(", ")
        )))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Everything the online stage reads back from a table directory.
#[derive(Debug, Clone)]
pub struct LoadedTables {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub values: Vec<ValueTable>,
    pub tracking: Option<TrackingTables>,
    pub teb: Option<TebBox>,
}

pub fn load_tables(dir: &Path) -> Result<LoadedTables> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    let mut values = Vec::new();
    let mut subs = Vec::new();
    for entry in &manifest.tables {
        let value = load_table(&value_path(dir, &entry.name))?;
        let gradient = load_gradient(dir, &entry.name, &value.grid)?;
        values.push(value.clone());
        subs.push(SubsystemTables { value, gradient });
    }
    let tracking = match (manifest.tables.len(), &manifest.tables.first().map(|t| t.model)) {
        (3, Some(GameModel::Quad { .. })) => {
            let mut it = subs.into_iter();
            let (x, y, z) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
            Some(TrackingTables::new(x, y, z)?)
        }
        _ => None,
    };
    let teb_path = dir.join(TEB_FILE);
    let teb = if teb_path.exists() {
        Some(read_json(&teb_path)?)
    } else {
        None
    };
    Ok(LoadedTables {
        dir: dir.to_path_buf(),
        manifest,
        values,
        tracking,
        teb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fastrack_core::grid::{Axis, GridSpec};
    use fastrack_core::solver::solve;

    #[test]
    fn parallel_solve_matches_serial_bit_for_bit() {
        let grid = GridSpec::new(vec![Axis::new("xr", -1.0, 1.0, 41), Axis::new("v", -1.0, 1.0, 41)]).unwrap();
        let model = GameModel::DoubleIntegrator {
            u_max: 1.0,
            b_max: 0.2,
            d_max: 0.05,
        };
        let spec = SubsystemSpec::new(model, grid).unwrap();
        let cfg = SolverConfig {
            max_steps: 300,
            ..SolverConfig::default()
        };
        let a = solve(&spec, &cfg).unwrap();
        let b = solve_parallel(&spec, &cfg, |_, _| {}).unwrap();
        assert_eq!(a.value.values, b.value.values);
        assert_eq!(a.report, b.report);
    }
}
