//! Invariant suites run against a precomputed table directory.

use std::fmt;
use std::path::Path;

use fastrack_core::controller::TrackingTables;
use fastrack_core::dynamics::{ModelParams, RelativeState, SubsystemId};
use fastrack_core::grid::{gradient_tables, GradientTable, ValueTable, MAX_DIM};
use fastrack_core::hash::hash_values;
use fastrack_core::rng::Rng;
use fastrack_core::sim::adversarial_rollout;
use fastrack_core::solver::{cfl_dt, dissipation_alphas, lf_step_with, GameModel, SolverConfig, SubsystemSpec};
use fastrack_core::teb::{sublevel_contained, teb_box, TebBox};

use crate::error::Result;
use crate::precompute::{load_tables, LoadedTables};

/// Allowed growth of a subsystem value along an invariance rollout.
pub const ROLLOUT_TOLERANCE: f64 = 0.05;

/// Decision period of invariance rollouts (s), short enough to approximate
/// continuous feedback.
pub const ROLLOUT_CONTROL_DT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<22} {}", self.name, self.detail)
    }
}

fn suite(name: &'static str, failures: Vec<String>, ok: String) -> SuiteResult {
    if failures.is_empty() {
        SuiteResult {
            name,
            passed: true,
            detail: ok,
        }
    } else {
        SuiteResult {
            name,
            passed: false,
            detail: failures.join("; "),
        }
    }
}

/// Nodes where `V < l`, as `(flat index, V, l)`.
pub fn floor_violations(table: &ValueTable) -> Vec<(usize, f64, f64)> {
    let mut idx = [0usize; MAX_DIM];
    table
        .values
        .iter()
        .enumerate()
        .filter_map(|(flat, &v)| {
            table.grid.multi_index(flat, &mut idx);
            let l = table.grid.axis(0).coord(idx[0]).abs();
            (v < l).then_some((flat, v, l))
        })
        .collect()
}

/// Largest difference between stored gradients and ones recomputed from `value`.
pub fn gradient_mismatch(value: &ValueTable, stored: &GradientTable) -> f64 {
    let fresh = gradient_tables(value);
    fresh
        .components
        .iter()
        .zip(&stored.components)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Outcome of re-running one solver step on a stored table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReloadCheck {
    pub hash_matches: bool,
    /// Most negative node change; iterates never decrease.
    pub min_change: f64,
    pub max_change: f64,
}

pub fn reload_check(
    table: &ValueTable,
    model: GameModel,
    cfg: &SolverConfig,
    stored_hash: u64,
) -> Result<ReloadCheck> {
    let spec = SubsystemSpec::new(model, table.grid.clone())?;
    let alphas = dissipation_alphas(&spec);
    let dt = cfl_dt(&alphas, &spec.grid, cfg.cfl_factor);
    let next = lf_step_with(table, &spec, &alphas, dt, cfg.dissipation)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in table.values.iter().zip(&next.values) {
        lo = lo.min(b - a);
        hi = hi.max(b - a);
    }
    Ok(ReloadCheck {
        hash_matches: hash_values(&table.values) == stored_hash,
        min_change: lo,
        max_change: hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutSummary {
    pub runs: usize,
    /// Largest `peak - initial` over runs and subsystems.
    pub worst_growth: f64,
    pub failures: usize,
    pub clamped_runs: usize,
}

/// Samples a point of `{V <= level}`: a random qualifying node jittered
/// within half a cell, falling back to the node itself.
fn sample_sublevel(table: &ValueTable, nodes: &[usize], level: f64, rng: &mut Rng) -> Vec<f64> {
    let node = nodes[(rng.next_u64() % nodes.len() as u64) as usize];
    let base = table.grid.node_coords(node).expect("node index in range");
    for _ in 0..32 {
        let p: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(d, &c)| {
                let a = table.grid.axis(d);
                let h = 0.5 * a.spacing();
                rng.uniform(c - h, c + h).clamp(a.min, a.max)
            })
            .collect();
        if table.interpolate(&p).value <= level {
            return p;
        }
    }
    base
}

/// Random starts inside the error bound rolled out under the optimal tracker
/// against the worst planner and wind.
pub fn invariance_rollouts(
    tables: &TrackingTables,
    teb: &TebBox,
    params: &ModelParams,
    runs: usize,
    duration: f64,
    control_dt: f64,
    seed: u64,
) -> Result<RolloutSummary> {
    let mut rng = Rng::seed_from_u64(seed);
    let nodes: Vec<Vec<usize>> = SubsystemId::ALL
        .iter()
        .map(|&id| {
            let t = &tables.get(id).value;
            (0..t.values.len())
                .filter(|&i| t.values[i] <= teb.level(id.axis()))
                .collect()
        })
        .collect();
    let mut summary = RolloutSummary {
        runs,
        worst_growth: f64::NEG_INFINITY,
        failures: 0,
        clamped_runs: 0,
    };
    for _ in 0..runs {
        let mut parts = Vec::new();
        for (i, id) in SubsystemId::ALL.into_iter().enumerate() {
            let t = &tables.get(id).value;
            parts.push(sample_sublevel(t, &nodes[i], teb.level(i), &mut rng));
        }
        let (x, y, z) = (&parts[0], &parts[1], &parts[2]);
        let r0 = RelativeState::from_array([x[0], x[1], x[2], x[3], y[0], y[1], y[2], y[3], z[0], z[1]]);
        let out = adversarial_rollout(&r0, tables, params, duration, control_dt, 10)?;
        let growth = (0..3).map(|i| out.peak[i] - out.initial[i]).fold(f64::NEG_INFINITY, f64::max);
        summary.worst_growth = summary.worst_growth.max(growth);
        summary.failures += (growth > ROLLOUT_TOLERANCE) as usize;
        summary.clamped_runs += out.clamped as usize;
    }
    Ok(summary)
}

/// Runs every suite that applies to the tables in `dir`.
pub fn verify_dir(dir: &Path) -> Result<Vec<SuiteResult>> {
    let loaded = load_tables(dir)?;
    verify_loaded(&loaded)
}

pub fn verify_loaded(loaded: &LoadedTables) -> Result<Vec<SuiteResult>> {
    let manifest = &loaded.manifest;
    let mut results = Vec::new();

    let mut fails = Vec::new();
    for t in &loaded.values {
        let bad = floor_violations(t);
        if let Some(&(i, v, l)) = bad.first() {
            fails.push(format!("{}: {} nodes below cost, first at {i} ({v} < {l})", t.meta.subsystem, bad.len()));
        }
    }
    results.push(suite("value >= cost", fails, "every node".into()));

    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    for (t, entry) in loaded.values.iter().zip(&manifest.tables) {
        let c = reload_check(t, entry.model, &manifest.solver, entry.value_hash)?;
        worst = worst.max(c.max_change);
        if !c.hash_matches {
            fails.push(format!("{}: stored values hash differs from manifest", entry.name));
        }
        if t.meta.solver_hash != entry.solver_hash {
            fails.push(format!("{}: solver hash differs from manifest", entry.name));
        }
        if c.min_change < -1e-12 {
            fails.push(format!("{}: one more step lowered a node by {:.3e}", entry.name, -c.min_change));
        }
        if entry.report.converged && c.max_change >= manifest.solver.convergence_tol {
            fails.push(format!("{}: one more step moved a node by {:.3e}", entry.name, c.max_change));
        }
    }
    results.push(suite("monotone reload", fails, format!("largest further change {worst:.3e}")));

    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    if let Some(tracking) = &loaded.tracking {
        for id in SubsystemId::ALL {
            let sub = tracking.get(id);
            let m = gradient_mismatch(&sub.value, &sub.gradient);
            worst = worst.max(m);
            if !(m <= 1e-12) {
                fails.push(format!("{}: gradient differs by {m:.3e}", id.name()));
            }
        }
    } else {
        for t in &loaded.values {
            let g = crate::tables::load_gradient(&loaded.dir, &t.meta.subsystem, &t.grid)?;
            let m = gradient_mismatch(t, &g);
            worst = worst.max(m);
            if !(m <= 1e-12) {
                fails.push(format!("{}: gradient differs by {m:.3e}", t.meta.subsystem));
            }
        }
    }
    results.push(suite("gradient consistency", fails, format!("max deviation {worst:.3e}")));

    if let (Some(tracking), Some(teb)) = (&loaded.tracking, &loaded.teb) {
        let mut fails = Vec::new();
        let reports = manifest.tables.iter().map(|t| &t.report).collect::<Vec<_>>();
        let values = SubsystemId::ALL.map(|id| &tracking.get(id).value);
        match teb_box(values, [reports[0], reports[1], reports[2]], manifest.solver.epsilon) {
            Ok(fresh) if fresh == *teb => {}
            Ok(fresh) => fails.push(format!("teb.json {:?} differs from tables {:?}", teb.half_widths, fresh.half_widths)),
            Err(e) => fails.push(e.to_string()),
        }
        for (i, v) in values.iter().enumerate() {
            if !sublevel_contained(v, teb.level(i)) {
                fails.push(format!("{}: sub-level set leaves the cost bound", v.meta.subsystem));
            }
        }
        results.push(suite(
            "containment",
            fails,
            format!("half-widths {:.4?}", teb.half_widths),
        ));

        let params = match manifest.tables[0].model {
            GameModel::Quad { params, .. } => params,
            _ => unreachable!("tracking tables come from quadrotor games"),
        };
        let s = invariance_rollouts(tracking, teb, &params, 100, 10.0, ROLLOUT_CONTROL_DT, 1)?;
        let fails = if s.failures > 0 {
            vec![format!(
                "{} of {} rollouts grew by more than {ROLLOUT_TOLERANCE} (worst {:.4})",
                s.failures, s.runs, s.worst_growth
            )]
        } else {
            Vec::new()
        };
        results.push(suite(
            "invariance rollouts",
            fails,
            format!("{} runs, worst growth {:.4}", s.runs, s.worst_growth),
        ));
    }
    Ok(results)
}
