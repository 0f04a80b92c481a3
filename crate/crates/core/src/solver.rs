//! Converged value function of the tracker/planner pursuit-evasion game.
//!
//! The value `V(r, T)` is the worst-case maximum over `[0, T]` of the cost
//! `l(r) = |position slot|`, with the tracker minimising and the planner and
//! disturbance maximising. It is advanced in pseudo-time with the discrete
//! dynamic-programming update
//!
//! ```text
//! V_{k+1} = max(l, V_k + dτ · Ĥ(∇V_k))
//! ```
//!
//! where `Ĥ` is the Lax-Friedrichs numerical Hamiltonian with closed-form
//! dissipation bounds `α_i`. Under the CFL bound the update is monotone in
//! every neighbour value, and `V_k` is non-decreasing in `k`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelParams, SubsystemId, THETA_GUARD};
use crate::grid::{gradient_tables, GradientTable, GridSpec, TableMeta, ValueTable, MAX_DIM};
use crate::hash::Fnv64;
use crate::{Error, Result};

/// How the dissipation coefficient of each node is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dissipation {
    /// The per-dimension bound over the whole grid at every node.
    Global,
    /// The closed-form bound at the node itself, capped by the global one.
    #[default]
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub cfl_factor: f64,
    /// Largest per-step node change still counted as quiet.
    pub convergence_tol: f64,
    pub quiet_steps: usize,
    pub max_steps: usize,
    /// Level inflation used for the tracking error bound.
    pub epsilon: f64,
    pub dissipation: Dissipation,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl_factor: 0.5,
            convergence_tol: 1e-4,
            quiet_steps: 10,
            max_steps: 200_000,
            epsilon: 0.01,
            dissipation: Dissipation::Local,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_factor > 0.0 && self.cfl_factor < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "cfl_factor must lie in (0, 1), got {}",
                self.cfl_factor
            )));
        }
        if !(self.convergence_tol > 0.0) || self.quiet_steps == 0 || self.max_steps == 0 {
            return Err(Error::InvalidConfig(
                "convergence_tol, quiet_steps and max_steps must be positive".into(),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Relative dynamics of a game whose first state slot is the position error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GameModel {
    /// `ẋr = u - b + d`.
    Scalar { u_max: f64, b_max: f64, d_max: f64 },
    /// `ẋr = v - b + d`, `v̇ = u`.
    DoubleIntegrator { u_max: f64, b_max: f64, d_max: f64 },
    /// One of the decoupled quadrotor subsystems.
    Quad { id: SubsystemId, params: ModelParams },
}

impl GameModel {
    pub fn dim(&self) -> usize {
        match self {
            GameModel::Scalar { .. } => 1,
            GameModel::DoubleIntegrator { .. } => 2,
            GameModel::Quad { id, .. } => id.dim(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GameModel::Scalar { .. } => "scalar",
            GameModel::DoubleIntegrator { .. } => "double_integrator",
            GameModel::Quad { id, .. } => id.name(),
        }
    }

    /// `H(x, q) = min_u max_{b, d} q · f(x, u, b, d)` in closed form.
    pub fn hamiltonian(&self, x: &[f64], q: &[f64]) -> f64 {
        match *self {
            GameModel::Scalar {
                u_max,
                b_max,
                d_max,
            } => (b_max + d_max - u_max) * q[0].abs(),
            GameModel::DoubleIntegrator {
                u_max,
                b_max,
                d_max,
            } => q[0] * x[1] + (b_max + d_max) * q[0].abs() - u_max * q[1].abs(),
            GameModel::Quad { id, params } => match id {
                SubsystemId::X4 | SubsystemId::Y4 => quad4_hamiltonian(
                    &params,
                    x[1],
                    params.g * libm::tan(x[2]),
                    x[2],
                    x[3],
                    q,
                ),
                SubsystemId::Z2 => z2_hamiltonian(&params, x[1], q),
            },
        }
    }

    /// Per-dimension bounds on `|∂H/∂q_i|` over the grid and all admissible
    /// inputs, i.e. `max |f_i|`.
    pub fn dissipation_alphas(&self, grid: &GridSpec) -> Vec<f64> {
        match *self {
            GameModel::Scalar {
                u_max,
                b_max,
                d_max,
            } => vec![u_max + b_max + d_max],
            GameModel::DoubleIntegrator {
                u_max,
                b_max,
                d_max,
            } => vec![grid.axis(1).max_abs() + b_max + d_max, u_max],
            GameModel::Quad { id, params } => match id {
                SubsystemId::X4 | SubsystemId::Y4 => {
                    let v = grid.axis(1).max_abs();
                    let th = grid.axis(2).max_abs();
                    let om = grid.axis(3).max_abs();
                    vec![
                        v + params.b_max + params.d_max,
                        params.g * libm::tan(th),
                        params.d1 * th + om,
                        params.d0 * th + params.n0 * params.a_max,
                    ]
                }
                SubsystemId::Z2 => {
                    let v = grid.axis(1).max_abs();
                    let up = params.k_t * params.az_max - params.g;
                    vec![v + params.b_max + params.d_max, params.g.max(up.abs())]
                }
            },
        }
    }

    fn hash_into(&self, h: &mut Fnv64) {
        h.write(self.name().as_bytes());
        match *self {
            GameModel::Scalar {
                u_max,
                b_max,
                d_max,
            }
            | GameModel::DoubleIntegrator {
                u_max,
                b_max,
                d_max,
            } => {
                for v in [u_max, b_max, d_max] {
                    h.write_f64(v);
                }
            }
            GameModel::Quad { params, .. } => {
                for v in [
                    params.d0,
                    params.d1,
                    params.n0,
                    params.k_t,
                    params.g,
                    params.a_max,
                    params.az_max,
                    params.b_max,
                    params.d_max,
                ] {
                    h.write_f64(v);
                }
            }
        }
    }
}

#[inline]
fn quad4_hamiltonian(p: &ModelParams, v: f64, g_tan: f64, th: f64, om: f64, q: &[f64]) -> f64 {
    q[0] * v + q[1] * g_tan + q[2] * (-p.d1 * th + om) - q[3] * p.d0 * th
        - p.n0 * p.a_max * q[3].abs()
        + (p.b_max + p.d_max) * q[0].abs()
}

#[inline]
fn z2_hamiltonian(p: &ModelParams, v: f64, q: &[f64]) -> f64 {
    q[0] * v
        + (p.b_max + p.d_max) * q[0].abs()
        + (-p.g * q[1]).min((p.k_t * p.az_max - p.g) * q[1])
}

/// A game together with its grid and per-node cost `l = |x_0|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemSpec {
    pub model: GameModel,
    pub grid: GridSpec,
    pub cost: Vec<f64>,
}

impl SubsystemSpec {
    pub fn new(model: GameModel, grid: GridSpec) -> Result<Self> {
        if grid.ndim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                found: grid.ndim(),
            });
        }
        if let GameModel::Quad { id, params } = &model {
            params.validate()?;
            if matches!(id, SubsystemId::X4 | SubsystemId::Y4)
                && grid.axis(2).max_abs() >= THETA_GUARD
            {
                return Err(Error::InvalidGrid(alloc::format!(
                    "attitude axis reaches {} rad, beyond the guard {THETA_GUARD}",
                    grid.axis(2).max_abs()
                )));
            }
        }
        let cost = ValueTable::from_fn(grid.clone(), placeholder_meta(), |x| x[0].abs()).values;
        Ok(Self { model, grid, cost })
    }

    pub fn name(&self) -> &'static str {
        self.model.name()
    }

    /// Fingerprint of the game, grid and solver settings.
    pub fn solver_hash(&self, cfg: &SolverConfig) -> u64 {
        let mut h = Fnv64::default();
        self.model.hash_into(&mut h);
        for a in self.grid.axes() {
            h.write_f64(a.min);
            h.write_f64(a.max);
            h.write_u64(a.count as u64);
        }
        h.write_f64(cfg.cfl_factor);
        h.write_f64(cfg.convergence_tol);
        h.write_u64(cfg.quiet_steps as u64);
        h.write_u64(cfg.max_steps as u64);
        h.write_f64(cfg.epsilon);
        h.write_u64(cfg.dissipation as u64);
        h.finish()
    }

    pub fn cost_table(&self) -> ValueTable {
        ValueTable {
            grid: self.grid.clone(),
            values: self.cost.clone(),
            meta: TableMeta {
                subsystem: self.name().into(),
                solver_hash: 0,
                converged: true,
            },
        }
    }
}

fn placeholder_meta() -> TableMeta {
    TableMeta {
        subsystem: String::new(),
        solver_hash: 0,
        converged: false,
    }
}

/// Closed-form Hamiltonian of a subsystem at a state and costate.
pub fn analytic_hamiltonian(spec: &SubsystemSpec, state: &[f64], costate: &[f64]) -> f64 {
    spec.model.hamiltonian(state, costate)
}

pub fn dissipation_alphas(spec: &SubsystemSpec) -> Vec<f64> {
    spec.model.dissipation_alphas(&spec.grid)
}

/// `dτ = cfl_factor / Σ_i α_i / Δx_i`.
pub fn cfl_dt(alphas: &[f64], grid: &GridSpec, cfl_factor: f64) -> f64 {
    cfl_factor / cfl_rate(alphas, grid)
}

fn cfl_rate(alphas: &[f64], grid: &GridSpec) -> f64 {
    alphas
        .iter()
        .enumerate()
        .map(|(d, a)| a / grid.spacing(d))
        .sum()
}

/// Precomputed per-node data for one Lax-Friedrichs update.
///
/// `update_range` only reads the previous iterate, so disjoint output slices
/// may be filled from different workers.
#[derive(Debug, Clone)]
pub struct StepKernel<'a> {
    spec: &'a SubsystemSpec,
    alphas: Vec<f64>,
    dissipation: Dissipation,
    dt: f64,
    inv_h: Vec<f64>,
    coords: Vec<Vec<f64>>,
    /// `g·tan θ` along the attitude axis of four-state quadrotor games.
    g_tan: Vec<f64>,
    /// Outward one-sided differences at the lower and upper faces.
    ghost_lo: Vec<f64>,
    ghost_hi: Vec<f64>,
}

impl<'a> StepKernel<'a> {
    pub fn new(
        spec: &'a SubsystemSpec,
        alphas: &[f64],
        dt: f64,
        dissipation: Dissipation,
    ) -> Result<Self> {
        let grid = &spec.grid;
        if alphas.len() != grid.ndim() {
            return Err(Error::DimensionMismatch {
                expected: grid.ndim(),
                found: alphas.len(),
            });
        }
        let limit = 1.0 / cfl_rate(alphas, grid);
        if !(dt > 0.0 && dt <= limit) {
            return Err(Error::CflViolation { dt, limit });
        }
        let coords: Vec<Vec<f64>> = grid
            .axes()
            .iter()
            .map(|a| (0..a.count).map(|i| a.coord(i)).collect())
            .collect();
        let g_tan = match spec.model {
            GameModel::Quad {
                id: SubsystemId::X4 | SubsystemId::Y4,
                params,
            } => coords[2].iter().map(|&t| params.g * libm::tan(t)).collect(),
            _ => Vec::new(),
        };
        // Past the grid edge `V - l` is held constant, so the missing
        // difference is the cost slope there: ±1 across the position faces,
        // zero elsewhere. It does not depend on `V`, which keeps the boundary
        // update monotone.
        let mut ghost_lo = vec![0.0; grid.ndim()];
        let mut ghost_hi = vec![0.0; grid.ndim()];
        let pos = grid.axis(0);
        let h = pos.spacing();
        ghost_lo[0] = (pos.min.abs() - (pos.min - h).abs()) / h;
        ghost_hi[0] = ((pos.max + h).abs() - pos.max.abs()) / h;
        Ok(Self {
            spec,
            alphas: alphas.to_vec(),
            dissipation,
            dt,
            inv_h: (0..grid.ndim()).map(|d| 1.0 / grid.spacing(d)).collect(),
            coords,
            g_tan,
            ghost_lo,
            ghost_hi,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.spec.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.grid.is_empty()
    }

    /// Node-local `max |f_i|` over admissible inputs, capped by the
    /// per-dimension bounds the kernel was built with.
    #[inline]
    fn local_alphas(&self, idx: &[usize], out: &mut [f64]) {
        match &self.spec.model {
            GameModel::Quad {
                id: SubsystemId::X4 | SubsystemId::Y4,
                params: p,
            } => {
                let v = self.coords[1][idx[1]];
                let th = self.coords[2][idx[2]];
                let om = self.coords[3][idx[3]];
                out[0] = v.abs() + p.b_max + p.d_max;
                out[1] = self.g_tan[idx[2]].abs();
                out[2] = (-p.d1 * th + om).abs();
                out[3] = p.d0 * th.abs() + p.n0 * p.a_max;
            }
            GameModel::Quad {
                id: SubsystemId::Z2,
                params: p,
            } => {
                out[0] = self.coords[1][idx[1]].abs() + p.b_max + p.d_max;
                out[1] = p.g.max((p.k_t * p.az_max - p.g).abs());
            }
            GameModel::DoubleIntegrator {
                u_max,
                b_max,
                d_max,
            } => {
                out[0] = self.coords[1][idx[1]].abs() + b_max + d_max;
                out[1] = *u_max;
            }
            GameModel::Scalar {
                u_max,
                b_max,
                d_max,
            } => out[0] = u_max + b_max + d_max,
        }
        for (a, cap) in out.iter_mut().zip(&self.alphas) {
            *a = a.min(*cap);
        }
    }

    #[inline]
    fn hamiltonian(&self, idx: &[usize], q: &[f64]) -> f64 {
        match &self.spec.model {
            GameModel::Quad {
                id: SubsystemId::X4 | SubsystemId::Y4,
                params,
            } => quad4_hamiltonian(
                params,
                self.coords[1][idx[1]],
                self.g_tan[idx[2]],
                self.coords[2][idx[2]],
                self.coords[3][idx[3]],
                q,
            ),
            GameModel::Quad {
                id: SubsystemId::Z2,
                params,
            } => z2_hamiltonian(params, self.coords[1][idx[1]], q),
            model => {
                let mut x = [0.0; MAX_DIM];
                for (d, &i) in idx.iter().enumerate() {
                    x[d] = self.coords[d][i];
                }
                model.hamiltonian(&x[..idx.len()], q)
            }
        }
    }

    /// Writes the updated values of nodes `start..start + out.len()`.
    pub fn update_range(&self, prev: &[f64], start: usize, out: &mut [f64]) {
        let grid = &self.spec.grid;
        let n = grid.ndim();
        let strides = grid.strides();
        let mut idx = [0usize; MAX_DIM];
        grid.multi_index(start, &mut idx);
        let mut q = [0.0; MAX_DIM];
        let mut alpha = [0.0; MAX_DIM];
        alpha[..n].copy_from_slice(&self.alphas);
        for (k, slot) in out.iter_mut().enumerate() {
            let flat = start + k;
            let v = prev[flat];
            if self.dissipation == Dissipation::Local {
                self.local_alphas(&idx[..n], &mut alpha[..n]);
            }
            let mut diss = 0.0;
            for d in 0..n {
                let s = strides[d];
                let last = grid.axis(d).count - 1;
                let i = idx[d];
                let (qm, qp) = if i == 0 {
                    (self.ghost_lo[d], (prev[flat + s] - v) * self.inv_h[d])
                } else if i == last {
                    ((v - prev[flat - s]) * self.inv_h[d], self.ghost_hi[d])
                } else {
                    (
                        (v - prev[flat - s]) * self.inv_h[d],
                        (prev[flat + s] - v) * self.inv_h[d],
                    )
                };
                q[d] = 0.5 * (qm + qp);
                diss += 0.5 * alpha[d] * (qp - qm);
            }
            let h = self.hamiltonian(&idx[..n], &q[..n]);
            let candidate = v + self.dt * (h + diss);
            *slot = candidate.max(self.spec.cost[flat]);

            // Advance the row-major multi-index.
            let mut d = n;
            while d > 0 {
                d -= 1;
                idx[d] += 1;
                if idx[d] < grid.axis(d).count {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

/// One Lax-Friedrichs dynamic-programming step over the whole table, with
/// node-local dissipation.
pub fn lf_step(
    table: &ValueTable,
    spec: &SubsystemSpec,
    alphas: &[f64],
    dt: f64,
) -> Result<ValueTable> {
    lf_step_with(table, spec, alphas, dt, Dissipation::Local)
}

pub fn lf_step_with(
    table: &ValueTable,
    spec: &SubsystemSpec,
    alphas: &[f64],
    dt: f64,
    dissipation: Dissipation,
) -> Result<ValueTable> {
    if table.values.len() != spec.grid.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.grid.len(),
            found: table.values.len(),
        });
    }
    let kernel = StepKernel::new(spec, alphas, dt, dissipation)?;
    let mut out = vec![0.0; table.values.len()];
    kernel.update_range(&table.values, 0, &mut out);
    Ok(ValueTable {
        grid: table.grid.clone(),
        values: out,
        meta: table.meta.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub subsystem: String,
    pub steps: usize,
    pub final_delta: f64,
    /// Game time covered by the iteration, `steps · dτ`.
    pub pseudo_time: f64,
    pub converged: bool,
    /// Minimum of the converged table.
    pub min_value: f64,
    /// The table was copied from a symmetric subsystem instead of solved.
    #[serde(default)]
    pub reused_symmetry: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueTable,
    pub gradient: GradientTable,
    pub report: ConvergenceReport,
}

/// Pseudo-time iteration state. Drive it with [`Solver::step`] or
/// [`Solver::step_with`] and finish with [`Solver::finish`].
#[derive(Debug)]
pub struct Solver<'a> {
    kernel: StepKernel<'a>,
    cfg: SolverConfig,
    values: Vec<f64>,
    next: Vec<f64>,
    steps: usize,
    quiet: usize,
    last_delta: f64,
}

impl<'a> Solver<'a> {
    pub fn new(spec: &'a SubsystemSpec, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let alphas = dissipation_alphas(spec);
        let dt = cfl_dt(&alphas, &spec.grid, cfg.cfl_factor);
        let kernel = StepKernel::new(spec, &alphas, dt, cfg.dissipation)?;
        Ok(Self {
            kernel,
            cfg,
            values: spec.cost.clone(),
            next: vec![0.0; spec.grid.len()],
            steps: 0,
            quiet: 0,
            last_delta: f64::INFINITY,
        })
    }

    pub fn dt(&self) -> f64 {
        self.kernel.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_converged(&self) -> bool {
        self.quiet >= self.cfg.quiet_steps
    }

    pub fn is_done(&self) -> bool {
        self.is_converged() || self.steps >= self.cfg.max_steps
    }

    pub fn step(&mut self) -> f64 {
        self.step_with(|kernel, prev, next| kernel.update_range(prev, 0, next))
    }

    /// Advances one step, delegating the node updates to `update`, which
    /// must fill `next` exactly as [`StepKernel::update_range`] would.
    /// Returns the largest node change.
    pub fn step_with(&mut self, update: impl FnOnce(&StepKernel<'a>, &[f64], &mut [f64])) -> f64 {
        update(&self.kernel, &self.values, &mut self.next);
        let delta = self
            .values
            .iter()
            .zip(&self.next)
            .map(|(a, b)| (b - a).abs())
            .fold(0.0, f64::max);
        core::mem::swap(&mut self.values, &mut self.next);
        self.steps += 1;
        self.last_delta = delta;
        if delta < self.cfg.convergence_tol {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }
        delta
    }

    pub fn finish(self) -> Solution {
        let spec = self.kernel.spec;
        let converged = self.is_converged();
        let value = ValueTable {
            grid: spec.grid.clone(),
            values: self.values,
            meta: TableMeta {
                subsystem: spec.name().into(),
                solver_hash: spec.solver_hash(&self.cfg),
                converged,
            },
        };
        let gradient = gradient_tables(&value);
        let report = ConvergenceReport {
            subsystem: spec.name().into(),
            steps: self.steps,
            final_delta: self.last_delta,
            pseudo_time: self.steps as f64 * self.kernel.dt,
            converged,
            min_value: value.min_value(),
            reused_symmetry: false,
        };
        Solution {
            value,
            gradient,
            report,
        }
    }
}

/// Iterates from `V_0 = l` until the largest node change stays below the
/// tolerance for `quiet_steps` consecutive steps, or `max_steps` is hit.
/// Non-convergence is reported through `report.converged`, not an error.
pub fn solve(spec: &SubsystemSpec, cfg: &SolverConfig) -> Result<Solution> {
    let mut solver = Solver::new(spec, *cfg)?;
    while !solver.is_done() {
        solver.step();
    }
    Ok(solver.finish())
}

/// Solves the X4, Y4 and Z2 games. Y4 reuses the X4 table when its model
/// and grid coincide with X4's.
pub fn solve_decomposed(
    specs: &[SubsystemSpec; 3],
    cfg: &SolverConfig,
) -> Result<[Solution; 3]> {
    solve_decomposed_with(specs, cfg, solve)
}

/// [`solve_decomposed`] with a caller-provided single-game solver.
pub fn solve_decomposed_with(
    specs: &[SubsystemSpec; 3],
    cfg: &SolverConfig,
    mut solve_one: impl FnMut(&SubsystemSpec, &SolverConfig) -> Result<Solution>,
) -> Result<[Solution; 3]> {
    let ids = specs.each_ref().map(|s| match s.model {
        GameModel::Quad { id, .. } => Some(id),
        _ => None,
    });
    if ids != [Some(SubsystemId::X4), Some(SubsystemId::Y4), Some(SubsystemId::Z2)] {
        return Err(Error::InvalidConfig(
            "decomposed solve expects X4, Y4 and Z2 quadrotor games in order".into(),
        ));
    }
    let x = solve_one(&specs[0], cfg)?;
    let y = match (&specs[0].model, &specs[1].model) {
        (GameModel::Quad { params: px, .. }, GameModel::Quad { params: py, .. })
            if px == py && specs[0].grid.same_shape(&specs[1].grid) =>
        {
            let mut value = x.value.clone();
            value.grid = specs[1].grid.clone();
            value.meta.subsystem = specs[1].name().into();
            value.meta.solver_hash = specs[1].solver_hash(cfg);
            let gradient = GradientTable {
                grid: specs[1].grid.clone(),
                components: x.gradient.components.clone(),
            };
            let mut report = x.report.clone();
            report.subsystem = specs[1].name().into();
            report.reused_symmetry = true;
            Solution {
                value,
                gradient,
                report,
            }
        }
        _ => solve_one(&specs[1], cfg)?,
    };
    let z = solve_one(&specs[2], cfg)?;
    Ok([x, y, z])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use proptest::prelude::*;

    fn toy() -> GameModel {
        GameModel::Scalar {
            u_max: 1.0,
            b_max: 0.5,
            d_max: 0.1,
        }
    }

    fn toy_spec(n: usize) -> SubsystemSpec {
        SubsystemSpec::new(toy(), GridSpec::new(vec![Axis::new("x", -1.0, 1.0, n)]).unwrap())
            .unwrap()
    }

    fn x4_spec(n: usize) -> SubsystemSpec {
        let grid = GridSpec::new(vec![
            Axis::new("xr", -2.0, 2.0, n),
            Axis::new("vx", -2.0, 2.0, n),
            Axis::new("theta_x", -0.35, 0.35, n),
            Axis::new("omega_x", -2.0, 2.0, n),
        ])
        .unwrap();
        SubsystemSpec::new(
            GameModel::Quad {
                id: SubsystemId::X4,
                params: ModelParams::default(),
            },
            grid,
        )
        .unwrap()
    }

    fn z2_spec(n: usize) -> SubsystemSpec {
        let grid = GridSpec::new(vec![Axis::new("zr", -2.0, 2.0, n), Axis::new("vz", -2.0, 2.0, n)])
            .unwrap();
        SubsystemSpec::new(
            GameModel::Quad {
                id: SubsystemId::Z2,
                params: ModelParams::default(),
            },
            grid,
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let toy = toy_spec(11);
        assert!((analytic_hamiltonian(&toy, &[0.0], &[2.0]) + 0.8).abs() < 1e-12);

        let x4 = x4_spec(5);
        let zero = [0.0; 4];
        assert!((analytic_hamiltonian(&x4, &zero, &[1.0, 0.0, 0.0, 0.0]) - 0.6).abs() < 1e-12);
        let h = analytic_hamiltonian(&x4, &zero, &[0.0, 0.0, 0.0, 1.0]);
        assert!((h + 1.745_329).abs() < 1e-5, "{h}");

        let z2 = z2_spec(5);
        assert!((analytic_hamiltonian(&z2, &[0.0, 0.0], &[0.0, 1.0]) + 9.81).abs() < 1e-12);
        assert!(
            (analytic_hamiltonian(&z2, &[0.0, 0.0], &[0.0, -1.0]) + (0.91 * 14.715 - 9.81)).abs()
                < 1e-12
        );
    }

    /// Brute-force `min_u max_{b,d} q·f` over a fine input lattice.
    fn enumerated_hamiltonian(model: &GameModel, x: &[f64], q: &[f64]) -> f64 {
        const N: usize = 21;
        let lat = |m: f64, k: usize| -m + 2.0 * m * k as f64 / (N - 1) as f64;
        match *model {
            GameModel::Quad {
                id: SubsystemId::X4,
                params: p,
            } => {
                let mut best = f64::INFINITY;
                for ia in 0..N {
                    let a = lat(p.a_max, ia);
                    let mut worst = f64::NEG_INFINITY;
                    for ib in 0..N {
                        for id in 0..N {
                            let b = lat(p.b_max, ib);
                            let d = lat(p.d_max, id);
                            let f = [
                                x[1] - b + d,
                                p.g * x[2].tan(),
                                -p.d1 * x[2] + x[3],
                                -p.d0 * x[2] + p.n0 * a,
                            ];
                            worst = worst.max((0..4).map(|i| q[i] * f[i]).sum());
                        }
                    }
                    best = best.min(worst);
                }
                best
            }
            GameModel::Quad {
                id: SubsystemId::Z2,
                params: p,
            } => {
                let mut best = f64::INFINITY;
                for ia in 0..N {
                    let az = p.az_max * ia as f64 / (N - 1) as f64;
                    let mut worst = f64::NEG_INFINITY;
                    for ib in 0..N {
                        for id in 0..N {
                            let f = [x[1] - lat(p.b_max, ib) + lat(p.d_max, id), p.k_t * az - p.g];
                            worst = worst.max(q[0] * f[0] + q[1] * f[1]);
                        }
                    }
                    best = best.min(worst);
                }
                best
            }
            _ => unreachable!(),
        }
    }

    proptest! {
        #[test]
        fn closed_form_matches_enumeration(
            x in proptest::array::uniform4(-1.0f64..1.0),
            q in proptest::array::uniform4(-3.0f64..3.0),
        ) {
            let x4 = [x[0] * 2.0, x[1] * 2.0, x[2] * 0.35, x[3] * 2.0];
            let m = GameModel::Quad { id: SubsystemId::X4, params: ModelParams::default() };
            prop_assert!((m.hamiltonian(&x4, &q) - enumerated_hamiltonian(&m, &x4, &q)).abs() < 1e-9);
            let m = GameModel::Quad { id: SubsystemId::Z2, params: ModelParams::default() };
            prop_assert!((m.hamiltonian(&x4[..2], &q[..2]) - enumerated_hamiltonian(&m, &x4[..2], &q[..2])).abs() < 1e-9);
        }
    }

    #[test]
    fn dissipation_examples() {
        assert_eq!(dissipation_alphas(&toy_spec(11)), vec![1.6]);
        let a = dissipation_alphas(&x4_spec(5));
        assert!((a[0] - 2.6).abs() < 1e-12);
        assert!((a[1] - 9.81 * 0.35f64.tan()).abs() < 1e-12);
        assert!((a[1] - 3.581).abs() < 1e-3);
    }

    #[test]
    fn cfl_examples() {
        let g1 = GridSpec::new(vec![Axis::new("x", -1.0, 1.0, 21)]).unwrap();
        assert!((cfl_dt(&[1.6], &g1, 0.5) - 0.031_25).abs() < 1e-15);
        let g1_fine = GridSpec::new(vec![Axis::new("x", -1.0, 1.0, 41)]).unwrap();
        assert!((cfl_dt(&[1.6], &g1_fine, 0.5) - 0.031_25 / 2.0).abs() < 1e-15);
        let g2 = GridSpec::new(vec![Axis::new("x", -1.0, 1.0, 21), Axis::new("y", 0.0, 2.0, 21)])
            .unwrap();
        assert!((cfl_dt(&[1.0, 1.0], &g2, 0.5) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn lf_step_hand_evaluated_nodes() {
        let spec = toy_spec(21);
        let alphas = dissipation_alphas(&spec);
        let dt = cfl_dt(&alphas, &spec.grid, 0.5);
        let next = lf_step(&spec.cost_table(), &spec, &alphas, dt).unwrap();
        // x = 0.5 is node 15: Ĥ = -0.4, candidate below the cost.
        assert_eq!(next.values[15], 0.5);
        // Kink: q- = -1, q+ = 1, Ĥ = 0 + 1.6.
        assert!((next.values[10] - dt * 1.6).abs() < 1e-15);
        let err = lf_step(&spec.cost_table(), &spec, &alphas, dt * 2.1).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    proptest! {
        #[test]
        fn lf_step_is_monotone(
            vals in proptest::collection::vec(0.0f64..2.0, 81),
            node in 0usize..81,
            bump in 0.0f64..1.0,
        ) {
            let spec = z2_spec(9);
            let alphas = dissipation_alphas(&spec);
            let dt = cfl_dt(&alphas, &spec.grid, 0.5);
            let base = ValueTable::new(spec.grid.clone(), vals.clone(), spec.cost_table().meta).unwrap();
            let mut raised = base.clone();
            raised.values[node] += bump;
            for mode in [Dissipation::Global, Dissipation::Local] {
                let a = lf_step_with(&base, &spec, &alphas, dt, mode).unwrap();
                let b = lf_step_with(&raised, &spec, &alphas, dt, mode).unwrap();
                for k in 0..81 {
                    prop_assert!(b.values[k] >= a.values[k] - 1e-12);
                }
            }
        }

        #[test]
        fn x4_step_is_monotone(
            vals in proptest::collection::vec(0.0f64..3.0, 625),
            node in 0usize..625,
            bump in 0.0f64..1.0,
        ) {
            let spec = x4_spec(5);
            let alphas = dissipation_alphas(&spec);
            let dt = cfl_dt(&alphas, &spec.grid, 0.5);
            let base = ValueTable::new(spec.grid.clone(), vals, spec.cost_table().meta).unwrap();
            let mut raised = base.clone();
            raised.values[node] += bump;
            for mode in [Dissipation::Global, Dissipation::Local] {
                let a = lf_step_with(&base, &spec, &alphas, dt, mode).unwrap();
                let b = lf_step_with(&raised, &spec, &alphas, dt, mode).unwrap();
                for k in 0..625 {
                    prop_assert!(b.values[k] >= a.values[k] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn scalar_game_converges_to_cost() {
        let spec = toy_spec(101);
        let sol = solve(&spec, &SolverConfig::default()).unwrap();
        assert!(sol.report.converged);
        for (v, l) in sol.value.values.iter().zip(&spec.cost) {
            assert!(v >= l);
            assert!((v - l).abs() <= 0.1);
        }
        assert!(sol.report.min_value <= 0.1);
        // Symmetric game on a symmetric grid.
        let n = sol.value.values.len();
        for i in 0..n {
            assert!((sol.value.values[i] - sol.value.values[n - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn iterates_are_nondecreasing_and_above_cost() {
        let spec = z2_spec(41);
        let mut solver = Solver::new(&spec, SolverConfig::default()).unwrap();
        let mut prev = solver.values().to_vec();
        for _ in 0..300 {
            solver.step();
            for ((new, old), l) in solver.values().iter().zip(&prev).zip(&spec.cost) {
                assert!(*new >= old - 1e-12);
                assert!(new >= l);
            }
            prev = solver.values().to_vec();
        }
    }

    #[test]
    fn double_integrator_value_is_point_symmetric() {
        // Thrust authority is asymmetric (+3.58 vs -9.81 m/s²), so V(zr, vz)
        // and V(-zr, -vz) differ; the game is only point-symmetric for the
        // scalar and double-integrator toys.
        let spec = SubsystemSpec::new(
            GameModel::DoubleIntegrator {
                u_max: 1.0,
                b_max: 0.5,
                d_max: 0.1,
            },
            GridSpec::new(vec![Axis::new("x", -1.0, 1.0, 21), Axis::new("v", -1.0, 1.0, 21)])
                .unwrap(),
        )
        .unwrap();
        let mut solver = Solver::new(&spec, SolverConfig::default()).unwrap();
        for _ in 0..500 {
            solver.step();
        }
        let v = solver.values();
        let n = v.len();
        for i in 0..n {
            assert!((v[i] - v[n - 1 - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn decomposed_solve_reuses_x_for_y() {
        let mk = |id: SubsystemId, n: usize| {
            let labels = id.labels();
            let axes = if id == SubsystemId::Z2 {
                vec![Axis::new(labels[0], -2.0, 2.0, 11), Axis::new(labels[1], -2.0, 2.0, 11)]
            } else {
                vec![
                    Axis::new(labels[0], -2.0, 2.0, n),
                    Axis::new(labels[1], -2.0, 2.0, n),
                    Axis::new(labels[2], -0.35, 0.35, n),
                    Axis::new(labels[3], -2.0, 2.0, n),
                ]
            };
            SubsystemSpec::new(
                GameModel::Quad {
                    id,
                    params: ModelParams::default(),
                },
                GridSpec::new(axes).unwrap(),
            )
            .unwrap()
        };
        let specs = [mk(SubsystemId::X4, 5), mk(SubsystemId::Y4, 5), mk(SubsystemId::Z2, 5)];
        let cfg = SolverConfig {
            max_steps: 50,
            ..Default::default()
        };
        let [x, y, z] = solve_decomposed(&specs, &cfg).unwrap();
        assert_eq!(x.value.values, y.value.values);
        assert!(y.report.reused_symmetry);
        assert!(!x.report.reused_symmetry);
        assert_eq!(y.value.meta.subsystem, "Y4");
        assert_eq!(z.value.meta.subsystem, "Z2");

        let wrong = [mk(SubsystemId::X4, 5), mk(SubsystemId::Z2, 5), mk(SubsystemId::Y4, 5)];
        assert!(solve_decomposed(&wrong, &cfg).is_err());
    }
}
