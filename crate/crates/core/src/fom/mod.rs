//! Full-order MAC solvers: Stokes, steady Navier-Stokes by Picard iteration,
//! and unsteady Navier-Stokes by backward Euler with Picard inner iterations.

pub mod case;
pub mod dump;
pub mod sparse;
pub mod stencil;

use log::debug;

use crate::error::SolveError;
use crate::grid::{GridSpec, Parameter, Problem};
use crate::residual::{full_residual, residual_norm2, ResidualMode};

pub use case::FlowCase;
pub use sparse::{DirectSolver, LinearSystem};
pub use stencil::{stencil_row, StencilRow};

/// Default absolute tolerance on the 2-norm of the full nonlinear residual.
pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_MAX_ITER: usize = 100;

/// Concatenated `[u; v; p]` on a grid, optionally stamped with a time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub time: Option<f64>,
}

impl StateVector {
    pub fn zeros(grid: GridSpec) -> Self {
        StateVector {
            grid,
            values: vec![0.0; grid.n_dofs()],
            time: None,
        }
    }

    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, SolveError> {
        if values.len() != grid.n_dofs() {
            return Err(SolveError::DimensionMismatch {
                expected: grid.n_dofs(),
                got: values.len(),
            });
        }
        Ok(StateVector {
            grid,
            values,
            time: None,
        })
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn u(&self) -> &[f64] {
        &self.values[..self.grid.n_u()]
    }

    pub fn v(&self) -> &[f64] {
        &self.values[self.grid.n_u()..self.grid.n_velocity()]
    }

    pub fn p(&self) -> &[f64] {
        &self.values[self.grid.n_velocity()..]
    }

    /// Largest absolute discrete divergence over all cells.
    pub fn max_divergence(&self, case: &FlowCase) -> f64 {
        let g = &self.grid;
        let mut worst = 0.0f64;
        for j in 1..=g.ny {
            for i in 1..=g.nx {
                let ue = if i == g.nx {
                    case.u_wall(1.0, (j as f64 - 0.5) * g.hy)
                } else {
                    self.values[g.u(i, j)]
                };
                let uw = if i == 1 {
                    case.u_wall(0.0, (j as f64 - 0.5) * g.hy)
                } else {
                    self.values[g.u(i - 1, j)]
                };
                let vn = if j == g.ny {
                    case.v_wall((i as f64 - 0.5) * g.hx, 1.0)
                } else {
                    self.values[g.v(i, j)]
                };
                let vs = if j == 1 {
                    case.v_wall((i as f64 - 0.5) * g.hx, 0.0)
                } else {
                    self.values[g.v(i, j - 1)]
                };
                let div = (ue - uw) / g.hx + (vn - vs) / g.hy;
                worst = worst.max(div.abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: DEFAULT_PICARD_TOL,
            max_iter: DEFAULT_PICARD_MAX_ITER,
        }
    }
}

/// States at `t_0 … t_K` with uniform step `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub states: Vec<StateVector>,
    pub reports: Vec<PicardReport>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.tau * (self.states.len().saturating_sub(1)) as f64
    }
}

/// Number of steps `T/τ`, rejecting final times that are not a multiple of τ.
pub fn step_count(tau: f64, final_time: f64) -> Result<usize, SolveError> {
    if !(tau > 0.0) || !(final_time > 0.0) {
        return Err(SolveError::InvalidInput(format!(
            "need tau > 0 and T > 0 (tau = {tau}, T = {final_time})"
        )));
    }
    let k = (final_time / tau).round();
    if (k * tau - final_time).abs() > 1e-9 * final_time.max(1.0) {
        return Err(SolveError::InvalidInput(format!(
            "T = {final_time} is not a multiple of tau = {tau}"
        )));
    }
    Ok(k as usize)
}

/// Assembles `A(frozen) x = f(frozen)`, with the backward-Euler mass term on
/// velocity rows when `mass = Some((1/τ, previous state))`.
pub fn assemble(
    grid: &GridSpec,
    case: &FlowCase,
    frozen: Option<&[f64]>,
    mass: Option<(f64, &[f64])>,
) -> LinearSystem {
    let n = grid.n_dofs();
    let lookup = frozen.map(|f| move |k: usize| f[k]);
    let rows = (0..n).map(|row| {
        let mut r = match &lookup {
            Some(l) => stencil_row(grid, case, row, Some(l)),
            None => stencil_row(grid, case, row, None),
        };
        if let Some((inv_tau, prev)) = mass {
            if grid.is_velocity(row) {
                r.add_mass(row, inv_tau, prev[row]);
            }
        }
        r
    });
    LinearSystem::from_rows(n, rows)
}

pub fn assemble_stokes(grid: &GridSpec, case: &FlowCase) -> LinearSystem {
    assemble(grid, case, None, None)
}

/// Picard-linearized steady Navier-Stokes operator frozen at `prev`.
pub fn assemble_ns_picard(grid: &GridSpec, param: Parameter, prev: &StateVector) -> LinearSystem {
    let case = FlowCase::lid(Problem::SteadyNs, param);
    assemble(grid, &case, Some(&prev.values), None)
}

pub fn solve_case_linear(grid: &GridSpec, case: &FlowCase) -> Result<StateVector, SolveError> {
    let sys = assemble_stokes(grid, case);
    let x = DirectSolver::new().solve(&sys)?;
    StateVector::new(*grid, x)
}

/// Lid-driven Stokes solve.
pub fn solve_stokes(grid: &GridSpec, param: Parameter) -> Result<StateVector, SolveError> {
    solve_case_linear(grid, &FlowCase::lid(Problem::Stokes, param))
}

/// Picard iteration for a steady convective case, starting from `init`.
pub fn picard_steady(
    grid: &GridSpec,
    case: &FlowCase,
    init: &StateVector,
    opts: PicardOptions,
) -> Result<(StateVector, PicardReport), SolveError> {
    picard(grid, case, init, None, opts)
}

pub fn solve_steady_ns(
    grid: &GridSpec,
    param: Parameter,
    init: &StateVector,
    opts: PicardOptions,
) -> Result<(StateVector, PicardReport), SolveError> {
    picard(grid, &FlowCase::lid(Problem::SteadyNs, param), init, None, opts)
}

fn picard(
    grid: &GridSpec,
    case: &FlowCase,
    init: &StateVector,
    mass: Option<(f64, &[f64])>,
    opts: PicardOptions,
) -> Result<(StateVector, PicardReport), SolveError> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(SolveError::InvalidInput(format!(
            "Picard needs tol > 0 and max_iter ≥ 1 (tol = {}, max_iter = {})",
            opts.tol, opts.max_iter
        )));
    }
    if init.values.len() != grid.n_dofs() {
        return Err(SolveError::DimensionMismatch {
            expected: grid.n_dofs(),
            got: init.values.len(),
        });
    }
    let mode = match mass {
        Some((inv_tau, prev)) => ResidualMode::Unsteady {
            prev,
            tau: 1.0 / inv_tau,
        },
        None => ResidualMode::Steady,
    };
    let mut solver = DirectSolver::new();
    let mut u = init.values.clone();
    let mut report = PicardReport {
        iterations: 0,
        residual: f64::INFINITY,
        converged: false,
    };
    for it in 1..=opts.max_iter {
        let sys = assemble(grid, case, Some(&u), mass);
        u = solver.solve(&sys)?;
        let r = full_residual(grid, case, &u, mode).map_err(|e| SolveError::InvalidInput(e.to_string()))?;
        let norm = residual_norm2(&r);
        report = PicardReport {
            iterations: it,
            residual: norm,
            converged: norm <= opts.tol,
        };
        debug!("picard it {it}: |r| = {norm:e}");
        if report.converged {
            break;
        }
    }
    Ok((StateVector::new(*grid, u)?, report))
}

/// One backward-Euler step from `state_k`, Picard warm-started at `state_k`.
pub fn step_unsteady_ns(
    grid: &GridSpec,
    param: Parameter,
    state_k: &StateVector,
    tau: f64,
    opts: PicardOptions,
) -> Result<(StateVector, PicardReport), SolveError> {
    if !(tau > 0.0) {
        return Err(SolveError::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    let case = FlowCase::lid(Problem::UnsteadyNs, param);
    let (mut s, rep) = picard(grid, &case, state_k, Some((1.0 / tau, &state_k.values)), opts)?;
    s.time = state_k.time.map(|t| t + tau);
    Ok((s, rep))
}

/// Advances `init` by `steps` backward-Euler steps.
pub fn solve_unsteady_steps(
    grid: &GridSpec,
    param: Parameter,
    init: &StateVector,
    tau: f64,
    steps: usize,
    opts: PicardOptions,
) -> Result<Trajectory, SolveError> {
    let mut first = init.clone();
    if first.time.is_none() {
        first.time = Some(0.0);
    }
    let mut traj = Trajectory {
        tau,
        states: vec![first],
        reports: Vec::with_capacity(steps),
    };
    extend_trajectory(grid, param, &mut traj, steps, opts)?;
    Ok(traj)
}

/// Appends steps to an existing trajectory until it holds `steps + 1` states.
pub fn extend_trajectory(
    grid: &GridSpec,
    param: Parameter,
    traj: &mut Trajectory,
    steps: usize,
    opts: PicardOptions,
) -> Result<(), SolveError> {
    while traj.states.len() < steps + 1 {
        let k = traj.states.len();
        let last = traj.states.last().expect("trajectory holds the initial state");
        let (next, rep) = step_unsteady_ns(grid, param, last, traj.tau, opts).map_err(|e| SolveError::Step {
            index: k,
            source: Box::new(e),
        })?;
        let mut next = next;
        next.time = Some(k as f64 * traj.tau);
        traj.states.push(next);
        traj.reports.push(rep);
    }
    Ok(())
}

pub fn solve_unsteady_ns(
    grid: &GridSpec,
    param: Parameter,
    init: &StateVector,
    tau: f64,
    final_time: f64,
    opts: PicardOptions,
) -> Result<Trajectory, SolveError> {
    let steps = step_count(tau, final_time)?;
    solve_unsteady_steps(grid, param, init, tau, steps, opts)
}
