//! Full and collocated residual evaluation.
//!
//! Collocated rows are evaluated through a [`StencilClosure`]: the sorted set
//! of unknowns any collocated row reads. All online arithmetic works on
//! closure-local vectors, so its cost depends on the number of collocation
//! points and never on the grid size.

use crate::error::ResidualError;
use crate::fom::case::FlowCase;
use crate::fom::stencil::{frozen_reads, stencil_row, StencilRow};
use crate::grid::{DofIndex, GridSpec, Parameter, Problem};

/// Time treatment of a residual evaluation.
#[derive(Debug, Clone, Copy)]
pub enum ResidualMode<'a> {
    Steady,
    /// Backward Euler from `prev` (a full state, or closure-local values when
    /// evaluating through a closure).
    Unsteady { prev: &'a [f64], tau: f64 },
}

/// Row `row` of the nonlinear residual operator, linearized at `frozen`.
fn residual_row(
    grid: &GridSpec,
    case: &FlowCase,
    row: usize,
    frozen: &dyn Fn(usize) -> f64,
    mass: Option<(f64, f64)>,
) -> StencilRow {
    let mut r = stencil_row(grid, case, row, Some(frozen));
    if let Some((inv_tau, prev)) = mass {
        if grid.is_velocity(row) {
            r.add_mass(row, inv_tau, prev);
        }
    }
    r
}

/// `r = A(v) v − f(v)` (steady) or `(v − v_prev)/τ + A(v) v − f(v)` on
/// velocity rows (unsteady). The gauge row is reported as zero.
pub fn full_residual(
    grid: &GridSpec,
    case: &FlowCase,
    v: &[f64],
    mode: ResidualMode<'_>,
) -> Result<Vec<f64>, ResidualError> {
    let n = grid.n_dofs();
    if v.len() != n {
        return Err(ResidualError::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    let (inv_tau, prev) = match mode {
        ResidualMode::Steady => (None, None),
        ResidualMode::Unsteady { prev, tau } => {
            if prev.len() != n {
                return Err(ResidualError::DimensionMismatch {
                    expected: n,
                    got: prev.len(),
                });
            }
            (Some(1.0 / tau), Some(prev))
        }
    };
    let lookup = |k: usize| v[k];
    let gauge = grid.gauge_index();
    Ok((0..n)
        .map(|row| {
            if row == gauge {
                return 0.0;
            }
            let mass = inv_tau.map(|it| (it, prev.unwrap()[row]));
            residual_row(grid, case, row, &lookup, mass).residual(lookup)
        })
        .collect())
}

/// Unsteady residual without a previous state is a caller error.
pub fn full_residual_checked(
    grid: &GridSpec,
    case: &FlowCase,
    v: &[f64],
    prev: Option<&[f64]>,
    tau: Option<f64>,
) -> Result<Vec<f64>, ResidualError> {
    match (case, prev, tau) {
        (FlowCase::Lid { problem: Problem::UnsteadyNs, .. }, Some(prev), Some(tau)) => {
            full_residual(grid, case, v, ResidualMode::Unsteady { prev, tau })
        }
        (FlowCase::Lid { problem: Problem::UnsteadyNs, .. }, _, _) => Err(ResidualError::MissingPrevious),
        _ => full_residual(grid, case, v, ResidualMode::Steady),
    }
}

pub fn residual_norm2(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// How a collocation point entered the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointOrigin {
    /// GEIM point of a solution snapshot.
    Solution,
    /// EIM point of a reduced residual.
    Residual,
    /// Added by adaptive enrichment.
    Adaptive,
}

impl PointOrigin {
    pub fn tag(self) -> u8 {
        match self {
            PointOrigin::Solution => 0,
            PointOrigin::Residual => 1,
            PointOrigin::Adaptive => 2,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(PointOrigin::Solution),
            1 => Some(PointOrigin::Residual),
            2 => Some(PointOrigin::Adaptive),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PointOrigin::Solution => "solution",
            PointOrigin::Residual => "residual",
            PointOrigin::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollocationPoint {
    pub dof: DofIndex,
    pub origin: PointOrigin,
    /// Greedy iteration (basis count) at which the point was added.
    pub step: usize,
}

/// Ordered collocation points; row `k` of the subsampling operator selects
/// `points[k]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollocationSet {
    pub points: Vec<CollocationPoint>,
}

impl CollocationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.points.iter().any(|p| p.dof.flat == flat)
    }

    /// Appends a point; duplicates are refused.
    pub fn push(&mut self, p: CollocationPoint) -> bool {
        if self.contains(p.dof.flat) {
            return false;
        }
        self.points.push(p);
        true
    }

    pub fn rows(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.dof.flat).collect()
    }

    pub fn count(&self, origin: PointOrigin) -> usize {
        self.points.iter().filter(|p| p.origin == origin).count()
    }

    /// Points added at greedy iterations `≤ n`.
    pub fn prefix(&self, n: usize) -> CollocationSet {
        CollocationSet {
            points: self.points.iter().copied().filter(|p| p.step <= n).collect(),
        }
    }
}

/// Closure-local addressing for one collocated row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRecipe {
    pub row: usize,
    /// `(flat, closure-local)` pairs for every unknown the row reads.
    pub slots: Vec<(usize, usize)>,
}

impl RowRecipe {
    #[inline]
    pub fn local(&self, flat: usize) -> usize {
        self.slots
            .iter()
            .find(|s| s.0 == flat)
            .map(|s| s.1)
            .expect("unknown outside the row stencil")
    }
}

/// Unknowns read by a set of collocated rows, plus per-row local addressing.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilClosure {
    pub grid: GridSpec,
    pub convective: bool,
    /// Sorted, duplicate-free flat indices.
    pub indices: Vec<usize>,
    pub recipes: Vec<RowRecipe>,
}

/// Flat indices (structural) read by residual row `row`.
pub fn row_support(grid: &GridSpec, row: usize, convective: bool) -> Vec<usize> {
    // Column structure does not depend on parameter values; use any case of
    // the right convective type with a zero frozen field.
    let param = Parameter { re: 1.0, nu: 0.0 };
    let case = if convective {
        FlowCase::lid(Problem::SteadyNs, param)
    } else {
        FlowCase::lid(Problem::Stokes, param)
    };
    let zero = |_: usize| 0.0;
    let r = stencil_row(grid, &case, row, Some(&zero));
    let mut s: Vec<usize> = r.entries().iter().map(|e| e.0).collect();
    s.push(row);
    s.extend(frozen_reads(grid, &case, row));
    s.sort_unstable();
    s.dedup();
    s
}

impl StencilClosure {
    pub fn build(grid: &GridSpec, rows: &[usize], convective: bool) -> Self {
        let supports: Vec<Vec<usize>> = rows.iter().map(|&r| row_support(grid, r, convective)).collect();
        let mut indices: Vec<usize> = supports.iter().flatten().copied().collect();
        indices.sort_unstable();
        indices.dedup();
        let recipes = rows
            .iter()
            .zip(&supports)
            .map(|(&row, sup)| RowRecipe {
                row,
                slots: sup
                    .iter()
                    .map(|&f| (f, indices.binary_search(&f).expect("support inside closure")))
                    .collect(),
            })
            .collect();
        StencilClosure {
            grid: *grid,
            convective,
            indices,
            recipes,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n_rows(&self) -> usize {
        self.recipes.len()
    }

    /// Restriction of a full vector to the closure.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&k| full[k]).collect()
    }

    /// Row `k` linearized at closure-local frozen values, with mass term when
    /// `mass = Some((1/τ, prev_local))`.
    pub fn linearized_row(
        &self,
        k: usize,
        case: &FlowCase,
        frozen_local: &[f64],
        mass: Option<(f64, &[f64])>,
    ) -> StencilRow {
        let rec = &self.recipes[k];
        let lookup = |flat: usize| frozen_local[rec.local(flat)];
        let m = mass.map(|(it, prev)| (it, prev[rec.local(rec.row)]));
        residual_row(&self.grid, case, rec.row, &lookup, m)
    }

    /// Collocated nonlinear residual of closure-local values `x_local`.
    pub fn residual(
        &self,
        case: &FlowCase,
        x_local: &[f64],
        mode: ResidualMode<'_>,
    ) -> Result<Vec<f64>, ResidualError> {
        if x_local.len() != self.len() {
            return Err(ResidualError::DimensionMismatch {
                expected: self.len(),
                got: x_local.len(),
            });
        }
        let mass = match mode {
            ResidualMode::Steady => None,
            ResidualMode::Unsteady { prev, tau } => {
                if prev.len() != self.len() {
                    return Err(ResidualError::DimensionMismatch {
                        expected: self.len(),
                        got: prev.len(),
                    });
                }
                Some((1.0 / tau, prev))
            }
        };
        Ok((0..self.n_rows())
            .map(|k| {
                let rec = &self.recipes[k];
                let row = self.linearized_row(k, case, x_local, mass);
                row.residual(|flat| x_local[rec.local(flat)])
            })
            .collect())
    }
}

/// Closure-restricted basis: `|closure| × n`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedBasis {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RestrictedBasis {
    pub fn from_full(closure: &StencilClosure, basis_cols: &[Vec<f64>]) -> Self {
        let cols = basis_cols.len();
        let rows = closure.len();
        let mut data = vec![0.0; rows * cols];
        for (r, &flat) in closure.indices.iter().enumerate() {
            for (j, col) in basis_cols.iter().enumerate() {
                data[r * cols + j] = col[flat];
            }
        }
        RestrictedBasis { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, j: usize) -> f64 {
        self.data[r * self.cols + j]
    }

    /// `W_restricted · c`, summed over `j` in order.
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                let mut s = 0.0;
                for (w, cj) in row.iter().zip(c) {
                    s += w * cj;
                }
                s
            })
            .collect()
    }
}

/// `P_* · r(W c)` computed from closure data only.
pub fn collocated_residual(
    closure: &StencilClosure,
    basis: &RestrictedBasis,
    c: &[f64],
    case: &FlowCase,
    mode: ResidualMode<'_>,
) -> Result<Vec<f64>, ResidualError> {
    if c.len() != basis.cols {
        return Err(ResidualError::DimensionMismatch {
            expected: basis.cols,
            got: c.len(),
        });
    }
    if basis.rows != closure.len() {
        return Err(ResidualError::DimensionMismatch {
            expected: closure.len(),
            got: basis.rows,
        });
    }
    let x = basis.combine(c);
    closure.residual(case, &x, mode)
}

/// Descriptor of one interpolating functional `σ`.
///
/// `σ` is the linear part of the discrete operator at its point, linearized at
/// the truth snapshot of its own parameter (and time): steady
/// `σ(v) = −(A(w*) v)_x`, unsteady `σ(v) = v_x/τ + (A(w*) v)_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDescriptor {
    pub point: DofIndex,
    pub param: Parameter,
    pub problem: Problem,
    /// `(time index, τ)` for unsteady functionals.
    pub time: Option<(usize, f64)>,
    /// Frozen snapshot values at the point's convective reads.
    pub frozen: Vec<(usize, f64)>,
}

impl FunctionalDescriptor {
    pub fn new(
        grid: &GridSpec,
        point: usize,
        param: Parameter,
        problem: Problem,
        time: Option<(usize, f64)>,
        snapshot: &[f64],
    ) -> Self {
        let case = FlowCase::lid(problem, param);
        let frozen = frozen_reads(grid, &case, point)
            .into_iter()
            .map(|k| (k, snapshot[k]))
            .collect();
        FunctionalDescriptor {
            point: grid.dof(point),
            param,
            problem,
            time,
            frozen,
        }
    }

    pub fn case(&self) -> FlowCase {
        FlowCase::lid(self.problem, self.param)
    }

    fn row(&self, grid: &GridSpec) -> StencilRow {
        let lookup = |k: usize| {
            self.frozen
                .iter()
                .find(|e| e.0 == k)
                .map(|e| e.1)
                .expect("frozen read outside descriptor stencil")
        };
        stencil_row(grid, &self.case(), self.point.flat, Some(&lookup))
    }

    /// Evaluates the functional on `v`, read through `x(flat)`.
    pub fn eval_with(&self, grid: &GridSpec, x: impl Fn(usize) -> f64) -> f64 {
        let row = self.row(grid);
        let av = row.apply(&x);
        match self.time {
            None => -av,
            Some((_, tau)) => {
                let mass = if grid.is_velocity(self.point.flat) {
                    x(self.point.flat) / tau
                } else {
                    0.0
                };
                mass + av
            }
        }
    }
}

/// `σ_d(v)` for a full state `v`. `unsteady` must match the descriptor.
pub fn geim_eval(
    grid: &GridSpec,
    v: &[f64],
    d: &FunctionalDescriptor,
    unsteady: bool,
) -> Result<f64, ResidualError> {
    if d.time.is_some() != unsteady || d.problem.is_unsteady() != unsteady {
        return Err(ResidualError::ModeMismatch);
    }
    if v.len() != grid.n_dofs() {
        return Err(ResidualError::DimensionMismatch {
            expected: grid.n_dofs(),
            got: v.len(),
        });
    }
    Ok(d.eval_with(grid, |k| v[k]))
}

/// All functionals at parameter (and time) of `snapshot`, applied to `v`:
/// entry `x` equals `σ_{x}(v)` for a descriptor built at `x`.
pub fn functional_field(
    grid: &GridSpec,
    problem: Problem,
    param: Parameter,
    tau: Option<f64>,
    snapshot: &[f64],
    v: &[f64],
) -> Vec<f64> {
    let case = FlowCase::lid(problem, param);
    let lookup = |k: usize| snapshot[k];
    (0..grid.n_dofs())
        .map(|row| {
            let r = stencil_row(grid, &case, row, Some(&lookup));
            let av = r.apply(|k| v[k]);
            match tau {
                None => -av,
                Some(tau) => {
                    let mass = if grid.is_velocity(row) { v[row] / tau } else { 0.0 };
                    mass + av
                }
            }
        })
        .collect()
}
