//! Row kernel of the MAC discretization.
//!
//! Every row of the full-order operator, and every collocated row evaluated by
//! the reduced solver, goes through [`stencil_row`]. Frozen (Picard) velocities
//! are read through a lookup callback, so the same arithmetic runs against a
//! full state vector or against a handful of closure-local values.
//!
//! Wall treatment: normal velocities sit on the wall and are moved to the
//! right-hand side; tangential velocities use the ghost value
//! `2·wall − interior`, which folds into the diagonal and the right-hand side.

use crate::fom::case::FlowCase;
use crate::grid::{GridSpec, Kind};

/// Upper bound on the number of distinct unknowns a single row touches.
pub const MAX_ROW_ENTRIES: usize = 8;
/// Upper bound on the number of frozen values a single row reads.
pub const MAX_FROZEN_READS: usize = 5;

/// One assembled row: `Σ coef·x[col] = rhs`.
#[derive(Debug, Clone, Copy)]
pub struct StencilRow {
    entries: [(usize, f64); MAX_ROW_ENTRIES],
    len: usize,
    pub rhs: f64,
}

impl StencilRow {
    fn new() -> Self {
        StencilRow {
            entries: [(0, 0.0); MAX_ROW_ENTRIES],
            len: 0,
            rhs: 0.0,
        }
    }

    /// Adds `coef` to column `col`, merging repeated columns.
    pub fn add(&mut self, col: usize, coef: f64) {
        for e in &mut self.entries[..self.len] {
            if e.0 == col {
                e.1 += coef;
                return;
            }
        }
        assert!(self.len < MAX_ROW_ENTRIES, "stencil row overflow");
        self.entries[self.len] = (col, coef);
        self.len += 1;
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries[..self.len]
    }

    pub fn coef(&self, col: usize) -> f64 {
        self.entries()
            .iter()
            .find(|e| e.0 == col)
            .map_or(0.0, |e| e.1)
    }

    /// `Σ coef·x[col] − rhs` with values supplied by `x`.
    pub fn residual(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut s = 0.0;
        for &(c, a) in self.entries() {
            s += a * x(c);
        }
        s - self.rhs
    }

    /// Linear part only: `Σ coef·x[col]`.
    pub fn apply(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut s = 0.0;
        for &(c, a) in self.entries() {
            s += a * x(c);
        }
        s
    }

    /// Backward-Euler mass term `(x − prev)/τ` on a velocity row.
    pub fn add_mass(&mut self, row: usize, inv_tau: f64, prev: f64) {
        self.add(row, inv_tau);
        self.rhs += inv_tau * prev;
    }
}

/// Frozen convecting velocity used to linearize a momentum row.
pub type Frozen<'a> = Option<&'a dyn Fn(usize) -> f64>;

/// Assembles row `row` (a flat index) of `A(frozen)` and `f(frozen)`.
///
/// `frozen` is ignored for cases without convection. The pinned pressure
/// cell `p(1,1)` yields the gauge row `p(1,1) = 0`.
pub fn stencil_row(grid: &GridSpec, case: &FlowCase, row: usize, frozen: Frozen<'_>) -> StencilRow {
    let d = grid.dof(row);
    let frozen = if case.has_convection() { frozen } else { None };
    match d.kind {
        Kind::U => u_row(grid, case, d.i, d.j, frozen),
        Kind::V => v_row(grid, case, d.i, d.j, frozen),
        Kind::P => continuity_row(grid, case, d.i, d.j),
    }
}

/// Frozen flat indices read by `stencil_row` for a given row (structural,
/// independent of values). Wall values are not unknowns and are not listed.
pub fn frozen_reads(grid: &GridSpec, case: &FlowCase, row: usize) -> Vec<usize> {
    if !case.has_convection() {
        return Vec::new();
    }
    let d = grid.dof(row);
    let mut out = Vec::with_capacity(MAX_FROZEN_READS);
    match d.kind {
        Kind::U => {
            out.push(grid.u(d.i, d.j));
            for (ii, jj) in [(d.i, d.j), (d.i, d.j - 1), (d.i + 1, d.j), (d.i + 1, d.j - 1)] {
                if jj >= 1 && jj < grid.ny {
                    out.push(grid.v(ii, jj));
                }
            }
        }
        Kind::V => {
            for (ii, jj) in [(d.i, d.j), (d.i - 1, d.j), (d.i - 1, d.j + 1), (d.i, d.j + 1)] {
                if ii >= 1 && ii < grid.nx {
                    out.push(grid.u(ii, jj));
                }
            }
            out.push(grid.v(d.i, d.j));
        }
        Kind::P => {}
    }
    out
}

/// Adds `coef · u(ii, jj)` where `(ii, jj)` may be a wall or ghost location.
fn add_u(grid: &GridSpec, case: &FlowCase, r: &mut StencilRow, ii: usize, jj: usize, coef: f64) {
    let (nx, ny) = (grid.nx, grid.ny);
    if ii == 0 || ii == nx {
        // normal velocity on the left/right wall
        let x = ii as f64 * grid.hx;
        let y = (jj as f64 - 0.5) * grid.hy;
        r.rhs -= coef * case.u_wall(x, y);
    } else if jj == 0 {
        let g = case.u_wall(ii as f64 * grid.hx, 0.0);
        r.rhs -= coef * 2.0 * g;
        r.add(grid.u(ii, 1), -coef);
    } else if jj == ny + 1 {
        let g = case.u_wall(ii as f64 * grid.hx, 1.0);
        r.rhs -= coef * 2.0 * g;
        r.add(grid.u(ii, ny), -coef);
    } else {
        r.add(grid.u(ii, jj), coef);
    }
}

/// Adds `coef · v(ii, jj)` where `(ii, jj)` may be a wall or ghost location.
fn add_v(grid: &GridSpec, case: &FlowCase, r: &mut StencilRow, ii: usize, jj: usize, coef: f64) {
    let (nx, ny) = (grid.nx, grid.ny);
    if jj == 0 || jj == ny {
        let x = (ii as f64 - 0.5) * grid.hx;
        let y = jj as f64 * grid.hy;
        r.rhs -= coef * case.v_wall(x, y);
    } else if ii == 0 {
        let g = case.v_wall(0.0, jj as f64 * grid.hy);
        r.rhs -= coef * 2.0 * g;
        r.add(grid.v(1, jj), -coef);
    } else if ii == nx + 1 {
        let g = case.v_wall(1.0, jj as f64 * grid.hy);
        r.rhs -= coef * 2.0 * g;
        r.add(grid.v(nx, jj), -coef);
    } else {
        r.add(grid.v(ii, jj), coef);
    }
}

/// Frozen `v(ii, jj)` for `ii` in `1..=nx`; walls supply `jj = 0, ny`.
fn frozen_v(grid: &GridSpec, case: &FlowCase, f: &dyn Fn(usize) -> f64, ii: usize, jj: usize) -> f64 {
    if jj == 0 || jj == grid.ny {
        case.v_wall((ii as f64 - 0.5) * grid.hx, jj as f64 * grid.hy)
    } else {
        f(grid.v(ii, jj))
    }
}

/// Frozen `u(ii, jj)` for `jj` in `1..=ny`; walls supply `ii = 0, nx`.
fn frozen_u(grid: &GridSpec, case: &FlowCase, f: &dyn Fn(usize) -> f64, ii: usize, jj: usize) -> f64 {
    if ii == 0 || ii == grid.nx {
        case.u_wall(ii as f64 * grid.hx, (jj as f64 - 0.5) * grid.hy)
    } else {
        f(grid.u(ii, jj))
    }
}

fn u_row(grid: &GridSpec, case: &FlowCase, i: usize, j: usize, frozen: Frozen<'_>) -> StencilRow {
    let mut r = StencilRow::new();
    let k = 1.0 / case.re();
    let (ihx2, ihy2) = (1.0 / (grid.hx * grid.hx), 1.0 / (grid.hy * grid.hy));

    r.add(grid.u(i, j), 2.0 * k * ihx2 + 2.0 * k * ihy2);
    add_u(grid, case, &mut r, i - 1, j, -k * ihx2);
    add_u(grid, case, &mut r, i + 1, j, -k * ihx2);
    add_u(grid, case, &mut r, i, j - 1, -k * ihy2);
    add_u(grid, case, &mut r, i, j + 1, -k * ihy2);

    r.add(grid.p(i + 1, j), 1.0 / grid.hx);
    r.add(grid.p(i, j), -1.0 / grid.hx);

    if let Some(f) = frozen {
        let a = f(grid.u(i, j));
        let b = 0.25
            * (frozen_v(grid, case, f, i, j)
                + frozen_v(grid, case, f, i, j - 1)
                + frozen_v(grid, case, f, i + 1, j)
                + frozen_v(grid, case, f, i + 1, j - 1));
        let cx = a / (2.0 * grid.hx);
        let cy = b / (2.0 * grid.hy);
        add_u(grid, case, &mut r, i + 1, j, cx);
        add_u(grid, case, &mut r, i - 1, j, -cx);
        add_u(grid, case, &mut r, i, j + 1, cy);
        add_u(grid, case, &mut r, i, j - 1, -cy);
    }

    let (x, y) = grid.position(Kind::U, i, j);
    r.rhs += case.force_u(x, y);
    r
}

fn v_row(grid: &GridSpec, case: &FlowCase, i: usize, j: usize, frozen: Frozen<'_>) -> StencilRow {
    let mut r = StencilRow::new();
    let k = 1.0 / case.re();
    let (ihx2, ihy2) = (1.0 / (grid.hx * grid.hx), 1.0 / (grid.hy * grid.hy));

    r.add(grid.v(i, j), 2.0 * k * ihx2 + 2.0 * k * ihy2);
    add_v(grid, case, &mut r, i - 1, j, -k * ihx2);
    add_v(grid, case, &mut r, i + 1, j, -k * ihx2);
    add_v(grid, case, &mut r, i, j - 1, -k * ihy2);
    add_v(grid, case, &mut r, i, j + 1, -k * ihy2);

    r.add(grid.p(i, j + 1), 1.0 / grid.hy);
    r.add(grid.p(i, j), -1.0 / grid.hy);

    if let Some(f) = frozen {
        let a = 0.25
            * (frozen_u(grid, case, f, i, j)
                + frozen_u(grid, case, f, i - 1, j)
                + frozen_u(grid, case, f, i - 1, j + 1)
                + frozen_u(grid, case, f, i, j + 1));
        let b = f(grid.v(i, j));
        let cx = a / (2.0 * grid.hx);
        let cy = b / (2.0 * grid.hy);
        add_v(grid, case, &mut r, i + 1, j, cx);
        add_v(grid, case, &mut r, i - 1, j, -cx);
        add_v(grid, case, &mut r, i, j + 1, cy);
        add_v(grid, case, &mut r, i, j - 1, -cy);
    }

    let (x, y) = grid.position(Kind::V, i, j);
    r.rhs += case.force_v(x, y);
    r
}

fn continuity_row(grid: &GridSpec, case: &FlowCase, i: usize, j: usize) -> StencilRow {
    let mut r = StencilRow::new();
    if i == 1 && j == 1 {
        r.add(grid.p(1, 1), 1.0);
        return r;
    }
    let (ihx, ihy) = (1.0 / grid.hx, 1.0 / grid.hy);
    add_u(grid, case, &mut r, i, j, ihx);
    add_u(grid, case, &mut r, i - 1, j, -ihx);
    add_v(grid, case, &mut r, i, j, ihy);
    add_v(grid, case, &mut r, i, j - 1, -ihy);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Parameter, Problem};

    fn stokes(re: f64) -> FlowCase {
        FlowCase::lid(Problem::Stokes, Parameter::new(re, 0.0).unwrap())
    }

    #[test]
    fn interior_u_row_coefficients() {
        let g = GridSpec::new(4, 4).unwrap();
        let c = stokes(1.0);
        let row = g.u(2, 2);
        let r = stencil_row(&g, &c, row, None);
        assert_eq!(r.entries().len(), 7);
        assert_eq!(r.coef(row), 64.0);
        assert_eq!(r.coef(g.u(1, 2)), -16.0);
        assert_eq!(r.coef(g.u(3, 2)), -16.0);
        assert_eq!(r.coef(g.u(2, 1)), -16.0);
        assert_eq!(r.coef(g.u(2, 3)), -16.0);
        assert_eq!(r.coef(g.p(3, 2)), 4.0);
        assert_eq!(r.coef(g.p(2, 2)), -4.0);
        assert_eq!(r.rhs, 0.0);
    }

    #[test]
    fn interior_continuity_row_has_four_entries() {
        let g = GridSpec::new(4, 4).unwrap();
        let r = stencil_row(&g, &stokes(1.0), g.p(2, 2), None);
        assert_eq!(r.entries().len(), 4);
        assert_eq!(r.coef(g.u(2, 2)), 4.0);
        assert_eq!(r.coef(g.u(1, 2)), -4.0);
        assert_eq!(r.coef(g.v(2, 2)), 4.0);
        assert_eq!(r.coef(g.v(2, 1)), -4.0);
    }

    #[test]
    fn top_wall_ghost_folds_into_diagonal_and_rhs() {
        let g = GridSpec::new(4, 4).unwrap();
        let p = Parameter::new(1.0, 1.0).unwrap();
        let c = FlowCase::lid(Problem::SteadyNs, p);
        let zero = |_: usize| 0.0;
        let row = g.u(2, 4);
        let r = stencil_row(&g, &c, row, Some(&zero));
        // one fewer neighbor, diagonal gains the reflected 1/hy² term
        assert_eq!(r.entries().len(), 6);
        assert_eq!(r.coef(row), 2.0 * 16.0 + 3.0 * 16.0);
        // rhs = 2·lid(x=0.5)/hy² = 2·1.5·16
        assert_eq!(r.rhs, 48.0);
    }

    #[test]
    fn ones_frozen_gives_unit_average_convection() {
        let g = GridSpec::new(3, 3).unwrap();
        let c = FlowCase::lid(Problem::SteadyNs, Parameter::new(1.0, 0.0).unwrap());
        let ones = |_: usize| 1.0;
        let row = g.u(1, 2);
        let with = stencil_row(&g, &c, row, Some(&ones));
        let zero = |_: usize| 0.0;
        let without = stencil_row(&g, &c, row, Some(&zero));
        // centered x-derivative weighted by frozen u = 1
        let d_east = with.coef(g.u(2, 2)) - without.coef(g.u(2, 2));
        assert!((d_east - 1.0 / (2.0 * g.hx)).abs() < 1e-12);
        // transverse average of v(1,2), v(1,1), v(2,2), v(2,1) = 1
        let d_north = with.coef(g.u(1, 3)) - without.coef(g.u(1, 3));
        let d_south = with.coef(g.u(1, 1)) - without.coef(g.u(1, 1));
        assert!((d_north - 1.0 / (2.0 * g.hy)).abs() < 1e-12);
        assert!((d_south + 1.0 / (2.0 * g.hy)).abs() < 1e-12);
    }

    #[test]
    fn frozen_read_list_matches_actual_reads() {
        use std::cell::RefCell;
        let g = GridSpec::new(5, 4).unwrap();
        let c = FlowCase::lid(Problem::SteadyNs, Parameter::new(7.0, 1.0).unwrap());
        for row in 0..g.n_dofs() {
            let seen = RefCell::new(Vec::new());
            let rec = |k: usize| {
                seen.borrow_mut().push(k);
                0.5
            };
            let _ = stencil_row(&g, &c, row, Some(&rec));
            let mut a = seen.into_inner();
            let mut b = frozen_reads(&g, &c, row);
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b, "row {row}");
        }
    }
}
