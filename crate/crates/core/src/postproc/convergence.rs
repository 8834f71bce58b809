use crate::error::SolveError;
use crate::fom::case::{manufactured_p, manufactured_u, manufactured_v};
use crate::fom::{solve_case_linear, solve_steady_ns, FlowCase, PicardOptions, StateVector};
use crate::grid::{GridSpec, Kind, Parameter};

use super::{l2_grid_norm, match_mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceProblem {
    /// Manufactured Stokes solution at `Re = 10`.
    Stokes,
    /// Lid-driven steady NS (`ν = 1`, `Re = 20`) against a fine reference.
    SteadyNs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSettings {
    pub stokes_re: f64,
    pub ns_param: Parameter,
    pub reference_n: usize,
    pub picard: PicardOptions,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            stokes_re: 10.0,
            ns_param: Parameter { re: 20.0, nu: 1.0 },
            reference_n: 256,
            picard: PicardOptions {
                tol: 1e-8,
                max_iter: 100,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub u_err: f64,
    pub v_err: f64,
    pub p_err: f64,
}

/// Samples a fine `N×N` reference at the staggered locations of a coarse
/// `n×n` grid (`N` a multiple of `2n`).
///
/// `u` and `v` are averaged over the two fine unknowns straddling the coarse
/// location; `p` over the four fine cells covering the coarse cell centre.
pub fn sample_reference(fine: &StateVector, coarse: &GridSpec) -> Result<Vec<f64>, SolveError> {
    let fg = &fine.grid;
    if !fg.nx.is_multiple_of(coarse.nx) || !fg.ny.is_multiple_of(coarse.ny) {
        return Err(SolveError::InvalidInput(format!(
            "reference {}x{} is not a refinement of {}x{}",
            fg.nx, fg.ny, coarse.nx, coarse.ny
        )));
    }
    let (rx, ry) = (fg.nx / coarse.nx, fg.ny / coarse.ny);
    if rx == 1 && ry == 1 {
        return Ok(fine.values.clone());
    }
    if rx % 2 != 0 || ry % 2 != 0 {
        return Err(SolveError::InvalidInput("refinement ratio must be even".into()));
    }
    let x = &fine.values;
    let mut out = vec![0.0; coarse.n_dofs()];
    for flat in 0..coarse.n_dofs() {
        let d = coarse.dof(flat);
        let (i, j) = (d.i, d.j);
        out[flat] = match d.kind {
            Kind::U => {
                let (fi, fj) = (rx * i, ry * j - ry / 2);
                0.5 * (x[fg.u(fi, fj)] + x[fg.u(fi, fj + 1)])
            }
            Kind::V => {
                let (fi, fj) = (rx * i - rx / 2, ry * j);
                0.5 * (x[fg.v(fi, fj)] + x[fg.v(fi + 1, fj)])
            }
            Kind::P => {
                let (fi, fj) = (rx * i - rx / 2, ry * j - ry / 2);
                0.25 * (x[fg.p(fi, fj)] + x[fg.p(fi + 1, fj)] + x[fg.p(fi, fj + 1)] + x[fg.p(fi + 1, fj + 1)])
            }
        };
    }
    Ok(out)
}

fn exact_manufactured(grid: &GridSpec, re: f64) -> Vec<f64> {
    (0..grid.n_dofs())
        .map(|flat| {
            let d = grid.dof(flat);
            let (x, y) = grid.position(d.kind, d.i, d.j);
            match d.kind {
                Kind::U => manufactured_u(x, y),
                Kind::V => manufactured_v(x, y),
                Kind::P => manufactured_p(x, re),
            }
        })
        .collect()
}

fn row_from(grid: &GridSpec, computed: &StateVector, exact: &[f64]) -> ConvergenceRow {
    let nu = grid.n_u();
    let nv = grid.n_v();
    let c = &computed.values;
    let eu: Vec<f64> = (0..nu).map(|k| c[k] - exact[k]).collect();
    let ev: Vec<f64> = (nu..nu + nv).map(|k| c[k] - exact[k]).collect();
    let mut p = c[nu + nv..].to_vec();
    match_mean(&mut p, &exact[nu + nv..]);
    let ep: Vec<f64> = p.iter().zip(&exact[nu + nv..]).map(|(a, b)| a - b).collect();
    ConvergenceRow {
        n: grid.nx,
        u_err: l2_grid_norm(&eu, grid.hx, grid.hy),
        v_err: l2_grid_norm(&ev, grid.hx, grid.hy),
        p_err: l2_grid_norm(&ep, grid.hx, grid.hy),
    }
}

/// L² errors on `n×n` grids for each `n` in `sizes`.
pub fn convergence_table(
    problem: ConvergenceProblem,
    sizes: &[usize],
    settings: &ConvergenceSettings,
) -> Result<Vec<ConvergenceRow>, SolveError> {
    match problem {
        ConvergenceProblem::Stokes => {
            let case = FlowCase::Manufactured { re: settings.stokes_re };
            sizes
                .iter()
                .map(|&n| {
                    let g = GridSpec::new(n, n).map_err(|e| SolveError::InvalidInput(e.to_string()))?;
                    let s = solve_case_linear(&g, &case)?;
                    Ok(row_from(&g, &s, &exact_manufactured(&g, settings.stokes_re)))
                })
                .collect()
        }
        ConvergenceProblem::SteadyNs => {
            let solve = |n: usize| -> Result<(GridSpec, StateVector), SolveError> {
                let g = GridSpec::new(n, n).map_err(|e| SolveError::InvalidInput(e.to_string()))?;
                let (s, rep) = solve_steady_ns(&g, settings.ns_param, &StateVector::zeros(g), settings.picard)?;
                if !rep.converged {
                    log::warn!("{n}x{n} Picard stopped at |r| = {:e}", rep.residual);
                }
                Ok((g, s))
            };
            let (_, reference) = solve(settings.reference_n)?;
            sizes
                .iter()
                .map(|&n| {
                    let (g, s) = solve(n)?;
                    let exact = sample_reference(&reference, &g)?;
                    Ok(row_from(&g, &s, &exact))
                })
                .collect()
        }
    }
}

/// `log₂(err(h)/err(h/2))` between consecutive rows, per component.
pub fn observed_orders(rows: &[ConvergenceRow]) -> Vec<[f64; 3]> {
    rows.windows(2)
        .map(|w| {
            let o = |a: f64, b: f64| (a / b).log2();
            [
                o(w[0].u_err, w[1].u_err),
                o(w[0].v_err, w[1].v_err),
                o(w[0].p_err, w[1].p_err),
            ]
        })
        .collect()
}
