use crate::error::RomError;
use crate::fom::FlowCase;
use crate::grid::Parameter;
use crate::lstsq::lstsq;
use crate::residual::{norm_inf, ResidualMode};

use super::ReducedModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OnlineOptions {
    fn default() -> Self {
        OnlineOptions {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

/// Coefficients and estimators of one online solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineSolution {
    /// Coefficients per time level (`c[0]` is the initial level when
    /// unsteady; a single entry when steady).
    pub c: Vec<Vec<f64>>,
    /// `‖P_* r‖∞` per solved level (steady: one entry; unsteady: levels 1…K).
    pub eps: Vec<f64>,
    /// Steady: `eps[0]`; unsteady: `Σ eps`.
    pub delta: f64,
    /// Picard iterations per solved level.
    pub iterations: Vec<usize>,
    /// All levels met the stopping rule.
    pub converged: bool,
    /// Smallest numerical rank met in any least-squares solve.
    pub rank: usize,
}

impl OnlineSolution {
    pub fn final_coefficients(&self) -> &[f64] {
        self.c.last().map(|c| c.as_slice()).unwrap_or(&[])
    }
}

struct LevelResult {
    c: Vec<f64>,
    eps: f64,
    iterations: usize,
    converged: bool,
    rank: usize,
}

impl ReducedModel {
    /// Column-major `m × n` collocated matrix and right-hand side, linearized
    /// at closure-local `frozen`.
    fn collocated_system(&self, case: &FlowCase, frozen: &[f64], mass: Option<(f64, &[f64])>) -> (Vec<f64>, Vec<f64>) {
        let closure = self.closure();
        let wr = self.restricted();
        let (m, n) = (closure.n_rows(), self.n());
        let mut a = vec![0.0; m * n];
        let mut b = vec![0.0; m];
        for k in 0..m {
            let rec = &closure.recipes[k];
            let row = closure.linearized_row(k, case, frozen, mass);
            for &(col, coef) in row.entries() {
                let l = rec.local(col);
                for j in 0..n {
                    a[j * m + k] += coef * wr.get(l, j);
                }
            }
            b[k] = row.rhs;
        }
        (a, b)
    }

    /// One collocated Picard loop from warm start `c0`.
    fn solve_level(
        &self,
        case: &FlowCase,
        c0: &[f64],
        prev_local: Option<&[f64]>,
        opts: OnlineOptions,
    ) -> Result<LevelResult, RomError> {
        let wr = self.restricted();
        let closure = self.closure();
        let mass = self.tau.zip(prev_local).map(|(tau, p)| (1.0 / tau, p));
        let mode = match (self.tau, prev_local) {
            (Some(tau), Some(prev)) => ResidualMode::Unsteady { prev, tau },
            _ => ResidualMode::Steady,
        };
        let (m, n) = (closure.n_rows(), self.n());
        let mut c = c0.to_vec();
        let mut rank = n;
        let mut iterations = 0;
        let mut converged = false;
        let max_iter = if case.has_convection() { opts.max_iter.max(1) } else { 1 };
        let mut eps = f64::INFINITY;
        for it in 1..=max_iter {
            let frozen = wr.combine(&c);
            let (a, b) = self.collocated_system(case, &frozen, mass);
            let sol = lstsq(&a, m, n, &b);
            rank = rank.min(sol.rank);
            let dc = sol.x.iter().zip(&c).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
            c = sol.x;
            iterations = it;
            eps = norm_inf(&closure.residual(case, &wr.combine(&c), mode)?);
            if !case.has_convection() || dc <= opts.tol * norm_inf(&c).max(1.0) || eps <= opts.tol {
                converged = true;
                break;
            }
        }
        if rank < n {
            log::warn!("collocated system rank {rank} < n = {n}");
        }
        Ok(LevelResult {
            c,
            eps,
            iterations,
            converged,
            rank,
        })
    }

    fn require(&self, unsteady: bool) -> Result<(), RomError> {
        if self.is_unsteady() != unsteady {
            return Err(RomError::WrongMode {
                model: self.problem.as_str(),
                requested: if unsteady { "unsteady solve" } else { "steady solve" },
            });
        }
        if self.n() == 0 {
            return Err(RomError::DimensionMismatch { expected: 1, got: 0 });
        }
        Ok(())
    }

    /// Steady collocated least squares; Picard with zero warm start for NS.
    pub fn online_solve_steady(&self, param: Parameter, opts: OnlineOptions) -> Result<OnlineSolution, RomError> {
        self.require(false)?;
        let case = self.case(param);
        let lv = self.solve_level(&case, &vec![0.0; self.n()], None, opts)?;
        Ok(OnlineSolution {
            delta: lv.eps,
            eps: vec![lv.eps],
            iterations: vec![lv.iterations],
            converged: lv.converged,
            rank: lv.rank,
            c: vec![lv.c],
        })
    }

    /// Reduced initial coefficients: least-squares fit of `init` at the
    /// collocation rows (zero initial state gives `c = 0`).
    pub fn initial_coefficients(&self, init: Option<&[f64]>) -> Vec<f64> {
        let n = self.n();
        let Some(u0) = init else {
            return vec![0.0; n];
        };
        let closure = self.closure();
        let wr = self.restricted();
        let m = closure.n_rows();
        let mut a = vec![0.0; m * n];
        let mut b = vec![0.0; m];
        for (k, rec) in closure.recipes.iter().enumerate() {
            let l = rec.local(rec.row);
            for j in 0..n {
                a[j * m + k] = wr.get(l, j);
            }
            b[k] = u0[rec.row];
        }
        lstsq(&a, m, n, &b).x
    }

    /// Backward-Euler march over `steps` levels, warm-starting each Picard
    /// loop at the previous level.
    pub fn online_solve_unsteady(
        &self,
        param: Parameter,
        steps: usize,
        init: Option<&[f64]>,
        opts: OnlineOptions,
    ) -> Result<OnlineSolution, RomError> {
        self.require(true)?;
        let case = self.case(param);
        let wr = self.restricted();
        let mut cs = Vec::with_capacity(steps + 1);
        cs.push(self.initial_coefficients(init));
        let mut eps = Vec::with_capacity(steps);
        let mut iterations = Vec::with_capacity(steps);
        let mut converged = true;
        let mut rank = self.n();
        for k in 1..=steps {
            let prev = cs.last().expect("initial level");
            let prev_local = wr.combine(prev);
            let lv = self
                .solve_level(&case, prev, Some(&prev_local), opts)
                .map_err(|e| RomError::Step {
                    index: k,
                    source: Box::new(e),
                })?;
            converged &= lv.converged;
            rank = rank.min(lv.rank);
            eps.push(lv.eps);
            iterations.push(lv.iterations);
            cs.push(lv.c);
        }
        Ok(OnlineSolution {
            delta: eps.iter().sum(),
            c: cs,
            eps,
            iterations,
            converged,
            rank,
        })
    }
}
