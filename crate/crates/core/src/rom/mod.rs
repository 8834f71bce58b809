//! Reduced model, online over-collocation solver and basis extension.

mod extend;
mod online;

pub use extend::{argmax_eligible, DEGENERACY_TOL};
pub use online::{OnlineOptions, OnlineSolution};

use crate::error::RomError;
use crate::fom::FlowCase;
use crate::grid::{GridSpec, Parameter, Problem};
use crate::residual::{
    full_residual, CollocationSet, FunctionalDescriptor, PointOrigin, ResidualMode, RestrictedBasis, StencilClosure,
};

/// Parameter (and time index) of one trained snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainedPair {
    pub param: Parameter,
    pub time: Option<usize>,
}

/// A reduced model: snapshot basis, GEIM functionals, collocation points and
/// the closure data the online solver runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub grid: GridSpec,
    pub problem: Problem,
    /// Time step, for unsteady models.
    pub tau: Option<f64>,
    /// Basis columns `ξ_1 … ξ_n`, full length.
    pub basis: Vec<Vec<f64>>,
    pub functionals: Vec<FunctionalDescriptor>,
    /// `sigma[i][j] = σ_i(ξ_j)`.
    pub sigma: Vec<Vec<f64>>,
    pub points: CollocationSet,
    /// Interpolatory residuals `r_1 … r_{n−1}`, full length; offline only and
    /// not persisted.
    pub residual_basis: Vec<Vec<f64>>,
    pub pairs: Vec<TrainedPair>,
    closure: StencilClosure,
    restricted: RestrictedBasis,
}

impl ReducedModel {
    /// Empty model; `tau` must be given exactly for unsteady problems.
    pub fn new(grid: GridSpec, problem: Problem, tau: Option<f64>) -> Result<Self, RomError> {
        if problem.is_unsteady() != tau.is_some() {
            return Err(RomError::WrongMode {
                model: problem.as_str(),
                requested: if tau.is_some() { "unsteady" } else { "steady" },
            });
        }
        let closure = StencilClosure::build(&grid, &[], problem.has_convection());
        let restricted = RestrictedBasis::from_full(&closure, &[]);
        Ok(ReducedModel {
            grid,
            problem,
            tau,
            basis: Vec::new(),
            functionals: Vec::new(),
            sigma: Vec::new(),
            points: CollocationSet::new(),
            residual_basis: Vec::new(),
            pairs: Vec::new(),
            closure,
            restricted,
        })
    }

    /// Assembles a model from persisted parts and rebuilds its online data.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: GridSpec,
        problem: Problem,
        tau: Option<f64>,
        basis: Vec<Vec<f64>>,
        functionals: Vec<FunctionalDescriptor>,
        sigma: Vec<Vec<f64>>,
        points: CollocationSet,
        pairs: Vec<TrainedPair>,
    ) -> Result<Self, RomError> {
        let mut m = Self::new(grid, problem, tau)?;
        let n = basis.len();
        if functionals.len() != n || sigma.len() != n || pairs.len() != n {
            return Err(RomError::DimensionMismatch {
                expected: n,
                got: functionals.len().min(sigma.len()).min(pairs.len()),
            });
        }
        if let Some(bad) = basis.iter().find(|c| c.len() != grid.n_dofs()) {
            return Err(RomError::DimensionMismatch {
                expected: grid.n_dofs(),
                got: bad.len(),
            });
        }
        m.basis = basis;
        m.functionals = functionals;
        m.sigma = sigma;
        m.points = points;
        m.pairs = pairs;
        m.refresh_online();
        Ok(m)
    }

    /// Basis size `n`.
    pub fn n(&self) -> usize {
        self.basis.len()
    }

    /// Collocation count `m = |X^m|`.
    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn is_unsteady(&self) -> bool {
        self.problem.is_unsteady()
    }

    pub fn closure(&self) -> &StencilClosure {
        &self.closure
    }

    pub fn restricted(&self) -> &RestrictedBasis {
        &self.restricted
    }

    pub fn case(&self, param: Parameter) -> FlowCase {
        FlowCase::lid(self.problem, param)
    }

    /// Residual (EIM) points in insertion order; `residual_basis[k]` belongs
    /// to entry `k`.
    pub fn residual_points(&self) -> Vec<usize> {
        self.points
            .points
            .iter()
            .filter(|p| p.origin == PointOrigin::Residual)
            .map(|p| p.dof.flat)
            .collect()
    }

    /// Rebuilds the stencil closure and restricted basis after `points` or
    /// `basis` changed.
    pub fn refresh_online(&mut self) {
        self.closure = StencilClosure::build(&self.grid, &self.points.rows(), self.problem.has_convection());
        self.restricted = RestrictedBasis::from_full(&self.closure, &self.basis);
    }

    /// `W·c` on the full grid.
    pub fn reconstruct(&self, c: &[f64]) -> Result<Vec<f64>, RomError> {
        if c.len() != self.n() {
            return Err(RomError::DimensionMismatch {
                expected: self.n(),
                got: c.len(),
            });
        }
        let mut out = vec![0.0; self.grid.n_dofs()];
        for (col, &cj) in self.basis.iter().zip(c) {
            out.iter_mut().zip(col).for_each(|(o, w)| *o += cj * w);
        }
        Ok(out)
    }

    /// Full residual of `W·c` (with `W·c_prev` as previous level when unsteady).
    pub fn full_residual_of(&self, param: Parameter, c: &[f64], c_prev: Option<&[f64]>) -> Result<Vec<f64>, RomError> {
        let v = self.reconstruct(c)?;
        let case = self.case(param);
        let r = match (self.tau, c_prev) {
            (None, _) => full_residual(&self.grid, &case, &v, ResidualMode::Steady)?,
            (Some(tau), Some(cp)) => {
                let prev = self.reconstruct(cp)?;
                full_residual(&self.grid, &case, &v, ResidualMode::Unsteady { prev: &prev, tau })?
            }
            (Some(_), None) => return Err(crate::error::ResidualError::MissingPrevious.into()),
        };
        Ok(r)
    }

    /// The model restricted to its first `n` basis functions, with the
    /// collocation points added at iterations `≤ n`.
    pub fn prefix(&self, n: usize) -> ReducedModel {
        let n = n.min(self.n());
        let points = self.points.prefix(n);
        let n_res = points.count(PointOrigin::Residual).min(self.residual_basis.len());
        let mut m = ReducedModel {
            grid: self.grid,
            problem: self.problem,
            tau: self.tau,
            basis: self.basis[..n].to_vec(),
            functionals: self.functionals[..n].to_vec(),
            sigma: self.sigma[..n].iter().map(|row| row[..n].to_vec()).collect(),
            points,
            residual_basis: self.residual_basis[..n_res].to_vec(),
            pairs: self.pairs[..n].to_vec(),
            closure: self.closure.clone(),
            restricted: self.restricted.clone(),
        };
        m.refresh_online();
        m
    }
}

#[cfg(test)]
mod tests;
