use crate::error::RomError;
use crate::grid::GridSpec;
use crate::residual::{functional_field, CollocationPoint, CollocationSet, FunctionalDescriptor, PointOrigin};

use super::{ReducedModel, TrainedPair};

/// Extensions whose interpolation error is below this fraction of the raw
/// input's magnitude are rejected as already captured.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// `argmax |field|` over unknowns not in `taken`, never the gauge row; the
/// lowest flat index wins ties.
pub fn argmax_eligible(grid: &GridSpec, field: &[f64], taken: &CollocationSet, extra: &[usize]) -> Option<(usize, f64)> {
    let gauge = grid.gauge_index();
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in field.iter().enumerate() {
        if k == gauge || taken.contains(k) || extra.contains(&k) {
            continue;
        }
        let a = v.abs();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((k, a));
        }
    }
    best
}

/// Forward substitution with a unit lower-triangular `l[i][j]` (`j ≤ i`).
fn unit_lower_solve(l: impl Fn(usize, usize) -> f64, rhs: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; rhs.len()];
    for i in 0..rhs.len() {
        let mut s = rhs[i];
        for (j, xj) in x.iter().enumerate().take(i) {
            s -= l(i, j) * xj;
        }
        x[i] = s;
    }
    x
}

impl ReducedModel {
    fn descriptor_time(&self, pair: &TrainedPair) -> Result<Option<(usize, f64)>, RomError> {
        match (self.tau, pair.time) {
            (None, None) => Ok(None),
            (Some(tau), Some(t)) => Ok(Some((t, tau))),
            _ => Err(RomError::WrongMode {
                model: self.problem.as_str(),
                requested: if pair.time.is_some() { "unsteady pair" } else { "steady pair" },
            }),
        }
    }

    /// GEIM extension with the truth snapshot `snapshot` at `pair`.
    ///
    /// Returns the new solution point. Fails with [`RomError::Degenerate`]
    /// when the snapshot is already interpolated; the model is then unchanged.
    pub fn geim_extend(&mut self, snapshot: &[f64], pair: TrainedPair) -> Result<usize, RomError> {
        let g = self.grid;
        if snapshot.len() != g.n_dofs() {
            return Err(RomError::DimensionMismatch {
                expected: g.n_dofs(),
                got: snapshot.len(),
            });
        }
        let time = self.descriptor_time(&pair)?;
        let n = self.n();

        // interpolation residual ξ − W α with σ_i(ξ − Wα) = 0, i ≤ n; the
        // second pass removes what cancellation left behind once the basis
        // captures most of the snapshot
        let mut xi = snapshot.to_vec();
        for _ in 0..2 {
            let s_xi: Vec<f64> = self.functionals.iter().map(|d| d.eval_with(&g, |k| xi[k])).collect();
            let alpha = unit_lower_solve(|i, j| self.sigma[i][j], &s_xi);
            for (col, a) in self.basis.iter().zip(&alpha) {
                xi.iter_mut().zip(col).for_each(|(x, w)| *x -= a * w);
            }
        }

        let tau = time.map(|t| t.1);
        let field = functional_field(&g, self.problem, pair.param, tau, snapshot, &xi);
        let raw = functional_field(&g, self.problem, pair.param, tau, snapshot, snapshot);
        let scale = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (point, max) = argmax_eligible(&g, &field, &self.points, &[]).ok_or(RomError::NoEligiblePoints)?;
        if !(max > DEGENERACY_TOL * scale) || max == 0.0 {
            return Err(RomError::Degenerate { max });
        }

        let d = FunctionalDescriptor::new(&g, point, pair.param, self.problem, time, snapshot);
        let s_new = d.eval_with(&g, |k| xi[k]);
        xi.iter_mut().for_each(|x| *x /= s_new);

        // new column σ_i(ξ_{n+1}) (zero up to round-off) and new row σ_{n+1}(ξ_j)
        for (i, row) in self.sigma.iter_mut().enumerate() {
            row.push(self.functionals[i].eval_with(&g, |k| xi[k]));
        }
        let mut last: Vec<f64> = self.basis.iter().map(|col| d.eval_with(&g, |k| col[k])).collect();
        last.push(d.eval_with(&g, |k| xi[k]));
        self.sigma.push(last);

        self.basis.push(xi);
        self.functionals.push(d);
        self.pairs.push(pair);
        self.points.push(CollocationPoint {
            dof: g.dof(point),
            origin: PointOrigin::Solution,
            step: n + 1,
        });
        self.refresh_online();
        Ok(point)
    }

    /// EIM extension with the full residual `r` of a reduced solution.
    ///
    /// The new point is tagged with the current basis count. Fails with
    /// [`RomError::Degenerate`] (model unchanged) when `r` is interpolated.
    pub fn eim_residual_extend(&mut self, r: &[f64]) -> Result<usize, RomError> {
        let g = self.grid;
        if r.len() != g.n_dofs() {
            return Err(RomError::DimensionMismatch {
                expected: g.n_dofs(),
                got: r.len(),
            });
        }
        let pts = self.residual_points();
        let rhs: Vec<f64> = pts.iter().map(|&x| r[x]).collect();
        let alpha = unit_lower_solve(|i, j| self.residual_basis[j][pts[i]], &rhs);
        let mut rr = r.to_vec();
        for (col, a) in self.residual_basis.iter().zip(&alpha) {
            rr.iter_mut().zip(col).for_each(|(x, w)| *x -= a * w);
        }
        let gauge = g.gauge_index();
        let scale = r
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != gauge)
            .fold(0.0f64, |m, (_, x)| m.max(x.abs()));
        let (point, max) = argmax_eligible(&g, &rr, &self.points, &[]).ok_or(RomError::NoEligiblePoints)?;
        if !(max > DEGENERACY_TOL * scale) || max == 0.0 {
            return Err(RomError::Degenerate { max });
        }
        let pivot = rr[point];
        rr.iter_mut().for_each(|x| *x /= pivot);
        rr[gauge] = 0.0;
        self.residual_basis.push(rr);
        self.points.push(CollocationPoint {
            dof: g.dof(point),
            origin: PointOrigin::Residual,
            step: self.n(),
        });
        self.refresh_online();
        Ok(point)
    }

    /// Adds adaptive points tagged with the current basis count; returns the
    /// number actually added (duplicates and the gauge row are skipped).
    pub fn add_adaptive_points(&mut self, flats: &[usize]) -> usize {
        let gauge = self.grid.gauge_index();
        let step = self.n();
        let mut added = 0;
        for &f in flats {
            if f == gauge || f >= self.grid.n_dofs() {
                continue;
            }
            if self.points.push(CollocationPoint {
                dof: self.grid.dof(f),
                origin: PointOrigin::Adaptive,
                step,
            }) {
                added += 1;
            }
        }
        if added > 0 {
            self.refresh_online();
        }
        added
    }
}
