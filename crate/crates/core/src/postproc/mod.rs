//! Streamfunction recovery, error metrics and MAC convergence tables.

mod convergence;
mod stream;

pub use convergence::{
    convergence_table, observed_orders, sample_reference, ConvergenceProblem, ConvergenceRow, ConvergenceSettings,
};
pub use stream::{streamfunction, streamline_error, vorticity_at_nodes, StreamField};

use crate::error::ResidualError;
use crate::residual::norm_inf;

/// Grid-function L² norm `sqrt(hx·hy·Σ e²)`.
pub fn l2_grid_norm(e: &[f64], hx: f64, hy: f64) -> f64 {
    (hx * hy * e.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Shifts `p` by a constant so its mean equals the mean of `target`.
pub fn match_mean(p: &mut [f64], target: &[f64]) {
    if p.is_empty() {
        return;
    }
    let n = p.len() as f64;
    let shift = target.iter().sum::<f64>() / target.len() as f64 - p.iter().sum::<f64>() / n;
    p.iter_mut().for_each(|x| *x += shift);
}

/// `‖u − û‖∞ / ‖u‖∞` for one pair of states.
pub fn relative_inf_error(reference: &[f64], approx: &[f64]) -> Result<f64, ResidualError> {
    if reference.len() != approx.len() {
        return Err(ResidualError::DimensionMismatch {
            expected: reference.len(),
            got: approx.len(),
        });
    }
    let diff = reference.iter().zip(approx).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = norm_inf(reference);
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Relative error `E` over a test set and (optionally) a set of time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `E = max over parameters (and times)`.
    pub e: f64,
    /// Per-parameter worst case.
    pub per_param: Vec<f64>,
    /// Index of the parameter attaining `e`.
    pub worst_param: usize,
    /// Time index (into the evaluated time list) attaining `e`, when unsteady.
    pub worst_time: Option<usize>,
}

/// Steady metric: `max_μ ‖u(μ) − û(μ)‖∞ / ‖u(μ)‖∞`.
pub fn relative_error_steady(references: &[Vec<f64>], approx: &[Vec<f64>]) -> Result<ErrorReport, ResidualError> {
    if references.len() != approx.len() {
        return Err(ResidualError::DimensionMismatch {
            expected: references.len(),
            got: approx.len(),
        });
    }
    let per_param = references
        .iter()
        .zip(approx)
        .map(|(r, a)| relative_inf_error(r, a))
        .collect::<Result<Vec<_>, _>>()?;
    let (worst_param, e) = argmax(&per_param);
    Ok(ErrorReport {
        e,
        per_param,
        worst_param,
        worst_time: None,
    })
}

/// Unsteady metric: for each parameter, the worst-in-time error normalized
/// by the largest reference magnitude over the evaluated times.
///
/// `references[μ][t]` and `approx[μ][t]` are full states.
pub fn relative_error_unsteady(
    references: &[Vec<Vec<f64>>],
    approx: &[Vec<Vec<f64>>],
) -> Result<ErrorReport, ResidualError> {
    if references.len() != approx.len() {
        return Err(ResidualError::DimensionMismatch {
            expected: references.len(),
            got: approx.len(),
        });
    }
    let mut per_param = Vec::with_capacity(references.len());
    let mut worst_times = Vec::with_capacity(references.len());
    for (rs, a_s) in references.iter().zip(approx) {
        if rs.len() != a_s.len() {
            return Err(ResidualError::DimensionMismatch {
                expected: rs.len(),
                got: a_s.len(),
            });
        }
        let scale = rs.iter().map(|r| norm_inf(r)).fold(0.0f64, f64::max);
        let diffs: Vec<f64> = rs
            .iter()
            .zip(a_s)
            .map(|(r, a)| r.iter().zip(a).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
            .collect();
        let (t, d) = argmax(&diffs);
        per_param.push(if scale > 0.0 { d / scale } else { d });
        worst_times.push(t);
    }
    let (worst_param, e) = argmax(&per_param);
    Ok(ErrorReport {
        e,
        worst_time: worst_times.get(worst_param).copied(),
        per_param,
        worst_param,
    })
}

/// First index of the maximum (lowest index wins ties); `(0, 0.0)` if empty.
pub fn argmax(xs: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (k, &x) in xs.iter().enumerate() {
        if x > best.1 {
            best = (k, x);
        }
    }
    if xs.is_empty() {
        (0, 0.0)
    } else {
        best
    }
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da * db).sqrt()
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k;
        while e + 1 < idx.len() && x[idx[e + 1]] == x[idx[k]] {
            e += 1;
        }
        let avg = (k + e) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=e] {
            r[i] = avg;
        }
        k = e + 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_relative_error() {
        let r = relative_error_steady(&[vec![2.0, -4.0]], &[vec![2.0, -3.0]]).unwrap();
        assert_eq!(r.e, 0.25);
        let same = relative_error_steady(&[vec![1.0, 3.0]], &[vec![1.0, 3.0]]).unwrap();
        assert_eq!(same.e, 0.0);
    }

    #[test]
    fn unsteady_normalizes_by_time_max() {
        let refs = vec![vec![vec![1.0, 0.0], vec![4.0, 0.0]]];
        let app = vec![vec![vec![0.0, 0.0], vec![4.0, 0.0]]];
        let r = relative_error_unsteady(&refs, &app).unwrap();
        assert_eq!(r.e, 0.25);
        assert_eq!(r.worst_time, Some(0));
    }

    #[test]
    fn spearman_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&a, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_matching() {
        let mut p = vec![1.0, 2.0, 3.0];
        match_mean(&mut p, &[0.0, 0.0, 3.0]);
        assert_eq!(p, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn l2_norm_scaling() {
        assert_eq!(l2_grid_norm(&[3.0, 4.0], 0.25, 1.0), 2.5);
    }
}
