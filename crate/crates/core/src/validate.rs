//! Truncation studies of a trained model against truth references.
//!
//! For each `n = 1…N` the model prefix of size `n` (first `n` solution
//! points, first `n − 1` residual points, adaptive points added up to `n`) is
//! solved online at every test parameter and compared with the truth.

use rayon::prelude::*;

use crate::error::{RomError, SolveError};
use crate::fom::{solve_steady_ns, solve_stokes, solve_unsteady_steps, PicardOptions, StateVector};
use crate::greedy::{delta_of, estimate};
use crate::grid::{GridSpec, Parameter, Problem};
use crate::io::CurvePoint;
use crate::postproc::{
    argmax, relative_error_steady, relative_error_unsteady, spearman, streamfunction, streamline_error, ErrorReport,
};
use crate::rom::{OnlineOptions, ReducedModel};

/// Truth solutions at the test parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum References {
    Steady(Vec<Vec<f64>>),
    /// All levels `0…K` per parameter.
    Unsteady(Vec<Vec<Vec<f64>>>),
}

impl References {
    pub fn len(&self) -> usize {
        match self {
            References::Steady(r) => r.len(),
            References::Unsteady(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Truth solve at one parameter; `time = Some((τ, K))` returns all levels.
pub fn reference_solution(
    grid: &GridSpec,
    problem: Problem,
    mu: Parameter,
    time: Option<(f64, usize)>,
    opts: PicardOptions,
) -> Result<Vec<Vec<f64>>, SolveError> {
    Ok(match (problem, time) {
        (Problem::Stokes, _) => vec![solve_stokes(grid, mu)?.values],
        (Problem::SteadyNs, _) => {
            let (s, rep) = solve_steady_ns(grid, mu, &StateVector::zeros(*grid), opts)?;
            if !rep.converged {
                log::warn!("reference Picard at {mu:?} stopped at |r| = {:e}", rep.residual);
            }
            vec![s.values]
        }
        (Problem::UnsteadyNs, Some((tau, steps))) => {
            solve_unsteady_steps(grid, mu, &StateVector::zeros(*grid), tau, steps, opts)?
                .states
                .into_iter()
                .map(|s| s.values)
                .collect()
        }
        (Problem::UnsteadyNs, None) => {
            return Err(SolveError::InvalidInput("unsteady reference needs (tau, steps)".into()))
        }
    })
}

/// Truth solutions at all test parameters, computed in parallel.
pub fn references(
    grid: &GridSpec,
    problem: Problem,
    params: &[Parameter],
    time: Option<(f64, usize)>,
    opts: PicardOptions,
) -> Result<References, SolveError> {
    let sols = params
        .par_iter()
        .map(|&mu| reference_solution(grid, problem, mu, time, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(if problem.is_unsteady() {
        References::Unsteady(sols)
    } else {
        References::Steady(sols.into_iter().map(|mut v| v.swap_remove(0)).collect())
    })
}

/// Error of one (possibly truncated) model over the test set.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixResult {
    pub n: usize,
    pub m: usize,
    pub report: ErrorReport,
    /// Worst estimator over the test set.
    pub delta: f64,
    /// Estimator per test parameter.
    pub delta_per_param: Vec<f64>,
}

/// Evaluates `model` at every test parameter. For unsteady problems the
/// error runs over levels `1…K` of the references.
pub fn evaluate(
    model: &ReducedModel,
    params: &[Parameter],
    refs: &References,
    opts: OnlineOptions,
) -> Result<PrefixResult, RomError> {
    if params.len() != refs.len() {
        return Err(RomError::DimensionMismatch {
            expected: params.len(),
            got: refs.len(),
        });
    }
    let steps = match refs {
        References::Unsteady(r) => r.first().map_or(0, |t| t.len() - 1),
        References::Steady(_) => 0,
    };
    let solved = params
        .par_iter()
        .map(|&mu| {
            let (sol, eps) = estimate(model, mu, steps, opts)?;
            let states = if model.is_unsteady() {
                sol.c[1..].iter().map(|c| model.reconstruct(c)).collect::<Result<Vec<_>, _>>()?
            } else {
                vec![model.reconstruct(sol.final_coefficients())?]
            };
            Ok((states, delta_of(&eps)))
        })
        .collect::<Result<Vec<_>, RomError>>()?;
    let delta_per_param: Vec<f64> = solved.iter().map(|s| s.1).collect();
    let report = match refs {
        References::Steady(r) => {
            let approx: Vec<Vec<f64>> = solved.into_iter().map(|mut s| s.0.swap_remove(0)).collect();
            relative_error_steady(r, &approx)?
        }
        References::Unsteady(r) => {
            let truth: Vec<Vec<Vec<f64>>> = r.iter().map(|t| t[1..].to_vec()).collect();
            let approx: Vec<Vec<Vec<f64>>> = solved.into_iter().map(|s| s.0).collect();
            relative_error_unsteady(&truth, &approx)?
        }
    };
    Ok(PrefixResult {
        n: model.n(),
        m: model.m(),
        report,
        delta: argmax(&delta_per_param).1,
        delta_per_param,
    })
}

/// `E(n)` and `Δ(n)` for `n = 1…N` by truncating `model`.
pub fn truncation_study(
    model: &ReducedModel,
    params: &[Parameter],
    refs: &References,
    opts: OnlineOptions,
) -> Result<Vec<PrefixResult>, RomError> {
    (1..=model.n())
        .map(|n| evaluate(&model.prefix(n), params, refs, opts))
        .collect()
}

pub fn curve(results: &[PrefixResult]) -> Vec<CurvePoint> {
    results
        .iter()
        .map(|r| CurvePoint {
            n: r.n,
            e: r.report.e,
            delta: r.delta,
        })
        .collect()
}

/// Spearman correlation of `log E` and `log Δ` over the curve, skipping
/// entries where either vanishes.
pub fn log_correlation(curve: &[CurvePoint]) -> f64 {
    let (a, b): (Vec<f64>, Vec<f64>) = curve
        .iter()
        .filter(|c| c.e > 0.0 && c.delta > 0.0)
        .map(|c| (c.e.ln(), c.delta.ln()))
        .unzip();
    spearman(&a, &b)
}

/// Largest ratio `E(n+1)/E(n)` over consecutive sizes from `from` on; a
/// value ≤ 3 means the curve decays up to a factor-3 oscillation band.
pub fn worst_increase(curve: &[CurvePoint], from: usize) -> f64 {
    curve
        .windows(2)
        .filter(|w| w[0].n >= from && w[0].e > 0.0)
        .map(|w| w[1].e / w[0].e)
        .fold(0.0, f64::max)
}

/// Pointwise streamline error of the model at a steady test parameter.
pub fn streamline_error_at(
    model: &ReducedModel,
    mu: Parameter,
    reference: &[f64],
    opts: OnlineOptions,
) -> Result<(Vec<f64>, f64), RomError> {
    let sol = model.online_solve_steady(mu, opts)?;
    let rom = StateVector::new(model.grid, model.reconstruct(sol.final_coefficients())?)?;
    let truth = StateVector::new(model.grid, reference.to_vec())?;
    Ok(streamline_error(&streamfunction(&truth)?, &streamfunction(&rom)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::{train, TrainingConfig};

    fn p(re: f64, nu: f64) -> Parameter {
        Parameter::new(re, nu).unwrap()
    }

    fn stokes() -> (ReducedModel, Vec<Parameter>) {
        let g = GridSpec::new(8, 8).unwrap();
        let xi = (0..4)
            .flat_map(|i| (0..3).map(move |j| p(10.0 + 600.0 * i as f64, 0.5 + 1.5 * j as f64)))
            .collect::<Vec<_>>();
        let mut cfg = TrainingConfig::new(g, Problem::Stokes, xi.clone());
        cfg.n_max = 5;
        (train(&cfg).unwrap().0, xi)
    }

    #[test]
    fn trained_parameters_have_zero_error() {
        let (model, _) = stokes();
        let params: Vec<Parameter> = model.pairs.iter().map(|q| q.param).collect();
        let refs = references(&model.grid, Problem::Stokes, &params, None, PicardOptions::default()).unwrap();
        let r = evaluate(&model, &params, &refs, OnlineOptions::default()).unwrap();
        assert!(r.report.e < 1e-10, "{}", r.report.e);
    }

    #[test]
    fn full_truncation_equals_untruncated() {
        let (model, _) = stokes();
        let test = vec![p(333.0, 1.1), p(1200.0, 2.7)];
        let refs = references(&model.grid, Problem::Stokes, &test, None, PicardOptions::default()).unwrap();
        let study = truncation_study(&model, &test, &refs, OnlineOptions::default()).unwrap();
        let direct = evaluate(&model, &test, &refs, OnlineOptions::default()).unwrap();
        assert_eq!(study.len(), model.n());
        assert_eq!(study.last().unwrap(), &direct);
        for (k, r) in study.iter().enumerate() {
            assert_eq!(r.n, k + 1);
        }
    }

    #[test]
    fn unsteady_references_and_errors() {
        let g = GridSpec::new(6, 6).unwrap();
        let xi = vec![p(20.0, 0.0), p(80.0, 0.0)];
        let mut cfg = TrainingConfig::new(g, Problem::UnsteadyNs, xi.clone());
        cfg.time = Some((0.1, 0.4));
        cfg.n_max = 4;
        cfg.n_adap_max = 20;
        let (model, _) = train(&cfg).unwrap();
        let refs = references(&g, Problem::UnsteadyNs, &xi, Some((0.1, 4)), PicardOptions::default()).unwrap();
        match &refs {
            References::Unsteady(r) => assert!(r.iter().all(|t| t.len() == 5)),
            _ => panic!("expected unsteady references"),
        }
        let r = evaluate(&model, &xi, &refs, OnlineOptions::default()).unwrap();
        assert!(r.report.e.is_finite());
        assert!(r.report.worst_time.is_some());
    }

    #[test]
    fn curve_helpers() {
        let c: Vec<CurvePoint> = [(1, 1.0, 10.0), (2, 0.1, 1.0), (3, 0.2, 3.0), (4, 0.01, 0.05)]
            .iter()
            .map(|&(n, e, delta)| CurvePoint { n, e, delta })
            .collect();
        assert!((log_correlation(&c) - 1.0).abs() < 1e-12);
        assert!((worst_increase(&c, 1) - 2.0).abs() < 1e-12);
        assert!((worst_increase(&c, 3) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn streamline_error_vanishes_at_trained_parameter() {
        let (model, _) = stokes();
        let mu = model.pairs[1].param;
        let truth = solve_stokes(&model.grid, mu).unwrap().values;
        let (_, max) = streamline_error_at(&model, mu, &truth, OnlineOptions::default()).unwrap();
        assert!(max < 1e-10, "{max}");
    }
}
