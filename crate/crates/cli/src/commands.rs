//! The five batch commands. Each writes its artifacts under the configured
//! output directory and returns a summary for printing or inspection.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hymac::fom::dump::{write_field_file, write_trajectory};
use hymac::fom::{solve_steady_ns, solve_stokes, solve_unsteady_steps, FlowCase, PicardOptions, StateVector};
use hymac::greedy::{train, StopReason, TrainingLog};
use hymac::io::{convergence_csv, error_curve_csv, read_model, stream_csv, write_model, CurvePoint};
use hymac::postproc::{convergence_table, streamfunction, ConvergenceProblem, ConvergenceRow, ConvergenceSettings};
use hymac::rom::ReducedModel;
use hymac::validate::{curve, log_correlation, reference_solution, streamline_error_at, truncation_study, PrefixResult, References};
use hymac::{GridSpec, Parameter, Problem, TrainError};
use rayon::prelude::*;
use serde_json::json;

use crate::cache::{ReferenceCache, ReferenceKey};
use crate::config::{ConfigError, RunConfig};
use crate::{fmt_f64, CliError};

/// Divergence above this is reported as a failed check.
pub const DIVERGENCE_TOL: f64 = 1e-8;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FomSummary {
    pub files: Vec<PathBuf>,
    pub seconds: f64,
    pub max_divergence: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FomSummary {
    pub fn divergence_ok(&self) -> bool {
        self.max_divergence <= DIVERGENCE_TOL
    }
}

/// Full-order solve at `cfg.param`: field CSVs plus `fom_run.json`.
/// Non-convergence is reported as a numerical failure after the outputs are
/// written.
pub fn cmd_fom(cfg: &RunConfig) -> Result<FomSummary, CliError> {
    let grid = cfg.grid()?;
    let time = cfg.time_steps()?;
    let mu = cfg
        .param
        .ok_or_else(|| ConfigError::Invalid("`fom` needs a parameter (re, nu)".into()))?;
    create_dir(&cfg.out_dir)?;
    let case = FlowCase::lid(cfg.problem, mu);
    let t0 = Instant::now();
    let (states, iterations, converged, residual) = match (cfg.problem, time) {
        (Problem::Stokes, _) => (vec![solve_stokes(&grid, mu)?], 1, true, 0.0),
        (Problem::SteadyNs, _) => {
            let (s, rep) = solve_steady_ns(&grid, mu, &StateVector::zeros(grid), cfg.fom)?;
            (vec![s], rep.iterations, rep.converged, rep.residual)
        }
        (Problem::UnsteadyNs, Some((tau, steps))) => {
            let traj = solve_unsteady_steps(&grid, mu, &StateVector::zeros(grid), tau, steps, cfg.fom)?;
            let it = traj.reports.iter().map(|r| r.iterations).sum();
            let ok = traj.reports.iter().all(|r| r.converged);
            let res = traj.reports.iter().fold(0.0f64, |m, r| m.max(r.residual));
            let idx = cfg.dump_times.clone().unwrap_or_else(|| vec![steps]);
            if let Some(&bad) = idx.iter().find(|&&k| k > steps) {
                return Err(ConfigError::Invalid(format!("dump time index {bad} exceeds {steps} steps")).into());
            }
            let dir = cfg.out_dir.join("fom_trajectory");
            write_trajectory(&dir, &traj, &idx).map_err(|e| CliError::io(&dir, e))?;
            (traj.states, it, ok, res)
        }
        (Problem::UnsteadyNs, None) => unreachable!("time_steps rejects unsteady without time"),
    };
    let seconds = t0.elapsed().as_secs_f64();
    let max_divergence = states.iter().map(|s| s.max_divergence(&case)).fold(0.0, f64::max);
    let mut files = Vec::new();
    if !cfg.problem.is_unsteady() {
        let p = cfg.out_dir.join("fom_field.csv");
        write_field_file(&p, &states[0]).map_err(|e| CliError::io(&p, e))?;
        files.push(p);
    } else {
        let dir = cfg.out_dir.join("fom_trajectory");
        for k in cfg.dump_times.clone().unwrap_or_else(|| vec![states.len() - 1]) {
            files.push(dir.join(format!("field_{k:06}.csv")));
        }
    }
    let meta = json!({
        "problem": cfg.problem.as_str(),
        "nx": grid.nx,
        "ny": grid.ny,
        "re": mu.re,
        "nu": mu.nu,
        "tau": cfg.time.map(|t| t.0),
        "final_time": cfg.time.map(|t| t.1),
        "seconds": seconds,
        "picard_iterations": iterations,
        "picard_residual": residual,
        "converged": converged,
        "max_divergence": max_divergence,
        "divergence_ok": max_divergence <= DIVERGENCE_TOL,
    });
    let p = cfg.out_dir.join("fom_run.json");
    write(&p, serde_json::to_string_pretty(&meta).expect("json value") + "\n")?;
    files.push(p);
    let summary = FomSummary {
        files,
        seconds,
        max_divergence,
        iterations,
        converged,
    };
    if !converged {
        return Err(CliError::Numerical(format!(
            "Picard iteration did not converge (residual {})",
            fmt_f64(residual)
        )));
    }
    Ok(summary)
}

/// Grid-refinement table over `cfg.grids`, written to `convergence.csv`.
/// `re`/`nu` override the default manufactured Re and NS parameter.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>, CliError> {
    let problem = match cfg.problem {
        Problem::Stokes => ConvergenceProblem::Stokes,
        Problem::SteadyNs => ConvergenceProblem::SteadyNs,
        Problem::UnsteadyNs => {
            return Err(ConfigError::Invalid("`convergence` supports stokes and steady-ns".into()).into())
        }
    };
    if cfg.grids.is_empty() {
        return Err(ConfigError::Invalid("grid list is empty".into()).into());
    }
    for &n in &cfg.grids {
        GridSpec::new(n, n).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if problem == ConvergenceProblem::SteadyNs && !cfg.reference_n.is_multiple_of(n) {
            return Err(ConfigError::Invalid(format!("grid {n} does not divide reference_n = {}", cfg.reference_n)).into());
        }
    }
    let mut settings = ConvergenceSettings {
        reference_n: cfg.reference_n,
        picard: PicardOptions {
            tol: cfg.reference_tol,
            max_iter: cfg.fom.max_iter,
        },
        ..ConvergenceSettings::default()
    };
    if let Some(mu) = cfg.param {
        settings.stokes_re = mu.re;
        settings.ns_param = mu;
    }
    let rows = convergence_table(problem, &cfg.grids, &settings)?;
    create_dir(&cfg.out_dir)?;
    write(&cfg.out_dir.join("convergence.csv"), convergence_csv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: ReducedModel,
    pub log: TrainingLog,
    pub model_path: PathBuf,
    pub log_path: PathBuf,
    pub seconds: f64,
}

/// Greedy training; writes `model.bin` and `training_log.csv`. A run that
/// stops early still persists the model built so far, with a warning.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    let tc = cfg.training_config()?;
    create_dir(&cfg.out_dir)?;
    let t0 = Instant::now();
    let (model, log) = train(&tc).map_err(|e| match e {
        TrainError::Config(m) => CliError::Config(ConfigError::Invalid(m)),
        other => CliError::Train(other),
    })?;
    let seconds = t0.elapsed().as_secs_f64();
    let model_path = cfg.out_dir.join("model.bin");
    write_model(&model_path, &model, &log)?;
    let log_path = cfg.out_dir.join("training_log.csv");
    write(&log_path, log.to_csv())?;
    if let StopReason::Degenerate(_) = &log.stop {
        log::warn!(
            "training stopped early at n = {} ({}); partial model written to {}",
            model.n(),
            log.stop.describe(),
            model_path.display()
        );
    }
    Ok(TrainSummary {
        model,
        log,
        model_path,
        log_path,
        seconds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveRow {
    pub param: Parameter,
    /// Final-level coefficients.
    pub coefficients: Vec<f64>,
    pub delta: f64,
    /// Estimator per solved level.
    pub eps: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Online wall time only.
    pub seconds: f64,
    /// Outside the configured parameter domain.
    pub extrapolated: bool,
}

fn outside(mu: Parameter, cfg: &RunConfig) -> bool {
    let out = |x: f64, (lo, hi): (f64, f64)| x < lo || x > hi;
    out(mu.re, cfg.re_range) || out(mu.nu, cfg.nu_range)
}

/// Steps for an unsteady model; the configured τ must match the model's.
fn model_steps(model: &ReducedModel, cfg: &RunConfig) -> Result<usize, CliError> {
    let Some(tau) = model.tau else { return Ok(0) };
    let (t, final_time) = cfg
        .time
        .ok_or_else(|| ConfigError::Invalid("unsteady model needs tau and final_time".into()))?;
    if t != tau {
        return Err(ConfigError::Invalid(format!("configured tau {t} differs from the model's {tau}")).into());
    }
    let mut c = cfg.clone();
    c.problem = model.problem;
    c.time = Some((tau, final_time));
    Ok(c.time_steps()?.expect("unsteady").1)
}

/// Online solves of a loaded model at `params`.
pub fn solve_model(model: &ReducedModel, params: &[Parameter], cfg: &RunConfig) -> Result<Vec<SolveRow>, CliError> {
    let steps = model_steps(model, cfg)?;
    params
        .iter()
        .map(|&mu| {
            let t0 = Instant::now();
            let sol = if model.is_unsteady() {
                model.online_solve_unsteady(mu, steps, None, cfg.online)?
            } else {
                model.online_solve_steady(mu, cfg.online)?
            };
            let seconds = t0.elapsed().as_secs_f64();
            if !sol.converged {
                log::warn!("online solve at (Re = {}, nu = {}) did not converge", mu.re, mu.nu);
            }
            Ok(SolveRow {
                param: mu,
                coefficients: sol.final_coefficients().to_vec(),
                delta: sol.delta,
                iterations: sol.iterations.iter().sum(),
                eps: sol.eps,
                converged: sol.converged,
                seconds,
                extrapolated: outside(mu, cfg),
            })
        })
        .collect()
}

pub fn solve_csv(rows: &[SolveRow], n: usize) -> String {
    let mut s = String::from("re,nu,delta,seconds,iterations,converged,extrapolated");
    for k in 1..=n {
        s.push_str(&format!(",c_{k}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}",
            fmt_f64(r.param.re),
            fmt_f64(r.param.nu),
            fmt_f64(r.delta),
            fmt_f64(r.seconds),
            r.iterations,
            r.converged,
            r.extrapolated
        ));
        for c in &r.coefficients {
            s.push(',');
            s.push_str(&fmt_f64(*c));
        }
        s.push('\n');
    }
    s
}

/// Online evaluation at `params` (or the test set); writes `solve.csv` and,
/// with `reconstruct`, `solve_field_<k>.csv` per parameter.
pub fn cmd_solve(model_path: &Path, cfg: &RunConfig, params: Option<Vec<Parameter>>) -> Result<Vec<SolveRow>, CliError> {
    let (model, _) = read_model(model_path)?;
    let params = match params.or_else(|| cfg.solve_params.clone()) {
        Some(p) => p,
        None => cfg.test_set()?,
    };
    let rows = solve_model(&model, &params, cfg)?;
    create_dir(&cfg.out_dir)?;
    write(&cfg.out_dir.join("solve.csv"), solve_csv(&rows, model.n()))?;
    if cfg.reconstruct {
        for (k, r) in rows.iter().enumerate() {
            let mut s = StateVector::new(model.grid, model.reconstruct(&r.coefficients)?)?;
            if let Some(tau) = model.tau {
                s = s.with_time(tau * r.eps.len() as f64);
            }
            let p = cfg.out_dir.join(format!("solve_field_{k:04}.csv"));
            write_field_file(&p, &s).map_err(|e| CliError::io(&p, e))?;
        }
    }
    Ok(rows)
}

/// Truth references at `params`, loaded from `cache` where present and
/// solved (in parallel) otherwise. Returns the references and the number of
/// cache misses.
pub fn cached_references(
    cache: &ReferenceCache,
    grid: GridSpec,
    problem: Problem,
    params: &[Parameter],
    time: Option<(f64, usize)>,
    opts: PicardOptions,
) -> Result<(References, usize), CliError> {
    let keys: Vec<ReferenceKey> = params
        .iter()
        .map(|&param| ReferenceKey {
            problem,
            grid,
            param,
            time,
            opts,
        })
        .collect();
    let mut sols: Vec<Option<Vec<Vec<f64>>>> = keys.iter().map(|k| cache.load(k)).collect();
    let missing: Vec<usize> = (0..sols.len()).filter(|&k| sols[k].is_none()).collect();
    if !missing.is_empty() {
        eprintln!(
            "computing {} of {} reference solutions (cache: {})",
            missing.len(),
            params.len(),
            cache.dir().display()
        );
        let solved = missing
            .par_iter()
            .map(|&k| {
                let levels = reference_solution(&grid, problem, params[k], time, opts)?;
                if let Err(e) = cache.store(&keys[k], &levels) {
                    log::warn!("could not write cache entry: {e}");
                }
                Ok((k, levels))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        for (k, levels) in solved {
            sols[k] = Some(levels);
        }
    }
    let sols = sols.into_iter().map(|s| s.expect("filled"));
    let refs = if problem.is_unsteady() {
        References::Unsteady(sols.collect())
    } else {
        References::Steady(sols.map(|mut l| l.swap_remove(0)).collect())
    };
    Ok((refs, missing.len()))
}

#[derive(Debug, Clone)]
pub struct ValidateSummary {
    pub params: Vec<Parameter>,
    /// One entry per truncation `n = 1…N`.
    pub results: Vec<PrefixResult>,
    pub curve: Vec<CurvePoint>,
    /// Spearman correlation of `log E` and `log Δ` over `n`.
    pub spearman: f64,
    /// Maximum streamline error at the worst test parameter per `n`
    /// (steady problems).
    pub streamline: Vec<(usize, f64)>,
    pub cache_misses: usize,
}

impl ValidateSummary {
    pub fn final_error(&self) -> f64 {
        self.curve.last().map_or(f64::NAN, |c| c.e)
    }
}

/// Truncation study of `model` on the configured test set. Writes
/// `error_curve.csv`, `validation_params.csv` and, for steady models,
/// `streamline_curve.csv`, `stream_reference.csv` and `stream_error.csv`.
pub fn validate_model(model: &ReducedModel, cfg: &RunConfig, cache: &ReferenceCache) -> Result<ValidateSummary, CliError> {
    let params = cfg.test_set()?;
    let steps = model_steps(model, cfg)?;
    let time = model.tau.map(|tau| (tau, steps));
    let (refs, cache_misses) = cached_references(cache, model.grid, model.problem, &params, time, cfg.fom)?;
    let results = truncation_study(model, &params, &refs, cfg.online)?;
    let curve = curve(&results);
    let spearman = log_correlation(&curve);
    create_dir(&cfg.out_dir)?;
    write(&cfg.out_dir.join("error_curve.csv"), error_curve_csv(&curve))?;
    let full = results.last().expect("model has n >= 1");
    let mut per = String::from("re,nu,E,Delta\n");
    for (k, mu) in params.iter().enumerate() {
        per.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(mu.re),
            fmt_f64(mu.nu),
            fmt_f64(full.report.per_param[k]),
            fmt_f64(full.delta_per_param[k])
        ));
    }
    write(&cfg.out_dir.join("validation_params.csv"), per)?;
    let mut streamline = Vec::new();
    if let References::Steady(r) = &refs {
        let w = full.report.worst_param;
        let (mu, truth) = (params[w], &r[w]);
        let mut text = String::from("n,max_error\n");
        for n in 1..=model.n() {
            let (_, max) = streamline_error_at(&model.prefix(n), mu, truth, cfg.online)?;
            text.push_str(&format!("{n},{}\n", fmt_f64(max)));
            streamline.push((n, max));
        }
        write(&cfg.out_dir.join("streamline_curve.csv"), text)?;
        let (map, _) = streamline_error_at(model, mu, truth, cfg.online)?;
        let (nx, ny) = (model.grid.nx, model.grid.ny);
        let q = streamfunction(&StateVector::new(model.grid, truth.clone())?)?;
        write(&cfg.out_dir.join("stream_reference.csv"), stream_csv(nx, ny, &q.q))?;
        write(&cfg.out_dir.join("stream_error.csv"), stream_csv(nx, ny, &map))?;
    }
    Ok(ValidateSummary {
        params,
        results,
        curve,
        spearman,
        streamline,
        cache_misses,
    })
}

/// [`validate_model`] on a model file, caching references under
/// `$HYMAC_CACHE_DIR` or `<out_dir>/fom-cache`.
pub fn cmd_validate(model_path: &Path, cfg: &RunConfig) -> Result<ValidateSummary, CliError> {
    let (model, _) = read_model(model_path)?;
    let cache = ReferenceCache::from_env(&cfg.out_dir.join("fom-cache"));
    validate_model(&model, cfg, &cache)
}
