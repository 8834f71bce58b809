//! Offline greedy training with adaptive collocation enrichment.
//!
//! One loop serves steady and unsteady problems. At basis size `n` the
//! current model is solved online over the whole training set; the worst
//! estimator picks the next parameter (and, when unsteady, the next time
//! node), the truth snapshot there extends the basis, and the residual of the
//! reduced solution there extends the residual points. When the estimator
//! jumps by more than `γ(n)` relative to the previous size, extra collocation
//! points are sampled from the newest interpolatory residual.

mod log;

pub use self::log::{StopReason, TrainingLog, TrainingRecord, LOG_HEADER};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{RomError, SolveError, TrainError};
use crate::fom::{
    extend_trajectory, solve_steady_ns, solve_stokes, solve_unsteady_steps, step_count, PicardOptions, StateVector,
    Trajectory,
};
use crate::grid::{GridSpec, Parameter, Problem};
use crate::residual::norm_inf;
use crate::rom::{OnlineOptions, OnlineSolution, ReducedModel, TrainedPair};

/// `γ(n)`: `early` for `n < switch_at`, `late` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSchedule {
    pub early: f64,
    pub late: f64,
    pub switch_at: usize,
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule {
            early: 5.0,
            late: 2.0,
            switch_at: 6,
        }
    }
}

impl GammaSchedule {
    pub fn at(&self, n: usize) -> f64 {
        if n < self.switch_at {
            self.early
        } else {
            self.late
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub grid: GridSpec,
    pub problem: Problem,
    pub xi_train: Vec<Parameter>,
    /// Basis cap `N_max`.
    pub n_max: usize,
    /// `(τ, T)` for unsteady problems.
    pub time: Option<(f64, f64)>,
    pub gamma: GammaSchedule,
    pub p_adap: f64,
    pub n_adap_max: usize,
    pub n_adap_increment: usize,
    /// Stop once the worst estimator is at or below this value.
    pub delta_tol: f64,
    pub fom: PicardOptions,
    pub online: OnlineOptions,
    /// Run adaptive enrichment for steady problems too (always on when
    /// unsteady).
    pub enrich_steady: bool,
    /// Index of `μ¹` in `xi_train`.
    pub seed_index: usize,
}

impl TrainingConfig {
    pub fn new(grid: GridSpec, problem: Problem, xi_train: Vec<Parameter>) -> Self {
        TrainingConfig {
            grid,
            problem,
            xi_train,
            n_max: 20,
            time: None,
            gamma: GammaSchedule::default(),
            p_adap: 0.4,
            n_adap_max: 300,
            n_adap_increment: 10,
            delta_tol: 0.0,
            fom: PicardOptions::default(),
            online: OnlineOptions::default(),
            enrich_steady: false,
            seed_index: 0,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.xi_train.is_empty() {
            return bad("empty training set".into());
        }
        if self.seed_index >= self.xi_train.len() {
            return bad(format!("seed index {} outside training set", self.seed_index));
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        if !(self.p_adap > 0.0 && self.p_adap < 1.0) {
            return bad(format!("p_adap must lie in (0, 1), got {}", self.p_adap));
        }
        if self.n_adap_increment == 0 {
            return bad("n_adap_increment must be positive".into());
        }
        if !(self.gamma.early > 0.0 && self.gamma.late > 0.0) {
            return bad("gamma values must be positive".into());
        }
        match (self.problem.is_unsteady(), self.time) {
            (true, Some((tau, t))) => {
                step_count(tau, t).map_err(|e| TrainError::Config(e.to_string()))?;
            }
            (true, None) => return bad("unsteady training needs (tau, T)".into()),
            (false, Some(_)) => return bad("steady training takes no time grid".into()),
            (false, None) => {}
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        self.time.map_or(0, |(tau, t)| step_count(tau, t).expect("validated"))
    }

    fn enrichment_enabled(&self) -> bool {
        self.problem.is_unsteady() || self.enrich_steady
    }
}

/// Truth solutions per training index; unsteady trajectories are extended
/// on demand and never re-solved from `t = 0`.
#[derive(Debug)]
pub struct FomCache {
    grid: GridSpec,
    problem: Problem,
    tau: Option<f64>,
    opts: PicardOptions,
    steady: BTreeMap<usize, Vec<f64>>,
    unsteady: BTreeMap<usize, Trajectory>,
}

impl FomCache {
    pub fn new(grid: GridSpec, problem: Problem, tau: Option<f64>, opts: PicardOptions) -> Self {
        FomCache {
            grid,
            problem,
            tau,
            opts,
            steady: BTreeMap::new(),
            unsteady: BTreeMap::new(),
        }
    }

    pub fn steady(&mut self, key: usize, param: Parameter) -> Result<&[f64], SolveError> {
        if !self.steady.contains_key(&key) {
            let g = self.grid;
            let s = match self.problem {
                Problem::Stokes => solve_stokes(&g, param)?,
                _ => {
                    let (s, rep) = solve_steady_ns(&g, param, &StateVector::zeros(g), self.opts)?;
                    if !rep.converged {
                        ::log::warn!("FOM Picard at {param:?} stopped at |r| = {:e}", rep.residual);
                    }
                    s
                }
            };
            self.steady.insert(key, s.values);
        }
        Ok(&self.steady[&key])
    }

    /// Trajectory holding at least `steps + 1` levels.
    pub fn trajectory(&mut self, key: usize, param: Parameter, steps: usize) -> Result<&Trajectory, SolveError> {
        let tau = self
            .tau
            .ok_or_else(|| SolveError::InvalidInput("trajectory requested from a steady cache".into()))?;
        let g = self.grid;
        match self.unsteady.get_mut(&key) {
            Some(t) => extend_trajectory(&g, param, t, steps, self.opts)?,
            None => {
                let t = solve_unsteady_steps(&g, param, &StateVector::zeros(g), tau, steps, self.opts)?;
                self.unsteady.insert(key, t);
            }
        }
        Ok(&self.unsteady[&key])
    }
}

/// Time index with the largest spread `max − min` over all unknowns; the
/// lowest index wins ties.
pub fn select_first_time_node(traj: &Trajectory) -> usize {
    let spreads: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            let (lo, hi) = s
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            hi - lo
        })
        .collect();
    crate::postproc::argmax(&spreads).0
}

/// Time index (1-based level) of the largest `ε(t)` among levels not in
/// `taken`; `eps[k]` belongs to level `k + 1`. `None` when every level is
/// taken.
pub fn select_time_node(eps: &[f64], taken: &[usize]) -> Option<usize> {
    let masked: Vec<f64> = eps
        .iter()
        .enumerate()
        .map(|(k, &e)| if taken.contains(&(k + 1)) { f64::NEG_INFINITY } else { e })
        .collect();
    match crate::postproc::argmax(&masked) {
        (_, e) if e == f64::NEG_INFINITY => None,
        (k, _) => Some(k + 1),
    }
}

/// Time levels already trained at `mu`.
fn trained_levels(model: &ReducedModel, mu: Parameter) -> Vec<usize> {
    model.pairs.iter().filter(|q| q.param == mu).filter_map(|q| q.time).collect()
}

/// Inverse-CDF sampling of `|r|` over eligible unknowns.
///
/// Eligible indices are sorted by `|r|` ascending (ties by index), and each
/// level `q` of `1−p, 1−p + p/(k−1), …, 1` picks the 1-based position
/// `min(K, ⌊qK⌋ + 1)`. Duplicates are dropped.
pub fn inverse_cdf_points(r: &[f64], eligible: impl Fn(usize) -> bool, count: usize, p_adap: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..r.len()).filter(|&k| eligible(k)).collect();
    if idx.is_empty() || count == 0 {
        return Vec::new();
    }
    idx.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()).then(a.cmp(&b)));
    let k = idx.len();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let q = if count == 1 {
            1.0
        } else {
            (1.0 - p_adap) + i as f64 * p_adap / (count - 1) as f64
        };
        let pos = (((q * k as f64) + 1e-9).floor() as usize + 1).min(k);
        let flat = idx[pos - 1];
        if !out.contains(&flat) {
            out.push(flat);
        }
    }
    out
}

/// Online results of one sweep over the training set.
#[derive(Debug, Clone)]
struct Sweep {
    solutions: Vec<OnlineSolution>,
    /// Estimator per training parameter.
    delta: Vec<f64>,
    /// Per-level estimator per training parameter (unsteady).
    eps: Vec<Vec<f64>>,
    /// Candidates for the next snapshot.
    eligible: Vec<bool>,
}

impl Sweep {
    /// Worst estimator over the eligible candidates; `(0, 0)` when none is
    /// left.
    fn worst(&self) -> (usize, f64) {
        let masked: Vec<f64> = self
            .delta
            .iter()
            .zip(&self.eligible)
            .map(|(&d, &e)| if e { d } else { f64::NEG_INFINITY })
            .collect();
        match crate::postproc::argmax(&masked) {
            (_, d) if d == f64::NEG_INFINITY => (0, 0.0),
            w => w,
        }
    }

    fn exhausted(&self) -> bool {
        !self.eligible.iter().any(|&e| e)
    }
}

/// Online solve at `mu` plus its estimator per time level (one entry when
/// steady).
///
/// With `m ≤ n` the collocated residual vanishes identically, so the
/// estimator falls back to the full residual of the reduced solution.
pub fn estimate(
    model: &ReducedModel,
    mu: Parameter,
    steps: usize,
    opts: OnlineOptions,
) -> Result<(OnlineSolution, Vec<f64>), RomError> {
    let full = model.m() <= model.n();
    if model.is_unsteady() {
        let sol = model.online_solve_unsteady(mu, steps, None, opts)?;
        let eps = if full {
            (1..=steps)
                .map(|t| Ok(norm_inf(&model.full_residual_of(mu, &sol.c[t], Some(&sol.c[t - 1]))?)))
                .collect::<Result<Vec<_>, RomError>>()?
        } else {
            sol.eps.clone()
        };
        Ok((sol, eps))
    } else {
        let sol = model.online_solve_steady(mu, opts)?;
        let eps = if full {
            vec![norm_inf(&model.full_residual_of(mu, sol.final_coefficients(), None)?)]
        } else {
            sol.eps.clone()
        };
        Ok((sol, eps))
    }
}

/// `Δ` from per-level estimators: the sum over levels (unsteady) or the
/// single steady value.
pub fn delta_of(eps: &[f64]) -> f64 {
    eps.iter().sum()
}

fn sweep(model: &ReducedModel, cfg: &TrainingConfig) -> Result<Sweep, TrainError> {
    let steps = cfg.steps();
    let results: Vec<Result<(OnlineSolution, Vec<f64>), RomError>> = cfg
        .xi_train
        .par_iter()
        .map(|&mu| estimate(model, mu, steps, cfg.online))
        .collect();
    let mut out = Sweep {
        solutions: Vec::with_capacity(results.len()),
        delta: Vec::with_capacity(results.len()),
        eps: Vec::with_capacity(results.len()),
        // a snapshot already in the basis cannot extend it
        eligible: cfg
            .xi_train
            .iter()
            .map(|&mu| {
                if model.is_unsteady() {
                    trained_levels(model, mu).len() < steps
                } else {
                    !model.pairs.iter().any(|q| q.param == mu)
                }
            })
            .collect(),
    };
    for r in results {
        let (sol, eps) = r?;
        out.delta.push(delta_of(&eps));
        out.eps.push(eps);
        out.solutions.push(sol);
    }
    Ok(out)
}

/// Adaptive enrichment at basis size `n`: grows the sample count by the
/// configured increment until `Δ_n ≤ γ(n)·Δ_{n−1}` or the cap is reached.
///
/// Returns the refreshed sweep, the number of points added and whether the
/// cap was hit with the guard still violated.
fn adaptive_enrich(
    model: &mut ReducedModel,
    cfg: &TrainingConfig,
    mut current: Sweep,
    prev_delta: f64,
) -> Result<(Sweep, usize, bool), TrainError> {
    let gamma = cfg.gamma.at(model.n());
    let Some(r) = model.residual_basis.last().cloned() else {
        return Ok((current, 0, false));
    };
    let gauge = model.grid.gauge_index();
    let mut n_adap = 0;
    let mut added = 0;
    while current.worst().1 > gamma * prev_delta && n_adap < cfg.n_adap_max {
        n_adap = (n_adap + cfg.n_adap_increment).min(cfg.n_adap_max);
        let pts = inverse_cdf_points(&r, |k| k != gauge && !model.points.contains(k), n_adap, cfg.p_adap);
        let now = model.add_adaptive_points(&pts);
        added += now;
        if now > 0 {
            current = sweep(model, cfg)?;
        }
    }
    let capped = current.worst().1 > gamma * prev_delta;
    Ok((current, added, capped))
}

/// Runs the greedy loop from `cfg.xi_train[cfg.seed_index]`.
///
/// Always returns the model at the last successful basis size; the log's
/// stop reason says why training ended.
pub fn train(cfg: &TrainingConfig) -> Result<(ReducedModel, TrainingLog), TrainError> {
    cfg.validate()?;
    let grid = cfg.grid;
    let tau = cfg.time.map(|t| t.0);
    let steps = cfg.steps();
    let mut model = ReducedModel::new(grid, cfg.problem, tau)?;
    let mut cache = FomCache::new(grid, cfg.problem, tau, cfg.fom);
    let mut log = TrainingLog::default();

    // first snapshot
    let mut clock = Instant::now();
    let mut mu_idx = cfg.seed_index;
    let mut mu = cfg.xi_train[mu_idx];
    let mut t_node = None;
    let first = if cfg.problem.is_unsteady() {
        let traj = cache.trajectory(mu_idx, mu, steps)?;
        let t = select_first_time_node(traj);
        t_node = Some(t);
        traj.states[t].values.clone()
    } else {
        cache.steady(mu_idx, mu)?.to_vec()
    };
    model.geim_extend(&first, TrainedPair { param: mu, time: t_node })?;

    let mut prev_delta: Option<f64> = None;
    loop {
        let n = model.n();
        let mut current = sweep(&model, cfg)?;
        let mut added = 0;
        let mut capped = false;
        if let Some(prev) = prev_delta {
            if cfg.enrichment_enabled() && current.worst().1 > cfg.gamma.at(n) * prev {
                let (s, a, c) = adaptive_enrich(&mut model, cfg, current, prev)?;
                current = s;
                added = a;
                capped = c;
            }
        }
        let (worst, delta) = current.worst();
        log.records.push(TrainingRecord {
            n,
            mu,
            t_index: t_node,
            delta,
            rho: prev_delta.map(|p| delta / p),
            gamma: cfg.gamma.at(n),
            adaptive_added: added,
            m: model.m(),
            capped,
            seconds: clock.elapsed().as_secs_f64(),
        });
        ::log::info!("n = {n}: delta = {delta:e}, m = {}", model.m());
        prev_delta = Some(delta);

        if n >= cfg.n_max {
            log.stop = StopReason::MaxBasis;
            break;
        }
        if current.exhausted() {
            log.stop = StopReason::Exhausted;
            break;
        }
        if delta <= cfg.delta_tol {
            log.stop = StopReason::Tolerance;
            break;
        }

        clock = Instant::now();
        mu_idx = worst;
        mu = cfg.xi_train[mu_idx];
        let sol = &current.solutions[mu_idx];
        let (snapshot, r, t) = if cfg.problem.is_unsteady() {
            let t = select_time_node(&current.eps[mu_idx], &trained_levels(&model, mu))
                .expect("eligible parameter has an untrained level");
            let snap = cache.trajectory(mu_idx, mu, t)?.states[t].values.clone();
            let r = model.full_residual_of(mu, &sol.c[t], Some(&sol.c[t - 1]))?;
            (snap, r, Some(t))
        } else {
            let snap = cache.steady(mu_idx, mu)?.to_vec();
            let r = model.full_residual_of(mu, sol.final_coefficients(), None)?;
            (snap, r, None)
        };
        let mut next = model.clone();
        let extended = next
            .geim_extend(&snapshot, TrainedPair { param: mu, time: t })
            .and_then(|_| next.eim_residual_extend(&r));
        match extended {
            Ok(_) => {
                model = next;
                t_node = t;
            }
            Err(e @ (RomError::Degenerate { .. } | RomError::NoEligiblePoints)) => {
                log.stop = StopReason::Degenerate(format!("{e} (at Re = {}, nu = {}, trained before: {})", mu.re, mu.nu, model.pairs.iter().any(|q| q.param == mu)));
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((model, log))
}
