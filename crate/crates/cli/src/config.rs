//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated;
//! parameters in lists are written `re:nu`. Every key is optional; unknown
//! keys are rejected. See [`KEYS`] for the full list.

use std::collections::BTreeMap;
use std::path::PathBuf;

use hymac::fom::{step_count, PicardOptions};
use hymac::greedy::{GammaSchedule, TrainingConfig};
use hymac::rom::OnlineOptions;
use hymac::{GridSpec, Parameter, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?} ({why})")]
    BadValue { key: String, value: String, why: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Recognized keys with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("problem", "stokes | steady-ns | unsteady-ns"),
    ("nx", "cells in x (default 32)"),
    ("ny", "cells in y (default nx)"),
    ("re_min", "parameter domain, Re lower bound (default 10)"),
    ("re_max", "parameter domain, Re upper bound (default 2000)"),
    ("nu_min", "parameter domain, nu lower bound (default 0)"),
    ("nu_max", "parameter domain, nu upper bound (default 4)"),
    ("train_re", "training grid points in Re (default 25)"),
    ("train_nu", "training grid points in nu (default 10)"),
    ("test_re", "test grid points in Re (default 10)"),
    ("test_nu", "test grid points in nu (default 5)"),
    ("test_offset_re", "test grid inset from the Re bounds (default 2.2)"),
    ("test_offset_nu", "test grid inset from the nu bounds (default 0.22)"),
    ("test_params", "explicit test list re:nu,...; replaces the test grid"),
    ("params", "parameters for `solve` (default: the test set)"),
    ("re", "parameter for `fom`"),
    ("nu", "parameter for `fom` (default 0)"),
    ("tau", "time step (unsteady)"),
    ("final_time", "final time T, a multiple of tau (unsteady)"),
    ("dump_times", "time indices written by `fom` (default: final level)"),
    ("n_max", "maximum basis size (default 20)"),
    ("p_adap", "enrichment percentile fraction (default 0.4)"),
    ("n_adap_max", "adaptive point cap (default 300)"),
    ("n_adap_increment", "adaptive points per enrichment round (default 10)"),
    ("gamma_early", "robustness threshold for small n (default 5)"),
    ("gamma_late", "robustness threshold for large n (default 2)"),
    ("gamma_switch", "first n using gamma_late (default 6)"),
    ("delta_tol", "stop once the worst estimator drops below (default 0)"),
    ("enrich_steady", "allow enrichment for steady problems (default false)"),
    ("seed", "seed for drawing the first training parameter (default 0)"),
    ("fom_tol", "full-order Picard tolerance (default 1e-10)"),
    ("fom_max_iter", "full-order Picard iteration cap (default 100)"),
    ("online_tol", "online Picard tolerance (default 1e-10)"),
    ("online_max_iter", "online Picard iteration cap (default 1000)"),
    ("grids", "grid sizes for `convergence` (default 8,16,32,64,128)"),
    ("reference_n", "reference grid for NS convergence (default 256)"),
    ("reference_tol", "reference Picard tolerance for NS convergence (default 1e-8)"),
    ("reconstruct", "`solve` also writes reconstructed fields (default false)"),
    ("out_dir", "output directory (default out)"),
];

/// Raw key/value pairs from a file and overrides.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = parse_assignment(body).ok_or_else(|| ConfigError::Syntax {
            line: k + 1,
            text: line.to_string(),
        })?;
        map.insert(key, value);
    }
    Ok(map)
}

/// `key=value` (surrounding whitespace allowed).
pub fn parse_assignment(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub nx: usize,
    pub ny: usize,
    pub re_range: (f64, f64),
    pub nu_range: (f64, f64),
    pub train_shape: (usize, usize),
    pub test_shape: (usize, usize),
    pub test_offset: (f64, f64),
    pub test_params: Option<Vec<Parameter>>,
    pub solve_params: Option<Vec<Parameter>>,
    pub param: Option<Parameter>,
    /// `(τ, T)` for unsteady problems.
    pub time: Option<(f64, f64)>,
    pub dump_times: Option<Vec<usize>>,
    pub n_max: usize,
    pub p_adap: f64,
    pub n_adap_max: usize,
    pub n_adap_increment: usize,
    pub gamma: GammaSchedule,
    pub delta_tol: f64,
    pub enrich_steady: bool,
    pub seed: u64,
    pub fom: PicardOptions,
    pub online: OnlineOptions,
    pub grids: Vec<usize>,
    pub reference_n: usize,
    pub reference_tol: f64,
    pub reconstruct: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: Problem::Stokes,
            nx: 32,
            ny: 32,
            re_range: (10.0, 2000.0),
            nu_range: (0.0, 4.0),
            train_shape: (25, 10),
            test_shape: (10, 5),
            test_offset: (2.2, 0.22),
            test_params: None,
            solve_params: None,
            param: None,
            time: None,
            dump_times: None,
            n_max: 20,
            p_adap: 0.4,
            n_adap_max: 300,
            n_adap_increment: 10,
            gamma: GammaSchedule::default(),
            delta_tol: 0.0,
            enrich_steady: false,
            seed: 0,
            fom: PicardOptions::default(),
            online: OnlineOptions::default(),
            grids: vec![8, 16, 32, 64, 128],
            reference_n: 256,
            reference_tol: 1e-8,
            reconstruct: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, value: &str, why: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        why: why.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| bad(key, value, e.to_string()))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn flag(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

/// `re:nu,re:nu,...`
pub fn parse_params(key: &str, value: &str) -> Result<Vec<Parameter>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (re, nu) = s.split_once(':').ok_or_else(|| bad(key, s, "expected re:nu"))?;
            Parameter::new(num(key, re.trim())?, num(key, nu.trim())?).map_err(|e| bad(key, s, e.to_string()))
        })
        .collect()
}

/// Uniform points on `[lo, hi]` hitting both ends exactly; a single point
/// sits at `lo`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| if k + 1 == count { hi } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 })
            .collect(),
    }
}

fn tensor(res: &[f64], nus: &[f64]) -> Result<Vec<Parameter>, ConfigError> {
    res.iter()
        .flat_map(|&re| nus.iter().map(move |&nu| (re, nu)))
        .map(|(re, nu)| Parameter::new(re, nu).map_err(|e| ConfigError::Invalid(e.to_string())))
        .collect()
}

impl RunConfig {
    /// Defaults overridden by `pairs`.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        let mut ny = None;
        let mut re = None;
        let mut nu = 0.0;
        let mut tau = None;
        let mut final_time = None;
        for (key, value) in pairs {
            let (k, v) = (key.as_str(), value.as_str());
            match k {
                "problem" => {
                    c.problem = Problem::parse(v).ok_or_else(|| bad(k, v, "expected stokes, steady-ns or unsteady-ns"))?
                }
                "nx" => c.nx = num(k, v)?,
                "ny" => ny = Some(num(k, v)?),
                "re_min" => c.re_range.0 = num(k, v)?,
                "re_max" => c.re_range.1 = num(k, v)?,
                "nu_min" => c.nu_range.0 = num(k, v)?,
                "nu_max" => c.nu_range.1 = num(k, v)?,
                "train_re" => c.train_shape.0 = num(k, v)?,
                "train_nu" => c.train_shape.1 = num(k, v)?,
                "test_re" => c.test_shape.0 = num(k, v)?,
                "test_nu" => c.test_shape.1 = num(k, v)?,
                "test_offset_re" => c.test_offset.0 = num(k, v)?,
                "test_offset_nu" => c.test_offset.1 = num(k, v)?,
                "test_params" => c.test_params = Some(parse_params(k, v)?),
                "params" => c.solve_params = Some(parse_params(k, v)?),
                "re" => re = Some(num(k, v)?),
                "nu" => nu = num(k, v)?,
                "tau" => tau = Some(num(k, v)?),
                "final_time" => final_time = Some(num(k, v)?),
                "dump_times" => c.dump_times = Some(list(k, v)?),
                "n_max" => c.n_max = num(k, v)?,
                "p_adap" => c.p_adap = num(k, v)?,
                "n_adap_max" => c.n_adap_max = num(k, v)?,
                "n_adap_increment" => c.n_adap_increment = num(k, v)?,
                "gamma_early" => c.gamma.early = num(k, v)?,
                "gamma_late" => c.gamma.late = num(k, v)?,
                "gamma_switch" => c.gamma.switch_at = num(k, v)?,
                "delta_tol" => c.delta_tol = num(k, v)?,
                "enrich_steady" => c.enrich_steady = flag(k, v)?,
                "seed" => c.seed = num(k, v)?,
                "fom_tol" => c.fom.tol = num(k, v)?,
                "fom_max_iter" => c.fom.max_iter = num(k, v)?,
                "online_tol" => c.online.tol = num(k, v)?,
                "online_max_iter" => c.online.max_iter = num(k, v)?,
                "grids" => c.grids = list(k, v)?,
                "reference_n" => c.reference_n = num(k, v)?,
                "reference_tol" => c.reference_tol = num(k, v)?,
                "reconstruct" => c.reconstruct = flag(k, v)?,
                "out_dir" => c.out_dir = PathBuf::from(v),
                _ => return Err(ConfigError::UnknownKey(key.clone())),
            }
        }
        c.ny = ny.unwrap_or(c.nx);
        if let Some(re) = re {
            c.param = Some(Parameter::new(re, nu).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        }
        c.time = match (tau, final_time) {
            (Some(t), Some(f)) => Some((t, f)),
            (None, None) => None,
            _ => return Err(ConfigError::Invalid("tau and final_time must be given together".into())),
        };
        Ok(c)
    }

    /// Parses a config file body and applies `overrides` on top.
    pub fn from_text(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut pairs = parse_pairs(text)?;
        for (k, v) in overrides {
            pairs.insert(k.clone(), v.clone());
        }
        Self::from_pairs(&pairs)
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.nx, self.ny).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// `(τ, K)` when unsteady; rejects a final time that is not a step multiple.
    pub fn time_steps(&self) -> Result<Option<(f64, usize)>, ConfigError> {
        match (self.problem.is_unsteady(), self.time) {
            (false, _) => Ok(None),
            (true, None) => Err(ConfigError::Invalid("unsteady problems need tau and final_time".into())),
            (true, Some((tau, t))) => {
                let k = step_count(tau, t).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(Some((tau, k)))
            }
        }
    }

    fn check_domain(&self) -> Result<(), ConfigError> {
        let (r0, r1) = self.re_range;
        let (n0, n1) = self.nu_range;
        if !(r0 > 0.0 && r1 >= r0 && n1 >= n0 && r1.is_finite() && n1.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "parameter domain [{r0}, {r1}] x [{n0}, {n1}] is empty or has Re <= 0"
            )));
        }
        Ok(())
    }

    /// Tensor training grid, Re outer and ν inner.
    pub fn training_set(&self) -> Result<Vec<Parameter>, ConfigError> {
        self.check_domain()?;
        let (a, b) = self.train_shape;
        if a == 0 || b == 0 {
            return Err(ConfigError::Invalid("training grid is empty".into()));
        }
        let res = linspace(self.re_range.0, self.re_range.1, a);
        let nus = linspace(self.nu_range.0, self.nu_range.1, b);
        tensor(&res, &nus)
    }

    /// Explicit `test_params`, or the inset tensor grid. Either must lie
    /// strictly inside the domain (in every non-degenerate direction) and
    /// avoid every training point.
    pub fn test_set(&self) -> Result<Vec<Parameter>, ConfigError> {
        self.check_domain()?;
        let set = match &self.test_params {
            Some(p) => p.clone(),
            None => {
                let axis = |(lo, hi): (f64, f64), off: f64, count: usize| {
                    if lo == hi {
                        vec![lo; count.min(1)]
                    } else {
                        linspace(lo + off, hi - off, count)
                    }
                };
                let res = axis(self.re_range, self.test_offset.0, self.test_shape.0);
                let nus = axis(self.nu_range, self.test_offset.1, self.test_shape.1);
                tensor(&res, &nus)?
            }
        };
        if set.is_empty() {
            return Err(ConfigError::Invalid("test set is empty".into()));
        }
        let inside = |x: f64, (lo, hi): (f64, f64)| if lo == hi { x == lo } else { lo < x && x < hi };
        let train = self.training_set()?;
        for p in &set {
            if !inside(p.re, self.re_range) || !inside(p.nu, self.nu_range) {
                return Err(ConfigError::Invalid(format!(
                    "test point (Re = {}, nu = {}) is not strictly inside the parameter domain",
                    p.re, p.nu
                )));
            }
            if train.contains(p) {
                return Err(ConfigError::Invalid(format!(
                    "test point (Re = {}, nu = {}) coincides with a training point",
                    p.re, p.nu
                )));
            }
        }
        Ok(set)
    }

    /// Index of the first training parameter, drawn from the seeded stream.
    pub fn seed_index(&self, len: usize) -> usize {
        ChaCha8Rng::seed_from_u64(self.seed).gen_range(0..len.max(1))
    }

    pub fn training_config(&self) -> Result<TrainingConfig, ConfigError> {
        let xi = self.training_set()?;
        let mut t = TrainingConfig::new(self.grid()?, self.problem, xi);
        t.seed_index = self.seed_index(t.xi_train.len());
        t.n_max = self.n_max;
        t.time = self.time_steps()?.map(|_| self.time.expect("checked"));
        t.gamma = self.gamma;
        t.p_adap = self.p_adap;
        t.n_adap_max = self.n_adap_max;
        t.n_adap_increment = self.n_adap_increment;
        t.delta_tol = self.delta_tol;
        t.fom = self.fom;
        t.online = self.online;
        t.enrich_steady = self.enrich_steady;
        t.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_text(text, &[])
    }

    #[test]
    fn parses_keys_comments_and_overrides() {
        let text = "# desk run\nproblem = steady-ns\nnx = 16 # cells\n\nre_max=1000\n";
        let c = RunConfig::from_text(text, &[("nx".into(), "24".into())]).unwrap();
        assert_eq!(c.problem, Problem::SteadyNs);
        assert_eq!((c.nx, c.ny), (24, 24));
        assert_eq!(c.re_range, (10.0, 1000.0));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(cfg("colour = red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(cfg("nx = many"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(cfg("just words"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(cfg("problem = euler"), Err(ConfigError::BadValue { .. })));
        assert!(cfg("tau = 0.1").is_err());
    }

    #[test]
    fn grid_too_small_is_invalid() {
        assert!(cfg("nx = 1").unwrap().grid().is_err());
    }

    #[test]
    fn final_time_must_be_step_multiple() {
        let c = cfg("problem = unsteady-ns\ntau = 0.3\nfinal_time = 1").unwrap();
        assert!(c.time_steps().is_err());
        let c = cfg("problem = unsteady-ns\ntau = 0.25\nfinal_time = 1").unwrap();
        assert_eq!(c.time_steps().unwrap(), Some((0.25, 4)));
        assert!(cfg("problem = unsteady-ns").unwrap().time_steps().is_err());
    }

    #[test]
    fn default_test_grid_is_inside_and_disjoint() {
        let c = RunConfig::default();
        let train = c.training_set().unwrap();
        let test = c.test_set().unwrap();
        assert_eq!(train.len(), 250);
        assert_eq!(test.len(), 50);
        assert_eq!(test[0], Parameter::new(12.2, 0.22).unwrap());
        assert_eq!(test.last().unwrap().re, 1997.8);
        for p in &test {
            assert!(!train.contains(p));
        }
    }

    #[test]
    fn degenerate_nu_direction() {
        let c = cfg("nu_max = 0\ntrain_re = 11\ntrain_nu = 1\nre_max = 500\ntest_params = 34.5:0, 230.5:0").unwrap();
        assert_eq!(c.training_set().unwrap().len(), 11);
        assert_eq!(c.test_set().unwrap().len(), 2);
    }

    #[test]
    fn rejects_test_points_on_training_grid_or_boundary() {
        let c = cfg("re_max = 500\nnu_max = 0\ntrain_re = 11\ntrain_nu = 1\ntest_params = 255:0").unwrap();
        assert!(c.test_set().is_err());
        let c = cfg("test_params = 10:1").unwrap();
        assert!(c.test_set().is_err());
        let c = cfg("test_params = 100:0.5:3").unwrap_err();
        assert!(matches!(c, ConfigError::BadValue { .. }));
    }

    #[test]
    fn seed_draw_is_reproducible_and_in_range() {
        let c = RunConfig::default();
        let a = c.seed_index(250);
        assert_eq!(a, c.seed_index(250));
        assert!(a < 250);
        let t = c.training_config().unwrap();
        assert_eq!(t.seed_index, a);
    }

    #[test]
    fn every_documented_key_is_accepted() {
        for (k, _) in KEYS {
            let v = match *k {
                "problem" => "stokes",
                "test_params" | "params" => "100:1",
                "grids" | "dump_times" => "1,2",
                "enrich_steady" | "reconstruct" => "false",
                "out_dir" => "x",
                _ => "3",
            };
            let mut m = BTreeMap::new();
            m.insert(k.to_string(), v.to_string());
            if *k == "tau" || *k == "final_time" {
                m.insert("tau".into(), "1".into());
                m.insert("final_time".into(), "3".into());
            }
            RunConfig::from_pairs(&m).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }
}
