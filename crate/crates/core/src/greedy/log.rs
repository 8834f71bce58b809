use std::fmt::Write as _;

use crate::error::FormatError;
use crate::fom::dump::fmt_f64;
use crate::grid::Parameter;

pub const LOG_HEADER: &str = "n,mu_re,mu_nu,t_index,delta,rho,n_adaptive_points,m,seconds";

/// State of the model once basis size `n` was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub n: usize,
    /// Parameter whose snapshot was added last.
    pub mu: Parameter,
    /// Its time index (unsteady).
    pub t_index: Option<usize>,
    /// Worst estimator over the remaining candidates at size `n`, after
    /// enrichment.
    pub delta: f64,
    /// `Δ_n / Δ_{n−1}`; absent for `n = 1`.
    pub rho: Option<f64>,
    pub gamma: f64,
    /// Adaptive points added at this size.
    pub adaptive_added: usize,
    /// `|X^m|` after enrichment.
    pub m: usize,
    /// Enrichment hit `n_adap_max` with the guard still violated.
    pub capped: bool,
    pub seconds: f64,
}

impl TrainingRecord {
    /// `ρ ≤ γ(n)`, or the cap flag explains why not.
    pub fn guard_ok(&self) -> bool {
        self.capped || self.rho.is_none_or(|r| r <= self.gamma)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub enum StopReason {
    #[default]
    MaxBasis,
    Tolerance,
    /// Every training parameter is already in the basis.
    Exhausted,
    /// Extension rejected; the model is the last successful one.
    Degenerate(String),
}

impl StopReason {
    pub fn describe(&self) -> String {
        match self {
            StopReason::MaxBasis => "basis cap reached".into(),
            StopReason::Tolerance => "estimator below tolerance".into(),
            StopReason::Exhausted => "training set exhausted".into(),
            StopReason::Degenerate(m) => format!("degenerate extension: {m}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<TrainingRecord>,
    pub stop: StopReason,
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn field<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> Result<T, FormatError> {
    s.trim().parse().map_err(|_| FormatError::Csv {
        line,
        msg: format!("bad {name} value {s:?}"),
    })
}

fn opt_field<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> Result<Option<T>, FormatError> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        field(s, line, name).map(Some)
    }
}

impl TrainingLog {
    pub fn delta(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.delta).collect()
    }

    pub fn total_adaptive(&self) -> usize {
        self.records.iter().map(|r| r.adaptive_added).sum()
    }

    /// CSV with [`LOG_HEADER`]; reals carry 17 significant digits.
    /// Absent values (`ρ` at `n = 1`, steady `t_index`) are empty fields.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(LOG_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                fmt_f64(r.mu.re),
                fmt_f64(r.mu.nu),
                opt(r.t_index),
                fmt_f64(r.delta),
                r.rho.map(fmt_f64).unwrap_or_default(),
                r.adaptive_added,
                r.m,
                fmt_f64(r.seconds)
            );
        }
        s
    }

    /// Reads [`TrainingLog::to_csv`] output. Fields not in the CSV (γ, cap
    /// flag, stop reason) are left at their defaults.
    pub fn from_csv(text: &str) -> Result<Self, FormatError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == LOG_HEADER => {}
            _ => {
                return Err(FormatError::Csv {
                    line: 1,
                    msg: "missing training log header".into(),
                })
            }
        }
        let mut records = Vec::new();
        for (k, l) in lines {
            let line = k + 1;
            if l.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 9 {
                return Err(FormatError::Csv {
                    line,
                    msg: format!("expected 9 fields, got {}", f.len()),
                });
            }
            records.push(TrainingRecord {
                n: field(f[0], line, "n")?,
                mu: Parameter {
                    re: field(f[1], line, "mu_re")?,
                    nu: field(f[2], line, "mu_nu")?,
                },
                t_index: opt_field(f[3], line, "t_index")?,
                delta: field(f[4], line, "delta")?,
                rho: opt_field(f[5], line, "rho")?,
                gamma: 0.0,
                adaptive_added: field(f[6], line, "n_adaptive_points")?,
                m: field(f[7], line, "m")?,
                capped: false,
                seconds: field(f[8], line, "seconds")?,
            });
        }
        Ok(TrainingLog {
            records,
            stop: StopReason::default(),
        })
    }
}
