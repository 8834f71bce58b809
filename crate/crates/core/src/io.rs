//! Model file and CSV exchange formats.
//!
//! The model file is a little-endian binary container:
//! magic, `u32` major/minor version, header, basis (full and
//! closure-restricted), collocation points, closure index map, `σ` matrix,
//! functional descriptors, trained pairs and the training log. Wall-clock
//! times are not stored, so identical trainings produce identical bytes.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::FormatError;
use crate::fom::dump::fmt_f64;
use crate::greedy::{StopReason, TrainingLog, TrainingRecord};
use crate::grid::{GridSpec, Parameter, Problem};
use crate::postproc::{ConvergenceRow, StreamField};
use crate::residual::{CollocationPoint, CollocationSet, FunctionalDescriptor, PointOrigin};
use crate::rom::{ReducedModel, TrainedPair};

pub const MAGIC: &[u8; 8] = b"HYMACROM";
pub const VERSION_MAJOR: u32 = 1;
pub const VERSION_MINOR: u32 = 0;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: usize) {
        self.buf.extend_from_slice(&(x as u64).to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.u64(xs.len());
        xs.iter().for_each(|&x| self.f64(x));
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn opt_f64(&mut self, x: Option<f64>) {
        match x {
            Some(v) => {
                self.u8(1);
                self.f64(v);
            }
            None => self.u8(0),
        }
    }
    fn opt_u64(&mut self, x: Option<usize>) {
        match x {
            Some(v) => {
                self.u8(1);
                self.u64(v);
            }
            None => self.u8(0),
        }
    }
    fn param(&mut self, p: Parameter) {
        self.f64(p.re);
        self.f64(p.nu);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

fn corrupt(m: impl Into<String>) -> FormatError {
    FormatError::Corrupt(m.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| corrupt("unexpected end of file"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<usize, FormatError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| corrupt("length overflow"))
    }
    /// Length prefix bounded by the remaining bytes (each element ≥ `elem` bytes).
    fn len(&mut self, elem: usize) -> Result<usize, FormatError> {
        let n = self.u64()?;
        if n.saturating_mul(elem) > self.data.len() - self.pos {
            return Err(corrupt(format!("length {n} exceeds file size")));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self) -> Result<Vec<f64>, FormatError> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String, FormatError> {
        let n = self.len(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("invalid utf-8"))
    }
    fn flag(&mut self) -> Result<bool, FormatError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            t => Err(corrupt(format!("bad flag byte {t}"))),
        }
    }
    fn opt_f64(&mut self) -> Result<Option<f64>, FormatError> {
        Ok(if self.flag()? { Some(self.f64()?) } else { None })
    }
    fn opt_u64(&mut self) -> Result<Option<usize>, FormatError> {
        Ok(if self.flag()? { Some(self.u64()?) } else { None })
    }
    fn param(&mut self) -> Result<Parameter, FormatError> {
        Ok(Parameter {
            re: self.f64()?,
            nu: self.f64()?,
        })
    }
}

fn stop_tag(s: &StopReason) -> (u8, &str) {
    match s {
        StopReason::MaxBasis => (0, ""),
        StopReason::Tolerance => (1, ""),
        StopReason::Degenerate(m) => (2, m),
        StopReason::Exhausted => (3, ""),
    }
}

/// Serializes a model and its training log.
pub fn encode_model(model: &ReducedModel, log: &TrainingLog) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION_MAJOR);
    w.u32(VERSION_MINOR);

    // header
    w.str(model.problem.as_str());
    w.u64(model.grid.nx);
    w.u64(model.grid.ny);
    w.opt_f64(model.tau);
    w.u64(model.n());
    w.u64(model.m());

    for col in &model.basis {
        w.f64s(col);
    }
    for p in &model.points.points {
        w.u64(p.dof.flat);
        w.u8(p.origin.tag());
        w.u64(p.step);
    }
    let closure = model.closure();
    w.u64(closure.indices.len());
    closure.indices.iter().for_each(|&k| w.u64(k));
    let wr = model.restricted();
    w.u64(wr.rows);
    w.u64(wr.cols);
    wr.data.iter().for_each(|&x| w.f64(x));
    for row in &model.sigma {
        w.f64s(row);
    }
    for f in &model.functionals {
        w.u64(f.point.flat);
        w.param(f.param);
        w.str(f.problem.as_str());
        match f.time {
            Some((t, tau)) => {
                w.u8(1);
                w.u64(t);
                w.f64(tau);
            }
            None => w.u8(0),
        }
        w.u64(f.frozen.len());
        for &(k, v) in &f.frozen {
            w.u64(k);
            w.f64(v);
        }
    }
    for p in &model.pairs {
        w.param(p.param);
        w.opt_u64(p.time);
    }

    w.u64(log.records.len());
    for r in &log.records {
        w.u64(r.n);
        w.param(r.mu);
        w.opt_u64(r.t_index);
        w.f64(r.delta);
        w.opt_f64(r.rho);
        w.f64(r.gamma);
        w.u64(r.adaptive_added);
        w.u64(r.m);
        w.u8(r.capped as u8);
    }
    let (tag, msg) = stop_tag(&log.stop);
    w.u8(tag);
    w.str(msg);
    w.buf
}

/// Parses [`encode_model`] output; the online data is rebuilt and checked
/// against the stored closure map and restricted basis.
pub fn decode_model(data: &[u8]) -> Result<(ReducedModel, TrainingLog), FormatError> {
    let mut r = Reader { data, pos: 0 };
    if data.len() < MAGIC.len() || &data[..MAGIC.len()] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    r.pos = MAGIC.len();
    let major = r.u32()?;
    let minor = r.u32()?;
    if major != VERSION_MAJOR {
        return Err(FormatError::UnsupportedVersion { major, minor });
    }

    let problem_s = r.str()?;
    let problem = Problem::parse(&problem_s).ok_or_else(|| corrupt(format!("unknown problem {problem_s:?}")))?;
    let nx = r.u64()?;
    let ny = r.u64()?;
    let grid = GridSpec::new(nx, ny).map_err(|e| corrupt(e.to_string()))?;
    let tau = r.opt_f64()?;
    let n = r.u64()?;
    let m = r.u64()?;
    let n_dofs = grid.n_dofs();

    let mut basis = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let col = r.f64s()?;
        if col.len() != n_dofs {
            return Err(corrupt(format!("basis column of length {} on a {n_dofs}-unknown grid", col.len())));
        }
        basis.push(col);
    }
    let mut points = CollocationSet::new();
    for _ in 0..m {
        let flat = r.u64()?;
        let dof = grid.inverse_index(flat).map_err(|e| corrupt(e.to_string()))?;
        let origin = PointOrigin::from_tag(r.u8()?).ok_or_else(|| corrupt("bad point origin"))?;
        let step = r.u64()?;
        if !points.push(CollocationPoint { dof, origin, step }) {
            return Err(corrupt(format!("duplicate collocation point {flat}")));
        }
    }
    let nc = r.len(8)?;
    let closure: Vec<usize> = (0..nc).map(|_| r.u64()).collect::<Result<_, _>>()?;
    let rows = r.u64()?;
    let cols = r.u64()?;
    let count = rows.checked_mul(cols).ok_or_else(|| corrupt("restricted basis size overflow"))?;
    if count.saturating_mul(8) > data.len() - r.pos {
        return Err(corrupt("restricted basis exceeds file size"));
    }
    let restricted: Vec<f64> = (0..count).map(|_| r.f64()).collect::<Result<_, _>>()?;
    let mut sigma = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let row = r.f64s()?;
        if row.len() != n {
            return Err(corrupt("sigma row length"));
        }
        sigma.push(row);
    }
    let mut functionals = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let flat = r.u64()?;
        let point = grid.inverse_index(flat).map_err(|e| corrupt(e.to_string()))?;
        let param = r.param()?;
        let ps = r.str()?;
        let fproblem = Problem::parse(&ps).ok_or_else(|| corrupt(format!("unknown problem {ps:?}")))?;
        let time = if r.flag()? { Some((r.u64()?, r.f64()?)) } else { None };
        let nf = r.len(16)?;
        let frozen = (0..nf)
            .map(|_| Ok((r.u64()?, r.f64()?)))
            .collect::<Result<Vec<_>, FormatError>>()?;
        functionals.push(FunctionalDescriptor {
            point,
            param,
            problem: fproblem,
            time,
            frozen,
        });
    }
    let mut pairs = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        pairs.push(TrainedPair {
            param: r.param()?,
            time: r.opt_u64()?,
        });
    }

    let nr = r.len(8)?;
    let mut records = Vec::with_capacity(nr);
    for _ in 0..nr {
        records.push(TrainingRecord {
            n: r.u64()?,
            mu: r.param()?,
            t_index: r.opt_u64()?,
            delta: r.f64()?,
            rho: r.opt_f64()?,
            gamma: r.f64()?,
            adaptive_added: r.u64()?,
            m: r.u64()?,
            capped: r.flag()?,
            seconds: 0.0,
        });
    }
    let tag = r.u8()?;
    let msg = r.str()?;
    let stop = match tag {
        0 => StopReason::MaxBasis,
        1 => StopReason::Tolerance,
        2 => StopReason::Degenerate(msg),
        3 => StopReason::Exhausted,
        t => return Err(corrupt(format!("bad stop reason {t}"))),
    };
    if r.pos != data.len() {
        return Err(corrupt("trailing bytes"));
    }

    let model = ReducedModel::from_parts(grid, problem, tau, basis, functionals, sigma, points, pairs)
        .map_err(|e| corrupt(e.to_string()))?;
    if model.closure().indices != closure {
        return Err(corrupt("closure index map does not match the collocation points"));
    }
    let wr = model.restricted();
    if wr.rows != rows || wr.cols != cols || wr.data != restricted {
        return Err(corrupt("restricted basis does not match the full basis"));
    }
    Ok((model, TrainingLog { records, stop }))
}

/// Writes the model file atomically (temporary file + rename).
pub fn write_model(path: &Path, model: &ReducedModel, log: &TrainingLog) -> Result<(), FormatError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode_model(model, log))?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(ReducedModel, TrainingLog), FormatError> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    decode_model(&data)
}

fn csv_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Csv { line, msg: msg.into() }
}

fn parse_rows(text: &str, header: &str, width: usize) -> Result<Vec<Vec<f64>>, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(csv_err(1, format!("expected header {header:?}"))),
    }
    let mut out = Vec::new();
    for (k, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let row = l
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| csv_err(k + 1, format!("bad number {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != width {
            return Err(csv_err(k + 1, format!("expected {width} fields, got {}", row.len())));
        }
        out.push(row);
    }
    Ok(out)
}

pub const CONVERGENCE_HEADER: &str = "n,u_err,v_err,p_err";

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = format!("{CONVERGENCE_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.n, fmt_f64(r.u_err), fmt_f64(r.v_err), fmt_f64(r.p_err));
    }
    s
}

pub fn read_convergence_csv(text: &str) -> Result<Vec<ConvergenceRow>, FormatError> {
    Ok(parse_rows(text, CONVERGENCE_HEADER, 4)?
        .into_iter()
        .map(|r| ConvergenceRow {
            n: r[0] as usize,
            u_err: r[1],
            v_err: r[2],
            p_err: r[3],
        })
        .collect())
}

pub const ERROR_CURVE_HEADER: &str = "n,E,Delta";

/// One point of the `E(n)` / `Δ(n)` curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub e: f64,
    pub delta: f64,
}

pub fn error_curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = format!("{ERROR_CURVE_HEADER}\n");
    for c in curve {
        let _ = writeln!(s, "{},{},{}", c.n, fmt_f64(c.e), fmt_f64(c.delta));
    }
    s
}

pub fn read_error_curve_csv(text: &str) -> Result<Vec<CurvePoint>, FormatError> {
    Ok(parse_rows(text, ERROR_CURVE_HEADER, 3)?
        .into_iter()
        .map(|r| CurvePoint {
            n: r[0] as usize,
            e: r[1],
            delta: r[2],
        })
        .collect())
}

pub const STREAM_HEADER: &str = "i,j,x,y,value";

/// Node-grid CSV (streamfunction or pointwise streamline error).
pub fn stream_csv(nx: usize, ny: usize, values: &[f64]) -> String {
    let mut s = format!("{STREAM_HEADER}\n");
    let (hx, hy) = (1.0 / nx as f64, 1.0 / ny as f64);
    for j in 0..=ny {
        for i in 0..=nx {
            let v = values[i + j * (nx + 1)];
            let _ = writeln!(
                s,
                "{i},{j},{},{},{}",
                fmt_f64(i as f64 * hx),
                fmt_f64(j as f64 * hy),
                fmt_f64(v)
            );
        }
    }
    s
}

pub fn read_stream_csv(text: &str, nx: usize, ny: usize) -> Result<StreamField, FormatError> {
    let rows = parse_rows(text, STREAM_HEADER, 5)?;
    let n = (nx + 1) * (ny + 1);
    if rows.len() != n {
        return Err(csv_err(rows.len() + 1, format!("expected {n} nodes")));
    }
    let mut q = vec![f64::NAN; n];
    for (k, r) in rows.iter().enumerate() {
        let (i, j) = (r[0] as usize, r[1] as usize);
        if i > nx || j > ny {
            return Err(csv_err(k + 2, "node out of range"));
        }
        q[i + j * (nx + 1)] = r[4];
    }
    if q.iter().any(|x| x.is_nan()) {
        return Err(csv_err(n + 1, "missing nodes"));
    }
    Ok(StreamField { nx, ny, q })
}
