//! CSV field dumps: one row per unknown, `kind,i,j,x,y,value`.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::FormatError;
use crate::fom::{StateVector, Trajectory};
use crate::grid::{GridSpec, Kind};

pub const FIELD_HEADER: &str = "kind,i,j,x,y,value";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_field<W: Write>(mut w: W, state: &StateVector) -> io::Result<()> {
    writeln!(w, "{FIELD_HEADER}")?;
    let g = &state.grid;
    for (flat, &val) in state.values.iter().enumerate() {
        let d = g.dof(flat);
        let (x, y) = g.position(d.kind, d.i, d.j);
        writeln!(
            w,
            "{},{},{},{},{},{}",
            d.kind,
            d.i,
            d.j,
            fmt_f64(x),
            fmt_f64(y),
            fmt_f64(val)
        )?;
    }
    Ok(())
}

pub fn write_field_file(path: &Path, state: &StateVector) -> io::Result<()> {
    let f = fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    write_field(&mut w, state)?;
    w.flush()
}

/// Reads a field dump back onto `grid`. Rows may come in any order.
pub fn read_field<R: BufRead>(r: R, grid: &GridSpec) -> Result<StateVector, FormatError> {
    let mut values = vec![f64::NAN; grid.n_dofs()];
    let mut seen = 0usize;
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        if ln == 0 {
            if line.trim() != FIELD_HEADER {
                return Err(FormatError::Csv {
                    line: 1,
                    msg: format!("expected header `{FIELD_HEADER}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| FormatError::Csv {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad("expected 6 columns"));
        }
        let kind = match cols[0] {
            "u" => Kind::U,
            "v" => Kind::V,
            "p" => Kind::P,
            _ => return Err(bad("unknown kind")),
        };
        let i: usize = cols[1].parse().map_err(|_| bad("bad i"))?;
        let j: usize = cols[2].parse().map_err(|_| bad("bad j"))?;
        let val: f64 = cols[5].parse().map_err(|_| bad("bad value"))?;
        let flat = grid.flat_index(kind, i, j).map_err(|e| bad(&e.to_string()))?;
        if values[flat].is_nan() {
            seen += 1;
        }
        values[flat] = val;
    }
    if seen != grid.n_dofs() {
        return Err(FormatError::Csv {
            line: 0,
            msg: format!("expected {} unknowns, found {seen}", grid.n_dofs()),
        });
    }
    Ok(StateVector {
        grid: *grid,
        values,
        time: None,
    })
}

/// Writes `field_<k>.csv` for each selected index and a `manifest.txt`
/// listing `tau`, `T` and the indices.
pub fn write_trajectory(dir: &Path, traj: &Trajectory, indices: &[usize]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for &k in indices {
        if let Some(s) = traj.states.get(k) {
            let p = dir.join(format!("field_{k:06}.csv"));
            write_field_file(&p, s)?;
            written.push(p);
        }
    }
    let mut m = BufWriter::new(fs::File::create(dir.join("manifest.txt"))?);
    writeln!(m, "tau = {}", fmt_f64(traj.tau))?;
    writeln!(m, "T = {}", fmt_f64(traj.final_time()))?;
    let list: Vec<String> = indices.iter().map(|k| k.to_string()).collect();
    writeln!(m, "indices = {}", list.join(","))?;
    m.flush()?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let g = GridSpec::new(3, 4).unwrap();
        let vals: Vec<f64> = (0..g.n_dofs()).map(|k| (k as f64).sin() / 3.0).collect();
        let s = StateVector::new(g, vals).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &s).unwrap();
        let back = read_field(io::Cursor::new(buf), &g).unwrap();
        assert_eq!(back.values, s.values);
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let g = GridSpec::new(3, 3).unwrap();
        let s = StateVector::zeros(g);
        let mut buf = Vec::new();
        write_field(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(read_field(io::Cursor::new(cut), &g).is_err());
    }
}
