use crate::error::SolveError;
use crate::fom::sparse::{DirectSolver, LinearSystem};
use crate::fom::StateVector;
use crate::grid::GridSpec;

/// Streamfunction at the `(nx+1)×(ny+1)` grid nodes, `i` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamField {
    pub nx: usize,
    pub ny: usize,
    pub q: Vec<f64>,
}

impl StreamField {
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i + j * (self.nx + 1)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.q[self.node(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// `∂u/∂y − ∂v/∂x` at interior nodes `(i·hx, j·hy)`, `i = 1..nx-1`,
/// `j = 1..ny-1`, ordered `i` fastest.
pub fn vorticity_at_nodes(state: &StateVector) -> Vec<f64> {
    let g = &state.grid;
    let x = &state.values;
    let mut w = Vec::with_capacity((g.nx - 1) * (g.ny - 1));
    for j in 1..g.ny {
        for i in 1..g.nx {
            let du_dy = (x[g.u(i, j + 1)] - x[g.u(i, j)]) / g.hy;
            let dv_dx = (x[g.v(i + 1, j)] - x[g.v(i, j)]) / g.hx;
            w.push(du_dy - dv_dx);
        }
    }
    w
}

fn interior(g: &GridSpec, i: usize, j: usize) -> usize {
    (i - 1) + (j - 1) * (g.nx - 1)
}

/// Solves `−Δq = ∂u/∂y − ∂v/∂x` with the 5-point stencil and `q = 0` on the
/// cavity wall.
pub fn streamfunction(state: &StateVector) -> Result<StreamField, SolveError> {
    let g = &state.grid;
    let omega = vorticity_at_nodes(state);
    let n = (g.nx - 1) * (g.ny - 1);
    let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for j in 1..g.ny {
        for i in 1..g.nx {
            let mut e: Vec<(usize, f64)> = Vec::with_capacity(5);
            if j > 1 {
                e.push((interior(g, i, j - 1), -ay));
            }
            if i > 1 {
                e.push((interior(g, i - 1, j), -ax));
            }
            e.push((interior(g, i, j), 2.0 * ax + 2.0 * ay));
            if i + 1 < g.nx {
                e.push((interior(g, i + 1, j), -ax));
            }
            if j + 1 < g.ny {
                e.push((interior(g, i, j + 1), -ay));
            }
            for (c, v) in e {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
    }
    let sys = LinearSystem {
        n,
        row_ptr,
        cols,
        vals,
        rhs: omega,
    };
    let sol = DirectSolver::new().solve(&sys)?;
    let mut q = vec![0.0; (g.nx + 1) * (g.ny + 1)];
    for j in 1..g.ny {
        for i in 1..g.nx {
            q[i + j * (g.nx + 1)] = sol[interior(g, i, j)];
        }
    }
    Ok(StreamField { nx: g.nx, ny: g.ny, q })
}

/// Pointwise `|q_ref − q_rom|` and its maximum.
pub fn streamline_error(q_ref: &StreamField, q_rom: &StreamField) -> Result<(Vec<f64>, f64), SolveError> {
    if q_ref.nx != q_rom.nx || q_ref.ny != q_rom.ny {
        return Err(SolveError::DimensionMismatch {
            expected: q_ref.q.len(),
            got: q_rom.q.len(),
        });
    }
    let e: Vec<f64> = q_ref.q.iter().zip(&q_rom.q).map(|(a, b)| (a - b).abs()).collect();
    let m = e.iter().fold(0.0f64, |m, x| m.max(*x));
    Ok((e, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn zero_velocity_gives_zero_streamfunction() {
        let g = GridSpec::new(6, 5).unwrap();
        let q = streamfunction(&StateVector::zeros(g)).unwrap();
        assert!(q.q.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rigid_rotation_matches_dense_poisson() {
        let g = GridSpec::new(8, 8).unwrap();
        let mut s = StateVector::zeros(g);
        for flat in 0..g.n_velocity() {
            let d = g.dof(flat);
            let (x, y) = g.position(d.kind, d.i, d.j);
            s.values[flat] = match d.kind {
                crate::grid::Kind::U => -(y - 0.5),
                _ => x - 0.5,
            };
        }
        let w = vorticity_at_nodes(&s);
        assert!(w.iter().all(|&x| (x + 2.0).abs() < 1e-12));

        // dense 5-point oracle on the 7×7 interior nodes
        let m = 7;
        let h2 = 64.0;
        let mut a = vec![vec![0.0; m * m]; m * m];
        for j in 0..m {
            for i in 0..m {
                let k = i + j * m;
                a[k][k] = 4.0 * h2;
                if i > 0 {
                    a[k][k - 1] = -h2;
                }
                if i + 1 < m {
                    a[k][k + 1] = -h2;
                }
                if j > 0 {
                    a[k][k - m] = -h2;
                }
                if j + 1 < m {
                    a[k][k + m] = -h2;
                }
            }
        }
        let oracle = dense_solve(a, vec![-2.0; m * m]);
        let q = streamfunction(&s).unwrap();
        for j in 1..8 {
            for i in 1..8 {
                let want = oracle[(i - 1) + (j - 1) * m];
                assert!((q.at(i, j) - want).abs() < 1e-13, "({i},{j})");
            }
        }
        for i in 0..=8 {
            assert_eq!(q.at(i, 0), 0.0);
            assert_eq!(q.at(i, 8), 0.0);
            assert_eq!(q.at(0, i), 0.0);
            assert_eq!(q.at(8, i), 0.0);
        }
    }

    #[test]
    fn discrete_laplacian_reproduces_vorticity() {
        let g = GridSpec::new(10, 7).unwrap();
        let mut s = StateVector::zeros(g);
        for (k, v) in s.values.iter_mut().enumerate() {
            *v = ((k * 37) % 11) as f64 / 7.0 - 0.6;
        }
        let q = streamfunction(&s).unwrap();
        let w = vorticity_at_nodes(&s);
        for j in 1..g.ny {
            for i in 1..g.nx {
                let lap = (q.at(i - 1, j) - 2.0 * q.at(i, j) + q.at(i + 1, j)) / (g.hx * g.hx)
                    + (q.at(i, j - 1) - 2.0 * q.at(i, j) + q.at(i, j + 1)) / (g.hy * g.hy);
                assert!((-lap - w[interior(&g, i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identical_fields_have_zero_error() {
        let f = StreamField {
            nx: 2,
            ny: 2,
            q: vec![0.0, 0.1, 0.0, 0.2, 0.3, 0.1, 0.0, 0.0, 0.0],
        };
        let (e, m) = streamline_error(&f, &f).unwrap();
        assert!(e.iter().all(|&x| x == 0.0));
        assert_eq!(m, 0.0);
        let other = StreamField { nx: 3, ny: 2, q: vec![0.0; 12] };
        assert!(streamline_error(&f, &other).is_err());
    }
}
