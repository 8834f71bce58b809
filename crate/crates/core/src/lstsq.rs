//! Dense least squares by Householder QR with column pivoting.
//!
//! The online systems are at most a few hundred rows by a few dozen columns,
//! so a straightforward column-major implementation is plenty.

/// Result of `min ‖A x − b‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    /// Basic solution: components of dropped (rank-deficient) columns are 0.
    pub x: Vec<f64>,
    /// Numerical rank under the relative tolerance.
    pub rank: usize,
    /// `‖A x − b‖₂`.
    pub residual: f64,
}

/// Relative rank tolerance against the largest column norm.
pub const RANK_TOL: f64 = 1e-12;

/// Solves `min ‖A x − b‖₂` for a column-major `m × n` matrix `a`
/// (`a[j*m + i] = A[i][j]`).
pub fn lstsq(a: &[f64], m: usize, n: usize, b: &[f64]) -> LstsqSolution {
    assert_eq!(a.len(), m * n, "matrix size");
    assert_eq!(b.len(), m, "rhs size");
    let mut q = a.to_vec();
    let mut y = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<f64> = (0..n).map(|j| col_norm2(&q[j * m..(j + 1) * m])).collect();
    let max_norm = norms.iter().fold(0.0f64, |a, &b| a.max(b.sqrt()));
    let tol = RANK_TOL * max_norm;
    let steps = m.min(n);
    let mut rank = 0;

    for k in 0..steps {
        // pivot: largest remaining column norm (recomputed, lowest index on ties)
        for (j, nj) in norms.iter_mut().enumerate().skip(k) {
            *nj = col_norm2(&q[j * m + k..(j + 1) * m]);
        }
        let mut p = k;
        for j in k + 1..n {
            if norms[j] > norms[p] {
                p = j;
            }
        }
        if norms[p].sqrt() <= tol || max_norm == 0.0 {
            break;
        }
        if p != k {
            for i in 0..m {
                q.swap(k * m + i, p * m + i);
            }
            norms.swap(k, p);
            perm.swap(k, p);
        }
        // Householder reflector for column k, rows k..m
        let col = &mut q[k * m..(k + 1) * m];
        let alpha = col_norm2(&col[k..]).sqrt();
        let beta = if col[k] >= 0.0 { -alpha } else { alpha };
        let v0 = col[k] - beta;
        col[k] = beta;
        // v = (1, col[k+1..]/v0)
        for x in &mut col[k + 1..] {
            *x /= v0;
        }
        let tau = -v0 / beta;
        let v: Vec<f64> = std::iter::once(1.0).chain(col[k + 1..].iter().copied()).collect();
        for j in k + 1..n {
            let cj = &mut q[j * m + k..(j + 1) * m];
            let s = tau * dot(&v, cj);
            cj.iter_mut().zip(&v).for_each(|(c, vi)| *c -= s * vi);
        }
        let s = tau * dot(&v, &y[k..]);
        y[k..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= s * vi);
        rank += 1;
    }

    // back substitution on the leading rank×rank block
    let mut z = vec![0.0; n];
    for k in (0..rank).rev() {
        let mut s = y[k];
        for j in k + 1..rank {
            s -= q[j * m + k] * z[j];
        }
        z[k] = s / q[k * m + k];
    }
    let mut x = vec![0.0; n];
    for k in 0..n {
        x[perm[k]] = z[k];
    }
    let residual = {
        let mut r2 = 0.0;
        for i in 0..m {
            let mut s = -b[i];
            for j in 0..n {
                s += a[j * m + i] * x[j];
            }
            r2 += s * s;
        }
        r2.sqrt()
    };
    LstsqSolution { x, rank, residual }
}

fn col_norm2(c: &[f64]) -> f64 {
    c.iter().map(|x| x * x).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
