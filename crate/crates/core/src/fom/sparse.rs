//! Compressed-row system storage and the sparse direct solve behind it.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::Mat;

use crate::error::SolveError;
use crate::fom::stencil::StencilRow;

/// Square sparse operator plus right-hand side, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn from_rows(n: usize, rows: impl IntoIterator<Item = StencilRow>) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(n * 7);
        let mut vals = Vec::with_capacity(n * 7);
        let mut rhs = Vec::with_capacity(n);
        row_ptr.push(0);
        for row in rows {
            let mut e: Vec<(usize, f64)> = row.entries().to_vec();
            e.sort_unstable_by_key(|x| x.0);
            for (c, v) in e {
                cols.push(c);
                vals.push(v);
            }
            rhs.push(row.rhs);
            row_ptr.push(cols.len());
        }
        assert_eq!(rhs.len(), n, "row count must equal system size");
        LinearSystem {
            n,
            row_ptr,
            cols,
            vals,
            rhs,
        }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&c, &a)| a * x[c]).sum()
            })
            .collect()
    }

    /// `A x − b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri -= bi;
        }
        r
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, row) in a.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&c, &v) in c.iter().zip(v) {
                row[c] += v;
            }
        }
        a
    }

    pub fn same_pattern(&self, other: &LinearSystem) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.cols == other.cols
    }
}

/// Column-compressed pattern of a [`LinearSystem`] with its symbolic LU.
struct Factorization {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    csc: SymbolicSparseColMat<usize>,
    /// CSR entry k lands at CSC slot `perm[k]`
    perm: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

/// Sparse LU solver that keeps the symbolic analysis (COLAMD ordering and
/// elimination structure) across systems sharing a sparsity pattern, as
/// happens between Picard iterations.
#[derive(Default)]
pub struct DirectSolver {
    cached: Option<Factorization>,
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, sys: &LinearSystem) -> Result<&Factorization, SolveError> {
        let reuse = matches!(&self.cached, Some(f) if f.row_ptr == sys.row_ptr && f.cols == sys.cols);
        if !reuse {
            let n = sys.n;
            let mut col_count = vec![0usize; n + 1];
            for &c in &sys.cols {
                col_count[c + 1] += 1;
            }
            for c in 0..n {
                col_count[c + 1] += col_count[c];
            }
            let col_ptr = col_count.clone();
            let mut next = col_count;
            let mut row_idx = vec![0usize; sys.nnz()];
            let mut perm = vec![0usize; sys.nnz()];
            for i in 0..n {
                for k in sys.row_ptr[i]..sys.row_ptr[i + 1] {
                    let c = sys.cols[k];
                    let slot = next[c];
                    next[c] += 1;
                    row_idx[slot] = i;
                    perm[k] = slot;
                }
            }
            let csc = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
            let symbolic = SymbolicLu::try_new(csc.as_ref())
                .map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
            self.cached = Some(Factorization {
                row_ptr: sys.row_ptr.clone(),
                cols: sys.cols.clone(),
                csc,
                perm,
                symbolic,
            });
        }
        Ok(self.cached.as_ref().expect("factorization prepared"))
    }

    /// Solves `A x = b` by sparse LU with partial pivoting.
    pub fn solve(&mut self, sys: &LinearSystem) -> Result<Vec<f64>, SolveError> {
        let f = self.prepare(sys)?;
        let mut vals = vec![0.0; sys.nnz()];
        for (k, &v) in sys.vals.iter().enumerate() {
            vals[f.perm[k]] = v;
        }
        let mat = SparseColMatRef::new(f.csc.as_ref(), &vals);
        let lu = Lu::try_new_with_symbolic(f.symbolic.clone(), mat)
            .map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
        let mut x = Mat::<f64>::from_fn(sys.n, 1, |i, _| sys.rhs[i]);
        lu.solve_in_place(x.as_mut());
        let out: Vec<f64> = (0..sys.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::Factorization(
                "non-finite solution (singular operator?)".into(),
            ));
        }
        Ok(out)
    }
}
