//! Staggered MAC grid on the unit square.
//!
//! Unknown layout (1-based grid coordinates, as in the usual MAC pictures):
//!
//! ```text
//! u(i, j)  at (i·hx, (j-½)·hy)      i = 1..nx-1, j = 1..ny     vertical edges
//! v(i, j)  at ((i-½)·hx, j·hy)      i = 1..nx,   j = 1..ny-1   horizontal edges
//! p(i, j)  at ((i-½)·hx, (j-½)·hy)  i = 1..nx,   j = 1..ny     cell centers
//! ```
//!
//! The concatenated state is `[u; v; p]`; inside each block the ordering is
//! column-major over `(i, j)` with `i` running fastest.

use std::f64::consts::PI;
use std::fmt;

use crate::error::GridError;

/// Which staggered family an unknown belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    U,
    V,
    P,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::U => "u",
            Kind::V => "v",
            Kind::P => "p",
        }
    }

    pub fn is_velocity(self) -> bool {
        !matches!(self, Kind::P)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A grid unknown addressed both by its staggered coordinates and by its
/// position in the concatenated state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DofIndex {
    pub kind: Kind,
    pub i: usize,
    pub j: usize,
    pub flat: usize,
}

/// Flow parameter `(Re, ν)`: Reynolds number and lid control value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameter {
    pub re: f64,
    pub nu: f64,
}

impl Parameter {
    pub fn new(re: f64, nu: f64) -> Result<Self, GridError> {
        if !(re > 0.0) || !re.is_finite() || !nu.is_finite() {
            return Err(GridError::InvalidParameter { re, nu });
        }
        Ok(Parameter { re, nu })
    }
}

/// The three flow models the toolkit discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    Stokes,
    SteadyNs,
    UnsteadyNs,
}

impl Problem {
    pub fn as_str(self) -> &'static str {
        match self {
            Problem::Stokes => "stokes",
            Problem::SteadyNs => "steady-ns",
            Problem::UnsteadyNs => "unsteady-ns",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stokes" => Some(Problem::Stokes),
            "steady-ns" | "steady_ns" | "ns" => Some(Problem::SteadyNs),
            "unsteady-ns" | "unsteady_ns" => Some(Problem::UnsteadyNs),
            _ => None,
        }
    }

    pub fn has_convection(self) -> bool {
        !matches!(self, Problem::Stokes)
    }

    pub fn is_unsteady(self) -> bool {
        matches!(self, Problem::UnsteadyNs)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tangential lid velocity on `y = 1`. Every other wall velocity is zero.
pub fn top_boundary_u(x: f64, p: Parameter, problem: Problem) -> f64 {
    match problem {
        Problem::Stokes => 1.0 + (0.5 * PI * p.nu * x).sin(),
        Problem::SteadyNs | Problem::UnsteadyNs => 1.0 + p.nu * x,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize) -> Result<Self, GridError> {
        if nx < 2 || ny < 2 {
            return Err(GridError::TooSmall { nx, ny });
        }
        Ok(GridSpec {
            nx,
            ny,
            hx: 1.0 / nx as f64,
            hy: 1.0 / ny as f64,
        })
    }

    #[inline]
    pub fn n_u(&self) -> usize {
        (self.nx - 1) * self.ny
    }

    #[inline]
    pub fn n_v(&self) -> usize {
        self.nx * (self.ny - 1)
    }

    #[inline]
    pub fn n_p(&self) -> usize {
        self.nx * self.ny
    }

    /// Total number of unknowns `Nu + Nv + Np`.
    #[inline]
    pub fn n_dofs(&self) -> usize {
        self.n_u() + self.n_v() + self.n_p()
    }

    #[inline]
    pub fn n_velocity(&self) -> usize {
        self.n_u() + self.n_v()
    }

    /// Valid `(i, j)` ranges (inclusive) for a family.
    pub fn range(&self, kind: Kind) -> ((usize, usize), (usize, usize)) {
        match kind {
            Kind::U => ((1, self.nx - 1), (1, self.ny)),
            Kind::V => ((1, self.nx), (1, self.ny - 1)),
            Kind::P => ((1, self.nx), (1, self.ny)),
        }
    }

    pub fn contains(&self, kind: Kind, i: usize, j: usize) -> bool {
        let ((i0, i1), (j0, j1)) = self.range(kind);
        (i0..=i1).contains(&i) && (j0..=j1).contains(&j)
    }

    /// Flat position of `u(i, j)`; caller guarantees the range.
    #[inline]
    pub fn u(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.contains(Kind::U, i, j));
        (i - 1) + (j - 1) * (self.nx - 1)
    }

    #[inline]
    pub fn v(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.contains(Kind::V, i, j));
        self.n_u() + (i - 1) + (j - 1) * self.nx
    }

    #[inline]
    pub fn p(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.contains(Kind::P, i, j));
        self.n_velocity() + (i - 1) + (j - 1) * self.nx
    }

    pub fn flat_index(&self, kind: Kind, i: usize, j: usize) -> Result<usize, GridError> {
        if !self.contains(kind, i, j) {
            return Err(GridError::OutOfRange { kind, i, j });
        }
        Ok(match kind {
            Kind::U => self.u(i, j),
            Kind::V => self.v(i, j),
            Kind::P => self.p(i, j),
        })
    }

    pub fn inverse_index(&self, flat: usize) -> Result<DofIndex, GridError> {
        let (kind, local, width) = if flat < self.n_u() {
            (Kind::U, flat, self.nx - 1)
        } else if flat < self.n_velocity() {
            (Kind::V, flat - self.n_u(), self.nx)
        } else if flat < self.n_dofs() {
            (Kind::P, flat - self.n_velocity(), self.nx)
        } else {
            return Err(GridError::FlatOutOfRange {
                flat,
                n: self.n_dofs(),
            });
        };
        Ok(DofIndex {
            kind,
            i: local % width + 1,
            j: local / width + 1,
            flat,
        })
    }

    /// Same as [`inverse_index`](Self::inverse_index) for indices known to be valid.
    pub fn dof(&self, flat: usize) -> DofIndex {
        self.inverse_index(flat).expect("flat index out of range")
    }

    /// Physical location of an unknown.
    pub fn position(&self, kind: Kind, i: usize, j: usize) -> (f64, f64) {
        let (i, j) = (i as f64, j as f64);
        match kind {
            Kind::U => (i * self.hx, (j - 0.5) * self.hy),
            Kind::V => ((i - 0.5) * self.hx, j * self.hy),
            Kind::P => ((i - 0.5) * self.hx, (j - 0.5) * self.hy),
        }
    }

    /// Flat index of the pinned pressure cell `p(1, 1)`.
    #[inline]
    pub fn gauge_index(&self) -> usize {
        self.n_velocity()
    }

    pub fn is_velocity(&self, flat: usize) -> bool {
        flat < self.n_velocity()
    }
}
