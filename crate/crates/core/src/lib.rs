//! Hyper-reduced MAC scheme for parametric Stokes and Navier-Stokes flow.
//!
//! * [`grid`]: staggered grid layout and indexing.
//! * [`fom`]: full-order MAC solvers (Stokes, steady and unsteady NS).
//! * [`residual`]: full and collocated residuals, stencil closures, GEIM functionals.
//! * [`rom`]: reduced model, online over-collocation solver, GEIM/EIM extension.
//! * [`greedy`]: offline greedy trainers with adaptive collocation enrichment.
//! * [`postproc`]: streamfunction, error metrics, convergence tables.
//! * [`io`]: model file and CSV exchange formats.
//! * [`validate`]: truncation studies against truth references.

pub mod error;
pub mod fom;
pub mod greedy;
pub mod grid;
pub mod io;
pub mod lstsq;
pub mod postproc;
pub mod residual;
pub mod rom;
pub mod validate;

pub use error::{FormatError, GridError, ResidualError, RomError, SolveError, TrainError};
pub use grid::{DofIndex, GridSpec, Kind, Parameter, Problem};
