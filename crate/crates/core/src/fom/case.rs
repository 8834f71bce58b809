use std::f64::consts::PI;

use crate::grid::{top_boundary_u, Parameter, Problem};

/// Boundary data, forcing and viscosity of one discrete flow problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowCase {
    /// Parametric lid-driven cavity.
    Lid { problem: Problem, param: Parameter },
    /// Stokes flow with exact solution `u = sin(πx)`, `v = -π cos(πx) y`,
    /// `p = (π/Re) cos(πx)`; walls carry the exact velocity.
    Manufactured { re: f64 },
}

impl FlowCase {
    pub fn lid(problem: Problem, param: Parameter) -> Self {
        FlowCase::Lid { problem, param }
    }

    pub fn re(&self) -> f64 {
        match *self {
            FlowCase::Lid { param, .. } => param.re,
            FlowCase::Manufactured { re } => re,
        }
    }

    pub fn has_convection(&self) -> bool {
        match *self {
            FlowCase::Lid { problem, .. } => problem.has_convection(),
            FlowCase::Manufactured { .. } => false,
        }
    }

    /// `u` on the boundary of the unit square.
    pub fn u_wall(&self, x: f64, y: f64) -> f64 {
        match *self {
            FlowCase::Lid { problem, param } => {
                if y >= 1.0 && x > 0.0 && x < 1.0 {
                    top_boundary_u(x, param, problem)
                } else {
                    0.0
                }
            }
            FlowCase::Manufactured { .. } => manufactured_u(x, y),
        }
    }

    /// `v` on the boundary of the unit square.
    pub fn v_wall(&self, x: f64, y: f64) -> f64 {
        match *self {
            FlowCase::Lid { .. } => 0.0,
            FlowCase::Manufactured { .. } => manufactured_v(x, y),
        }
    }

    pub fn force_u(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }

    pub fn force_v(&self, x: f64, y: f64) -> f64 {
        match *self {
            FlowCase::Lid { .. } => 0.0,
            FlowCase::Manufactured { re } => -(PI * PI * PI / re) * (PI * x).cos() * y,
        }
    }
}

pub fn manufactured_u(x: f64, _y: f64) -> f64 {
    (PI * x).sin()
}

pub fn manufactured_v(x: f64, y: f64) -> f64 {
    -PI * (PI * x).cos() * y
}

pub fn manufactured_p(x: f64, re: f64) -> f64 {
    (PI / re) * (PI * x).cos()
}
