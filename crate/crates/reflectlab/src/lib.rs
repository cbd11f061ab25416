//! Self-similar potential-flow toolkit: polytropic gas relations, oblique
//! shock closure, shock polars, trivial regular reflections, corner spectra
//! for degenerate elliptic operators, a linearized reflection solver, and a
//! nonlinear perturbation solver.

pub mod cli;
pub mod error;
pub mod gas;
pub mod linsolve;
pub mod mesh;
pub mod pencil;
pub mod perturb;
pub mod polar;
pub mod reflection;
pub mod shock;
pub mod solve;

pub use error::{Error, Result};
pub use gas::{GasConstants, ThermoState, Vec2};
