//! Numerical toolkit for recovering a space-dependent potential in a
//! subdiffusion equation from terminal observations: Mittag-Leffler
//! evaluation, P1 finite elements, convolution-quadrature time stepping,
//! a preconditioned fixed-point inversion with Anderson acceleration, and
//! an experiment harness.

pub mod error;
pub mod experiments;
pub mod inverse;
pub mod linalg;
pub mod mesh;
pub mod mlf;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
