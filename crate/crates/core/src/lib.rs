//! Differentiable nodal discontinuous Galerkin solver for the 1D and 2D
//! compressible Euler equations, together with the DGNet surrogate of the
//! spatial operator and the machinery to train it.

pub mod analysis;
pub mod basis;
pub mod dg;
pub mod error;
pub mod io;
pub mod limiter;
pub mod mesh;
pub mod physics;
pub mod real;
pub mod surrogate;
pub mod time;
pub mod training;

pub use error::{DgError, Result};
pub use real::{Dual, Real};
