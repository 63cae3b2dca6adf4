//! A numerical laboratory for the inverse spectral problem of the Robin
//! Laplacian with a singular potential: forward eigensolvers producing
//! boundary spectral data, a verification suite for the resolvent and
//! coercivity estimates that drive the theory, and an inverse engine that
//! recovers the potential difference from two spectral datasets through
//! complex-geometrical-optics probes and regularized Fourier inversion.

pub mod bank;
pub mod cgo;
pub mod cli;
pub mod error;
pub mod field;
pub mod fourier;
pub mod grid;
pub mod harness;
pub mod io;
pub mod operator;
pub mod resolvent;
pub mod solve;
pub mod sparse;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
pub use field::{norm, BoundaryFunction, NormKind, ScalarField};
pub use fourier::{fourier_transform, FourierField};
pub use grid::{build_grid, default_box, Grid, GridSpec};
