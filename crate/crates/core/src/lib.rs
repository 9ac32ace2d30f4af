//! Boolean Fourier analysis on `{-1, 1}^n`, pointer value retrieval targets,
//! complexity measures and canonical-holdout training experiments.
//!
//! Coordinates are 1-based in the public API. Subsets of `[n]` are `u32`
//! masks with bit `i` standing for coordinate `i + 1`; in a point mask a set
//! bit means the coordinate is `-1`.

pub mod boolfn;
pub mod complexity;
pub mod error;
pub mod harness;
pub mod nets;
pub mod pvr;
pub mod seed;
pub mod verify;

pub use boolfn::{BooleanFunction, FourierSpectrum};
pub use error::{Error, Result};
