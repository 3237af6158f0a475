//! De Broglie-Bohm pilot-wave dynamics as a deterministic hidden Markov model.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohm;
pub mod error;
pub mod field;
pub mod gauge;
pub mod grid;
pub mod hmm;
pub mod io;
pub mod linear;
pub mod phase_space;
pub mod scenarios;
pub mod schrodinger;
pub mod selftest;
pub mod shoemaker;

pub use error::{Error, Result};
pub use field::{ComplexField, Field, RealField};
pub use grid::{Axis, Boundary, Grid, Metric};
