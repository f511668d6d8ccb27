// Checks written as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod cli;
pub mod error;
pub mod evolve2d;
pub mod functionals;
pub mod kernels;
pub mod linalg;
pub mod lp;
pub mod mcsim;
pub mod oracle;
pub mod quadrature;
pub mod spectral1d;
pub mod validate;
pub mod velocity;

pub use error::{Error, Result};
pub use velocity::{Domain, VelocityField};
