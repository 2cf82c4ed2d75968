// NaN-rejecting guards are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod densities;
pub mod error;
pub mod kernels;
pub mod oracle;
pub mod quadrature;
pub mod rates;
pub mod spectra;

pub use error::{Error, Result};
