// NaN-rejecting checks are written as `!(x > 0.0)` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bandwidth;
pub mod bessel;
pub mod engine;
pub mod error;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod mixture;
pub mod model;
pub mod priors;
pub mod simulate;

pub use error::{Error, Result};
