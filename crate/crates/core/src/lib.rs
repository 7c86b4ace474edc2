// NaN-rejecting guards are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod cocycle;
pub mod config;
pub mod critical;
pub mod error;
pub mod polar;
pub mod precision;
pub mod rotation;
pub mod torus;

pub use error::{Error, Result};

use rayon::prelude::*;

/// Maps `f` over `items` in parallel, keeping input order and returning the
/// first error in that order.
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    items.par_iter().map(f).collect::<Vec<_>>().into_iter().collect()
}
