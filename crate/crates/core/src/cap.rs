//! Limit on the dimension of dense operators built by the crate.

use crate::error::{Error, Result};

pub const DEFAULT_DENSE_CAP: usize = 1 << 14;

/// Environment variable overriding [`DEFAULT_DENSE_CAP`].
pub const DENSE_CAP_ENV: &str = "QBP_DENSE_CAP";

pub fn dense_cap() -> usize {
    std::env::var(DENSE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(DEFAULT_DENSE_CAP)
}

pub fn check_dense(dim: usize) -> Result<()> {
    let cap = dense_cap();
    if dim > cap {
        Err(Error::DenseCapExceeded { dim, cap })
    } else {
        Ok(())
    }
}

/// Product of dimensions, saturating so that overflow trips the cap check.
pub fn total_dim<I: IntoIterator<Item = usize>>(dims: I) -> usize {
    dims.into_iter().fold(1usize, |acc, d| acc.saturating_mul(d))
}
