use thiserror::Error;

/// Everything that can go wrong inside the workbench.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("coordinate has {got} components but the lattice has dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("symbol {symbol} is outside an alphabet of size {alphabet}")]
    Symbol { symbol: u32, alphabet: u32 },
    #[error("configuration has {got} symbols for a region of {expected} cells")]
    Length { expected: usize, got: usize },
    #[error("region is not contained in the domain")]
    NotContained,
    #[error("regions overlap: {0}")]
    Overlap(String),
    #[error("light cone of radius {time} around the region self-overlaps through the torus")]
    LightCone { time: u64 },
    #[error("coverage violation: {0}")]
    Coverage(String),
    #[error("enumeration of {needed} states exceeds the cap of {cap}")]
    CapExceeded { needed: u128, cap: u64 },
    #[error("rule incompatible with geometry: {0}")]
    IncompatibleGeometry(String),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("translation {vector:?} lies outside the covariance sublattice of the rule")]
    OutsideCovariance { vector: Vec<i64> },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("mismatched regions: {0}")]
    Mismatch(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    /// A certificate that passed the fast check failed full re-simulation.
    #[error("unsound result: {0}")]
    Unsound(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// `base^exp` as a u128, saturating at `u128::MAX`.
pub(crate) fn checked_pow(base: u32, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base as u128) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}

pub(crate) fn ensure_cap(needed: u128, cap: u64) -> Result<()> {
    if needed > cap as u128 {
        Err(Error::CapExceeded { needed, cap })
    } else {
        Ok(())
    }
}
