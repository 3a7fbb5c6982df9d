//! Strong-coupling numerics for the random field Ising chain.
//!
//! Field, walk and coupling live in "field units" everywhere in the public
//! API, with `Γ = 2J`. The doubled walk `T = 2S` used by the Lindley chain and
//! the patched measure only appears inside [`renewal`].

pub mod disorder;
pub mod error;
pub mod extrema;
pub mod harness;
pub mod maxenergy;
pub mod model;
pub mod renewal;
pub mod rng;
pub mod stats;
pub mod transfer;

pub use disorder::{sample_increments, DisorderLaw, WalkPath};
pub use error::{Error, Result};
pub use model::{hamiltonian, BoundaryCondition, Spin};
pub use rng::SeededStream;
pub use stats::{Estimate, Outcome};

/// Increments are generated in blocks of this size so that long walks are
/// never materialized.
pub(crate) const BLOCK: usize = 4096;

/// Runs `f` on replicas `0..replicas` in parallel and returns the results in
/// replica order, so reductions do not depend on the thread count.
pub(crate) fn per_replica<T, F>(replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..replicas as u64).into_par_iter().map(f).collect()
}

/// Parses counts such as `10000000`, `1e7` or `2.5e6`.
pub fn parse_count(text: &str) -> Result<u64> {
    let trimmed = text.trim();
    if let Ok(n) = trimmed.parse::<u64>() {
        return Ok(n);
    }
    let bad = || error::invalid("count", format!("`{text}` is not a non-negative integer"));
    let x: f64 = trimmed.parse().map_err(|_| bad())?;
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_in_scientific_notation() {
        assert_eq!(parse_count("1e7").unwrap(), 10_000_000);
        assert_eq!(parse_count("2.5e3").unwrap(), 2500);
        assert_eq!(parse_count(" 42 ").unwrap(), 42);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("many").is_err());
    }

    #[test]
    fn replica_results_keep_index_order() {
        let out = per_replica(37, |r| r * r);
        assert_eq!(out, (0..37u64).map(|r| r * r).collect::<Vec<_>>());
    }
}
