//! Ladder epochs and heights of fresh walks.

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderLaw;
use crate::error::{invalid, Error, Result};
use crate::per_replica;
use crate::rng::SeededStream;

/// `Ascending` crosses above 0 (`◁`), `Descending` below 0 (`▷`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderDirection {
    Ascending,
    Descending,
}

/// `Strict` stops at the first `S > 0` (`α`), `Weak` at the first `S ≥ 0`
/// (`ρ`), mirrored for descending ladders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderMode {
    Strict,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSample {
    pub direction: LadderDirection,
    pub mode: LadderMode,
    /// `S_α` for ascending ladders, `-S_α` for descending ones.
    pub height: f64,
    pub epoch: u64,
}

/// Epochs are heavy tailed (`P[α > n] ~ c/√n`), so each walk is abandoned
/// after this many steps and redrawn.
pub const DEFAULT_EPOCH_CAP: u64 = 1_000_000;

/// Fraction of abandoned walks above which sampling fails.
pub const MAX_TRUNCATED_FRACTION: f64 = 0.01;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderBatch {
    pub samples: Vec<LadderSample>,
    /// Walks abandoned at the epoch cap (and replaced).
    pub truncated: usize,
    pub cap: u64,
}

impl LadderBatch {
    pub fn heights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.height).collect()
    }
}

/// One ladder record, or `None` if the walk ran past `cap` steps.
#[inline]
pub(crate) fn ladder_once(
    law: &DisorderLaw,
    direction: LadderDirection,
    mode: LadderMode,
    cap: u64,
    stream: &mut SeededStream,
) -> Option<(f64, u64)> {
    let sign = match direction {
        LadderDirection::Ascending => 1.0,
        LadderDirection::Descending => -1.0,
    };
    let mut s = 0.0;
    for n in 1..=cap {
        s += sign * law.sample(stream);
        let done = match mode {
            LadderMode::Strict => s > 0.0,
            LadderMode::Weak => s >= 0.0,
        };
        if done {
            return Some((s, n));
        }
    }
    None
}

/// `n` independent ladder records. Chunk `c` of 1024 samples draws from
/// `stream.split(c)`, so the output does not depend on the thread count.
pub fn ladder_samples(
    law: &DisorderLaw,
    direction: LadderDirection,
    mode: LadderMode,
    n: usize,
    cap: u64,
    stream: &SeededStream,
) -> Result<LadderBatch> {
    if n == 0 {
        return Err(invalid("n", "need at least one ladder sample"));
    }
    if cap == 0 {
        return Err(invalid("epoch cap", "must be positive"));
    }
    let chunks = n.div_ceil(CHUNK);
    let parts = per_replica(chunks, |c| {
        let want = CHUNK.min(n - c as usize * CHUNK);
        let mut s = stream.split(c);
        let mut out = Vec::with_capacity(want);
        let mut truncated = 0usize;
        // Bounded so a pathological law cannot loop forever.
        while out.len() < want && truncated <= want {
            match ladder_once(law, direction, mode, cap, &mut s) {
                Some((height, epoch)) => out.push(LadderSample {
                    direction,
                    mode,
                    height,
                    epoch,
                }),
                None => truncated += 1,
            }
        }
        (out, truncated)
    });
    let mut samples = Vec::with_capacity(n);
    let mut truncated = 0;
    for (part, t) in parts {
        samples.extend(part);
        truncated += t;
    }
    if samples.len() < n || truncated as f64 > MAX_TRUNCATED_FRACTION * n as f64 {
        return Err(Error::LadderCap {
            cap,
            truncated,
            requested: n,
        });
    }
    if truncated > 0 {
        log::debug!("{truncated} of {n} ladder walks passed the {cap}-step cap and were redrawn");
    }
    Ok(LadderBatch {
        samples,
        truncated,
        cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RunningMoments;

    #[test]
    fn simple_walk_overshoot_is_one_step() {
        let law = DisorderLaw::rademacher(1.0).unwrap();
        let b = ladder_samples(&law, LadderDirection::Ascending, LadderMode::Strict, 5000, DEFAULT_EPOCH_CAP, &SeededStream::new(1)).unwrap();
        assert!(b.samples.iter().all(|s| s.height == 1.0 && s.epoch % 2 == 1));
        let w = ladder_samples(&law, LadderDirection::Descending, LadderMode::Weak, 5000, DEFAULT_EPOCH_CAP, &SeededStream::new(1)).unwrap();
        assert!(w.samples.iter().all(|s| s.height == 0.0 || s.height == 1.0));
        assert!(w.samples.iter().any(|s| s.height == 0.0));
    }

    #[test]
    fn laplace_heights_are_exponential() {
        // Memorylessness: the overshoot of a Laplace(b) walk is Exp(mean b).
        let b = 1.5;
        let law = DisorderLaw::laplace(b).unwrap();
        let batch = ladder_samples(&law, LadderDirection::Ascending, LadderMode::Strict, 20_000, DEFAULT_EPOCH_CAP, &SeededStream::new(4)).unwrap();
        let mut h = batch.heights();
        h.sort_by(f64::total_cmp);
        let n = h.len() as f64;
        let ks = h
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x / b).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the Kolmogorov–Smirnov statistic.
        assert!(ks < 1.63 / n.sqrt(), "KS = {ks}");
        let mean = h.iter().sum::<f64>() / n;
        assert!((mean - b).abs() < 4.0 * b / n.sqrt());
    }

    #[test]
    fn gaussian_heights_have_finite_mean() {
        let law = DisorderLaw::gaussian(1.0).unwrap();
        let batch = ladder_samples(&law, LadderDirection::Descending, LadderMode::Strict, 20_000, DEFAULT_EPOCH_CAP, &SeededStream::new(9)).unwrap();
        let mut m = RunningMoments::default();
        batch.samples.iter().for_each(|s| m.push(s.height));
        // E[H] = σ/√2 for the Gaussian walk.
        assert!((m.mean() - 1.0 / 2f64.sqrt()).abs() < 4.0 * m.stderr());
        assert!(batch.samples.iter().all(|s| s.height > 0.0 && s.epoch >= 1));
    }

    #[test]
    fn tiny_cap_is_reported() {
        let law = DisorderLaw::gaussian(1.0).unwrap();
        let err = ladder_samples(&law, LadderDirection::Ascending, LadderMode::Strict, 2000, 1, &SeededStream::new(2)).unwrap_err();
        assert!(matches!(err, Error::LadderCap { cap: 1, .. }));
        assert!(ladder_samples(&law, LadderDirection::Ascending, LadderMode::Strict, 0, 10, &SeededStream::new(2)).is_err());
    }

    #[test]
    fn independent_of_chunk_scheduling() {
        let law = DisorderLaw::uniform(1.0).unwrap();
        let s = SeededStream::new(77);
        let a = ladder_samples(&law, LadderDirection::Ascending, LadderMode::Weak, 3000, 100_000, &s).unwrap();
        let b = ladder_samples(&law, LadderDirection::Ascending, LadderMode::Weak, 3000, 100_000, &s).unwrap();
        assert_eq!(a, b);
    }
}
