//! The expansion constants: `κ̂` from ladder heights and `κ̃` from the walk
//! seen around deep Γ-minima.

use serde::{Deserialize, Serialize};

use super::ladder::{ladder_samples, LadderDirection, LadderMode, DEFAULT_EPOCH_CAP};
use crate::disorder::DisorderLaw;
use crate::error::{invalid, Result};
use crate::extrema::sample_environment_functionals;
use crate::per_replica;
use crate::rng::SeededStream;
use crate::stats::{ratio_of_means, Estimate, Outcome, RunningMoments};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaHat {
    /// `½ (E[H◁²]/E[H◁] + E[H▷²]/E[H▷])` with strict ladders.
    pub strict: Estimate,
    /// The same with weak ladders `ρ◁, ρ▷`.
    pub weak: Estimate,
    /// Ladder walks redrawn after passing the epoch cap.
    pub truncated: usize,
}

/// `(E[H²]/E[H], stderr)` by the delta method.
pub fn second_moment_ratio(heights: &[f64]) -> (f64, f64) {
    let squares: Vec<f64> = heights.iter().map(|h| h * h).collect();
    ratio_of_means(&squares, heights)
}

/// `½ (r◁ + r▷)` for two independent height samples.
pub fn kappa_hat_from_heights(ascending: &[f64], descending: &[f64], seed: u64) -> Estimate {
    let (a, sa) = second_moment_ratio(ascending);
    let (d, sd) = second_moment_ratio(descending);
    Estimate {
        mean: 0.5 * (a + d),
        stderr: 0.5 * sa.hypot(sd),
        n_samples: ascending.len().min(descending.len()) as u64,
        seed,
    }
}

pub fn kappa_hat(law: &DisorderLaw, n: usize, stream: &SeededStream) -> Result<Outcome<KappaHat>> {
    kappa_hat_with_cap(law, n, DEFAULT_EPOCH_CAP, stream)
}

/// Streams: `stream.split(0..4)` for strict ◁, strict ▷, weak ◁, weak ▷.
pub fn kappa_hat_with_cap(
    law: &DisorderLaw,
    n: usize,
    cap: u64,
    stream: &SeededStream,
) -> Result<Outcome<KappaHat>> {
    if n < 10_000 {
        return Err(invalid("n", format!("need at least 10000 ladder samples, got {n}")));
    }
    use LadderDirection::{Ascending, Descending};
    use LadderMode::{Strict, Weak};
    let mut truncated = 0;
    let mut heights = Vec::new();
    for (i, (dir, mode)) in [(Ascending, Strict), (Descending, Strict), (Ascending, Weak), (Descending, Weak)]
        .into_iter()
        .enumerate()
    {
        let batch = ladder_samples(law, dir, mode, n, cap, &stream.split(i as u64))?;
        truncated += batch.truncated;
        heights.push(batch.heights());
    }
    let strict = kappa_hat_from_heights(&heights[0], &heights[1], stream.key());
    let weak = kappa_hat_from_heights(&heights[2], &heights[3], stream.key());
    let mut warnings = Vec::new();
    if truncated > 0 {
        warnings.push(format!(
            "{truncated} ladder walks passed the {cap}-step cap and were redrawn"
        ));
    }
    if strict.z_distance(&weak) > 3.0 {
        warnings.push(format!(
            "strict ({strict}) and weak ({weak}) ladder expressions disagree"
        ));
    }
    Ok(Outcome {
        value: KappaHat {
            strict,
            weak,
            truncated,
        },
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaTilde {
    pub gamma: f64,
    /// `E log Σ_{τ⁻ < n < τ⁺} e^{-2 S(n)}`.
    pub inner: Estimate,
    /// `E log Σ_n e^{-2 S(n)}` over the whole environment.
    pub full: Estimate,
}

const ENVS_PER_CHUNK: usize = 250;

/// `κ̃` at each `Γ` (field units) from `n_envs` environments. Environment
/// `k` and `k + 2` share no stretch, so samples are independent and the
/// error bar is the plain standard error. Γ-value `i` uses `stream.split(i)`.
pub fn kappa_tilde(
    law: &DisorderLaw,
    gammas: &[f64],
    n_envs: usize,
    stream: &SeededStream,
) -> Result<Outcome<Vec<KappaTilde>>> {
    if gammas.is_empty() {
        return Err(invalid("gamma", "need at least one value"));
    }
    if n_envs < 1000 {
        return Err(invalid("n_envs", format!("need at least 1000 environments, got {n_envs}")));
    }
    let floor = 4.0 * law.variance().sqrt();
    if let Some(g) = gammas.iter().find(|&&g| !(g >= floor && g.is_finite())) {
        return Err(invalid("gamma", format!("{g} is below 4ϑ = {floor:.3}")));
    }
    let mut out = Vec::with_capacity(gammas.len());
    for (i, &gamma) in gammas.iter().enumerate() {
        let s = stream.split(i as u64);
        let chunks = n_envs.div_ceil(ENVS_PER_CHUNK);
        let parts = per_replica(chunks, |c| {
            let want = ENVS_PER_CHUNK.min(n_envs - c as usize * ENVS_PER_CHUNK);
            sample_environment_functionals(law, gamma, want, s.split(c))
        });
        let (mut inner, mut full) = (RunningMoments::default(), RunningMoments::default());
        for (a, b) in parts.into_iter().flatten() {
            inner.push(a);
            full.push(b);
        }
        let est = |m: &RunningMoments| Estimate {
            mean: m.mean(),
            stderr: m.stderr(),
            n_samples: m.count(),
            seed: s.key(),
        };
        out.push(KappaTilde {
            gamma,
            inner: est(&inner),
            full: est(&full),
        });
    }
    let mut warnings = Vec::new();
    let last = out
        .iter()
        .max_by(|a, b| a.gamma.total_cmp(&b.gamma))
        .expect("non-empty");
    if last.inner.z_distance(&last.full) > 1.0 {
        warnings.push(format!(
            "at Γ = {} the truncated ({}) and full ({}) functionals differ by more than their error",
            last.gamma, last.inner, last.full
        ));
    }
    Ok(Outcome {
        value: out,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rademacher_is_exactly_one() {
        let law = DisorderLaw::rademacher(1.0).unwrap();
        let k = kappa_hat(&law, 10_000, &SeededStream::new(7)).unwrap().value;
        assert_eq!(k.strict.mean, 1.0);
        assert!(k.strict.stderr < 1e-12);
        assert!((k.weak.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_heights_give_twice_the_mean() {
        let h: Vec<f64> = (1..=100_000).map(|i| -((i as f64 - 0.5) / 100_000.0).ln()).collect();
        let (r, se) = second_moment_ratio(&h);
        assert!((r - 2.0).abs() < 1e-3);
        assert!(se > 0.0 && se < 0.02);
    }

    #[test]
    fn rejects_small_budgets() {
        let law = DisorderLaw::gaussian(1.0).unwrap();
        let s = SeededStream::new(1);
        assert!(kappa_hat(&law, 9_999, &s).is_err());
        assert!(kappa_tilde(&law, &[8.0], 999, &s).is_err());
        assert!(kappa_tilde(&law, &[3.0], 1000, &s).is_err());
        assert!(kappa_tilde(&law, &[], 1000, &s).is_err());
    }

    #[test]
    fn kappa_tilde_is_positive() {
        let law = DisorderLaw::gaussian(1.0).unwrap();
        let k = kappa_tilde(&law, &[4.0, 6.0], 1000, &SeededStream::new(3)).unwrap().value;
        for kt in k {
            assert!(kt.inner.mean > 0.0 && kt.full.mean >= kt.inner.mean);
            assert_eq!(kt.inner.n_samples, 1000);
        }
    }
}
