//! Lindley chain, its renewal-sum invariant measure, and the patched measure
//! `γ_Γ` with the functional `M_Γ`.
//!
//! Everything here lives on the doubled walk `T = 2S` with increments
//! `z = 2h`; `Γ = 2J` is the same number as in field units. The invariant
//! measure of `Y' = max(Y + z, 0)` has CDF proportional to
//! `F◁(x) = Σ_{k≥0} P[H_1 + … + H_k ≤ x]` with `H` the strict ascending ladder
//! heights of `T`; `F▷` is the same for `−z`.

use serde::{Deserialize, Serialize};

use super::cdf::EmpiricalCdf;
use super::ladder::{ladder_once, LadderDirection, LadderMode, DEFAULT_EPOCH_CAP, MAX_TRUNCATED_FRACTION};
use crate::disorder::DisorderLaw;
use crate::error::{invalid, Error, Result};
use crate::rng::SeededStream;
use crate::stats::{Estimate, Outcome, RunningMoments};
use crate::{per_replica, BLOCK};

pub fn lindley_step(y: f64, z_next: f64) -> f64 {
    (y + z_next).max(0.0)
}

/// Evenly spaced fit grid `lo, …, hi` (both ends included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl FitWindow {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || points < 2 {
            return Err(invalid(
                "fit window",
                format!("need lo < hi and at least 2 points, got [{lo}, {hi}] with {points}"),
            ));
        }
        Ok(Self { lo, hi, points })
    }

    /// `[5·sd(z), 15·sd(z)]` in T-units, 201 points.
    pub fn for_law(law: &DisorderLaw) -> Self {
        let sd_z = 2.0 * law.variance().sqrt();
        Self {
            lo: 5.0 * sd_z,
            hi: 15.0 * sd_z,
            points: 201,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteFit {
    pub slope: f64,
    pub intercept: f64,
    /// `d/c`, the intercept of the line rescaled to slope 1.
    pub ratio: f64,
    pub max_residual: f64,
}

/// Least-squares line through `(x_i, y_i)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Line `F(x) ≈ c x + d` over the window; warns when the residuals exceed 2%
/// of the range of `F` there, which means the window is not yet linear.
pub fn asymptote_fit(cdf: &EmpiricalCdf, window: &FitWindow) -> Outcome<AsymptoteFit> {
    let xs = window.grid();
    let ys: Vec<f64> = xs.iter().map(|&x| cdf.eval(x)).collect();
    let (slope, intercept) = fit_line(&xs, &ys);
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    let range = ys.last().unwrap() - ys[0];
    let mut warnings = Vec::new();
    if max_residual > 0.02 * range {
        warnings.push(format!(
            "fit residual {max_residual:.4} exceeds 2% of the range {range:.4} on [{}, {}]",
            window.lo, window.hi
        ));
    }
    Outcome {
        value: AsymptoteFit {
            slope,
            intercept,
            ratio: intercept / slope,
            max_residual,
        },
        warnings,
    }
}

/// Renewal-sum CDF rescaled to asymptotic slope 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalCdf {
    pub direction: LadderDirection,
    /// `F(x)`, valid on `[0, x_max]`.
    pub cdf: EmpiricalCdf,
    pub x_max: f64,
    /// Slope of the raw average count, i.e. `1/E[H]`.
    pub raw_slope: f64,
    /// Fit of the rescaled CDF: slope 1 and intercept `d/c`.
    pub fit: AsymptoteFit,
    /// `d/c` with a batch-means error bar.
    pub intercept: Estimate,
    pub chains: usize,
    pub truncated: usize,
}

const CHAINS_PER_CHUNK: usize = 256;
const BATCHES: usize = 16;

/// Monte Carlo of `F◁` (or `F▷`): `n_chains` sequences of fresh T-unit ladder
/// heights, each followed until its partial sum passes `x_max`.
pub fn lindley_cdf_renewal(
    law: &DisorderLaw,
    direction: LadderDirection,
    x_max: f64,
    n_chains: usize,
    window: &FitWindow,
    stream: &SeededStream,
) -> Result<Outcome<RenewalCdf>> {
    if n_chains < BATCHES {
        return Err(invalid("chains", format!("need at least {BATCHES} renewal chains")));
    }
    if window.hi > x_max {
        return Err(invalid(
            "fit window",
            format!("upper end {} is beyond x_max = {x_max}", window.hi),
        ));
    }
    let sd_z = 2.0 * law.variance().sqrt();
    let mut warnings = Vec::new();
    if window.lo < 5.0 * sd_z {
        warnings.push(format!(
            "fit window starts at {} < 5·sd(z) = {:.3}; the CDF may not be linear yet",
            window.lo,
            5.0 * sd_z
        ));
    }
    let chunks = n_chains.div_ceil(CHAINS_PER_CHUNK);
    let parts = per_replica(chunks, |c| {
        let want = CHAINS_PER_CHUNK.min(n_chains - c as usize * CHAINS_PER_CHUNK);
        let mut s = stream.split(c);
        let mut sums = Vec::new();
        let mut truncated = 0usize;
        let mut draws = 0usize;
        #[allow(clippy::same_item_push)]
        for _ in 0..want {
            let mut total = 0.0;
            // Every chain counts its renewal at 0.
            sums.push(0.0);
            loop {
                draws += 1;
                match ladder_once(law, direction, LadderMode::Strict, DEFAULT_EPOCH_CAP, &mut s) {
                    Some((h, _)) => {
                        total += 2.0 * h;
                        if total > x_max {
                            break;
                        }
                        sums.push(total);
                    }
                    None => truncated += 1,
                }
            }
        }
        (sums, want, truncated, draws)
    });
    let truncated: usize = parts.iter().map(|p| p.2).sum();
    let draws: usize = parts.iter().map(|p| p.3).sum();
    if truncated as f64 > MAX_TRUNCATED_FRACTION * draws as f64 {
        return Err(Error::LadderCap {
            cap: DEFAULT_EPOCH_CAP,
            truncated,
            requested: draws,
        });
    }
    // Batch means for the intercept error bar.
    let batches = BATCHES.min(chunks);
    let mut batch_ratios = RunningMoments::default();
    for b in 0..batches {
        let (mut values, mut count) = (Vec::new(), 0);
        for part in parts.iter().skip(b).step_by(batches) {
            values.extend_from_slice(&part.0);
            count += part.1;
        }
        if count > 0 {
            let raw = EmpiricalCdf::from_samples(values, 1.0 / count as f64);
            batch_ratios.push(asymptote_fit(&raw, window).value.ratio);
        }
    }
    let all: Vec<f64> = parts.iter().flat_map(|p| p.0.iter().copied()).collect();
    let raw = EmpiricalCdf::from_samples(all, 1.0 / n_chains as f64);
    let raw_fit = asymptote_fit(&raw, window);
    warnings.extend(raw_fit.warnings);
    let raw_slope = raw_fit.value.slope;
    let cdf = raw.scaled(1.0 / raw_slope);
    let fit = asymptote_fit(&cdf, window).value;
    let se = if batch_ratios.count() >= 2 {
        batch_ratios.stderr()
    } else {
        warnings.push(format!(
            "{n_chains} chains fill a single batch; the intercept has no error bar"
        ));
        0.0
    };
    Ok(Outcome {
        value: RenewalCdf {
            direction,
            cdf,
            x_max,
            raw_slope,
            fit,
            intercept: Estimate {
                mean: fit.ratio,
                stderr: se,
                n_samples: n_chains as u64,
                seed: stream.key(),
            },
            chains: n_chains,
            truncated,
        },
        warnings,
    })
}

/// `κ̂₂ = (c◁ + c▷)/2` from the two rescaled intercepts.
pub fn kappa_hat_two(left: &RenewalCdf, right: &RenewalCdf) -> Estimate {
    Estimate {
        mean: 0.5 * (left.intercept.mean + right.intercept.mean),
        stderr: 0.5 * left.intercept.stderr.hypot(right.intercept.stderr),
        n_samples: left.chains.min(right.chains) as u64,
        seed: left.intercept.seed,
    }
}

/// `γ_Γ`: `F◁(x+Γ)/C_Γ` for `x ≤ 0` and `1 − F▷(Γ−x)/C_Γ` for `x ≥ 0`, with
/// `C_Γ = F◁(Γ) + F▷(Γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchedMeasure {
    pub gamma: f64,
    pub c_gamma: f64,
    left: EmpiricalCdf,
    right: EmpiricalCdf,
    atoms: EmpiricalCdf,
}

pub fn patched_measure(left: &EmpiricalCdf, right: &EmpiricalCdf, gamma: f64) -> Result<PatchedMeasure> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", format!("must be finite and > 0, got {gamma}")));
    }
    let c = left.eval(gamma) + right.eval(gamma);
    if c <= 0.0 || !c.is_finite() {
        return Err(invalid("C_Γ", format!("must be positive, got {c}")));
    }
    let mut atoms: Vec<(f64, f64)> = left
        .atoms()
        .filter(|&(p, _)| p <= gamma)
        .map(|(p, w)| (p - gamma, w / c))
        .collect();
    atoms.extend(
        right
            .atoms()
            .filter(|&(q, _)| q <= gamma)
            .map(|(q, w)| (gamma - q, w / c)),
    );
    Ok(PatchedMeasure {
        gamma,
        c_gamma: c,
        left: left.clone(),
        right: right.clone(),
        atoms: EmpiricalCdf::from_atoms(atoms),
    })
}

impl PatchedMeasure {
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.left.eval(x + self.gamma) / self.c_gamma
        } else {
            1.0 - self.right.eval(self.gamma - x) / self.c_gamma
        }
    }

    /// The measure as atoms on `[−Γ, Γ]` (total mass 1). Its CDF agrees with
    /// [`PatchedMeasure::eval`] except exactly at the atoms of the right half,
    /// where the formula is left-continuous.
    pub fn measure(&self) -> &EmpiricalCdf {
        &self.atoms
    }
}

/// Point beyond which `P[z ≤ −x]` is below ~1e-18, in T-units.
fn tail_point(law: &DisorderLaw) -> f64 {
    2.0 * match *law {
        DisorderLaw::Gaussian { sigma } => 9.0 * sigma,
        DisorderLaw::Rademacher { a } | DisorderLaw::Uniform { a } => a,
        DisorderLaw::Laplace { b } => 42.0 * b,
        DisorderLaw::LogisticSech => 42.0,
    }
}

/// Jumps of `z ↦ P[ζ ≤ −z]`.
fn jump_points(law: &DisorderLaw) -> Vec<f64> {
    match *law {
        DisorderLaw::Rademacher { a } => vec![-2.0 * a, 2.0 * a],
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MGamma {
    pub value: f64,
    /// Sum of the per-piece quadrature error estimates.
    pub abs_error: f64,
}

/// `M_Γ[ν] = ∫ F_ν(z − Γ) F_ζ(−z) dz` by quadrature. `F_ν` is constant
/// between atoms, so the integral is split there (and at jumps of `F_ζ`) and
/// each smooth piece goes to a double-exponential rule.
pub fn m_gamma_functional(nu: &EmpiricalCdf, law: &DisorderLaw, gamma: f64) -> MGamma {
    let upper = tail_point(law);
    let mut cuts: Vec<f64> = nu.points().iter().map(|&x| x + gamma).filter(|&z| z < upper).collect();
    cuts.extend(jump_points(law).into_iter().filter(|&z| z < upper));
    if cuts.is_empty() {
        return MGamma {
            value: 0.0,
            abs_error: 0.0,
        };
    }
    cuts.push(upper);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let first = nu.points()[0] + gamma;
    let (mut value, mut abs_error) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= first {
            continue;
        }
        let weight = nu.eval(0.5 * (a + b) - gamma);
        if weight == 0.0 {
            continue;
        }
        let piece = quadrature::double_exponential::integrate(|z| law.cdf(-0.5 * z), a, b, 1e-12);
        value += weight * piece.integral;
        abs_error += weight * piece.error_estimate;
    }
    MGamma { value, abs_error }
}

/// `M_Γ[ν] = Σ_i w_i E[(−z − x_i − Γ)⁺]`, using the closed-form partial
/// expectation of the (symmetric) law: `E[(−z − a)⁺] = 2 E[(h − a/2)⁺]`.
pub fn m_gamma_exact(nu: &EmpiricalCdf, law: &DisorderLaw, gamma: f64) -> f64 {
    nu.atoms()
        .map(|(x, w)| w * 2.0 * law.excess_mean(0.5 * (x + gamma)))
        .sum()
}

/// `κ̂₁ = ½ ∬ max(0, −x − z) ν◁(dx) ζ(dz)` for the slope-1 measure `ν◁`.
pub fn kappa_hat_one(nu_left: &EmpiricalCdf, law: &DisorderLaw) -> f64 {
    0.5 * m_gamma_exact(nu_left, law, 0.0)
}

/// Occupation of a long Lindley run: for each grid point `x` (T-units), the
/// fraction of the time spent in `[0, x]` among the time spent in
/// `[0, x_max]`, one ratio per replica. Direction `Descending` drives the
/// chain with `−z`.
pub fn lindley_occupation(
    law: &DisorderLaw,
    direction: LadderDirection,
    grid: &[f64],
    x_max: f64,
    steps: u64,
    replicas: usize,
    stream: &SeededStream,
) -> Result<Vec<Estimate>> {
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid.last().is_some_and(|&g| g > x_max) {
        return Err(invalid("grid", "must be increasing and inside [0, x_max]"));
    }
    if replicas == 0 || steps == 0 {
        return Err(invalid("replicas", "need at least one replica and one step"));
    }
    let sign = match direction {
        LadderDirection::Ascending => 2.0,
        LadderDirection::Descending => -2.0,
    };
    let per = per_replica(replicas, |r| {
        let mut s = stream.split(r);
        let mut bins = vec![0u64; grid.len() + 1];
        let mut inside = 0u64;
        let mut block = vec![0.0; BLOCK];
        let mut y = 0.0;
        let mut left = steps;
        while left > 0 {
            let take = left.min(BLOCK as u64) as usize;
            law.fill(&mut s, &mut block[..take]);
            for &h in &block[..take] {
                y = lindley_step(y, sign * h);
                if y <= x_max {
                    inside += 1;
                    bins[grid.partition_point(|&g| g < y)] += 1;
                }
            }
            left -= take as u64;
        }
        let mut acc = 0u64;
        bins[..grid.len()]
            .iter()
            .map(|&b| {
                acc += b;
                acc as f64 / inside.max(1) as f64
            })
            .collect::<Vec<f64>>()
    });
    Ok((0..grid.len())
        .map(|i| {
            let column: Vec<f64> = per.iter().map(|p| p[i]).collect();
            Estimate::from_replicas(&column, stream.key())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lindley_examples() {
        assert_eq!(lindley_step(0.0, -5.0), 0.0);
        assert_eq!(lindley_step(3.0, 2.0), 5.0);
        assert_eq!(lindley_step(1.0, -1.0), 0.0);
    }

    #[test]
    fn fit_recovers_a_line() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.5).collect();
        let f = EmpiricalCdf::from_atoms(xs.iter().map(|&x| (x, 0.5)).collect());
        // F(x) = x + 0.5 at the grid points x = 0.5 k; fit on those points.
        let w = FitWindow::new(10.0, 40.0, 61).unwrap();
        let fit = asymptote_fit(&f, &w).value;
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 0.5).abs() < 1e-12);
        let (c, d) = fit_line(&[0.0, 1.0, 2.0, 5.0], &[3.0, 4.0, 5.0, 8.0]);
        assert!((c - 1.0).abs() < 1e-15 && (d - 3.0).abs() < 1e-14);
    }

    #[test]
    fn fit_window_validation() {
        assert!(FitWindow::new(3.0, 1.0, 10).is_err());
        assert!(FitWindow::new(1.0, 3.0, 1).is_err());
        let g = FitWindow::new(11.0, 31.0, 11).unwrap().grid();
        assert_eq!(g.first(), Some(&11.0));
        assert_eq!(g.last(), Some(&31.0));
        assert_eq!(g[1], 13.0);
    }

    #[test]
    fn curvature_is_flagged() {
        let f = EmpiricalCdf::from_atoms((0..200).map(|i| (i as f64 * 0.1, 0.01 * i as f64)).collect());
        let out = asymptote_fit(&f, &FitWindow::new(0.0, 19.0, 100).unwrap());
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn rademacher_renewal_is_exact() {
        // T-steps ±2: every ladder height is 2 and F(x) = ⌊x/2⌋ + 1.
        let law = DisorderLaw::rademacher(1.0).unwrap();
        let w = FitWindow::new(11.0, 31.0, 11).unwrap();
        let r = lindley_cdf_renewal(&law, LadderDirection::Ascending, 40.0, 64, &w, &SeededStream::new(3)).unwrap().value;
        assert_eq!(r.raw_slope, 0.5);
        assert!((r.fit.slope - 1.0).abs() < 1e-12);
        assert!((r.fit.ratio - 1.0).abs() < 1e-12);
        assert!((r.cdf.eval(0.0) - 2.0).abs() < 1e-12);
        // Before rescaling only H_0 = 0 is counted at 0.
        assert!((r.cdf.eval(0.0) * r.raw_slope - 1.0).abs() < 1e-12);
        assert_eq!(r.intercept.stderr, 0.0);
    }

    #[test]
    fn patched_measure_shape() {
        let f = EmpiricalCdf::from_atoms((0..100).map(|i| (0.3 * i as f64, 0.3)).collect());
        let gamma = 8.0;
        let p = patched_measure(&f, &f, gamma).unwrap();
        assert!((p.eval(0.0) - 0.5).abs() < 1e-15);
        assert_eq!(p.eval(-gamma - 1e-9), 0.0);
        assert!(p.eval(-gamma) > 0.0);
        assert_eq!(p.eval(gamma + 1e-9), 1.0);
        assert!((p.measure().total_mass() - 1.0).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..=4000 {
            let x = -gamma - 1.0 + i as f64 * (2.0 * gamma + 2.0) / 4000.0;
            let v = p.eval(x);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!(patched_measure(&EmpiricalCdf::default(), &EmpiricalCdf::default(), 1.0).is_err());
    }

    #[test]
    fn point_mass_functional() {
        // ν = δ_Γ: M_Γ[ν] = E[(−z − 2Γ)⁺].
        let gamma = 1.5;
        for law in [
            DisorderLaw::gaussian(1.0).unwrap(),
            DisorderLaw::laplace(0.8).unwrap(),
            DisorderLaw::uniform(4.0).unwrap(),
            DisorderLaw::logistic_sech(),
            DisorderLaw::rademacher(2.0).unwrap(),
        ] {
            let nu = EmpiricalCdf::point_mass(gamma);
            let exact = m_gamma_exact(&nu, &law, gamma);
            let want = 2.0 * law.excess_mean(gamma);
            assert!((exact - want).abs() < 1e-15, "{law}");
            let q = m_gamma_functional(&nu, &law, gamma);
            assert!((q.value - want).abs() < 1e-9, "{law}: {} vs {want}", q.value);
        }
    }

    #[test]
    fn quadrature_and_closed_form_agree_on_many_atoms() {
        let nu = EmpiricalCdf::from_atoms((0..300).map(|i| (-3.0 + 0.05 * i as f64, 0.01 + 0.001 * (i % 7) as f64)).collect());
        for law in [DisorderLaw::gaussian(0.7).unwrap(), DisorderLaw::rademacher(1.0).unwrap(), DisorderLaw::logistic_sech()] {
            for gamma in [0.0, 1.0, 4.0] {
                let q = m_gamma_functional(&nu, &law, gamma);
                let e = m_gamma_exact(&nu, &law, gamma);
                assert!((q.value - e).abs() < 1e-8 + q.abs_error, "{law} Γ={gamma}");
            }
        }
    }

    #[test]
    fn kappa_one_of_the_simple_walk() {
        // ν◁ has weight 2 on 0, 2, 4, …; only x = 0 contributes E[(−z)⁺] = 1.
        let nu = EmpiricalCdf::from_atoms((0..30).map(|k| (2.0 * k as f64, 2.0)).collect());
        let law = DisorderLaw::rademacher(1.0).unwrap();
        assert_eq!(kappa_hat_one(&nu, &law), 1.0);
    }

    #[test]
    fn occupation_of_the_simple_walk_is_uniform() {
        let law = DisorderLaw::rademacher(1.0).unwrap();
        let grid = [0.0, 2.0, 4.0, 6.0];
        let occ = lindley_occupation(&law, LadderDirection::Ascending, &grid, 6.0, 400_000, 8, &SeededStream::new(5)).unwrap();
        for (i, e) in occ.iter().enumerate() {
            let want = (i + 1) as f64 / 4.0;
            assert!((e.mean - want).abs() < 4.0 * e.stderr + 1e-3, "{i}: {e}");
        }
        assert_eq!(occ[3].mean, 1.0);
    }
}
