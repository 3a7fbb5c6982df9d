//! Disorder laws for the external field and the walk built from them.
//!
//! Every law in the registry is centered, symmetric and has finite variance.
//! `rademacher` is kept as an exact test vector even though it has no density
//! (and no density after any finite convolution), so the second-order
//! expansion constants are not guaranteed to describe it.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::SeededStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisorderLaw {
    Gaussian { sigma: f64 },
    Rademacher { a: f64 },
    Laplace { b: f64 },
    Uniform { a: f64 },
    /// Density `1 / (2 cosh(x/2))^2`, i.e. the standard logistic law.
    LogisticSech,
}

fn positive(value: f64, law: &str, symbol: &str, name: &str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::LawSpec {
            spec: format!("{law}:{value}"),
            reason: format!("{name} must be finite and {symbol} > 0"),
        })
    }
}

impl DisorderLaw {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        Ok(Self::Gaussian {
            sigma: positive(sigma, "gaussian", "σ", "standard deviation")?,
        })
    }

    pub fn rademacher(a: f64) -> Result<Self> {
        Ok(Self::Rademacher {
            a: positive(a, "rademacher", "a", "amplitude")?,
        })
    }

    pub fn laplace(b: f64) -> Result<Self> {
        Ok(Self::Laplace {
            b: positive(b, "laplace", "b", "scale")?,
        })
    }

    pub fn uniform(a: f64) -> Result<Self> {
        Ok(Self::Uniform {
            a: positive(a, "uniform", "a", "half-width")?,
        })
    }

    pub fn logistic_sech() -> Self {
        Self::LogisticSech
    }

    /// Short family name.
    pub fn family(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Rademacher { .. } => "rademacher",
            Self::Laplace { .. } => "laplace",
            Self::Uniform { .. } => "uniform",
            Self::LogisticSech => "logistic_sech",
        }
    }

    /// Filesystem-friendly tag, e.g. `gaussian-1`.
    pub fn file_tag(&self) -> String {
        self.to_string().replace(':', "-")
    }

    /// Exact variance ϑ².
    pub fn variance(&self) -> f64 {
        match *self {
            Self::Gaussian { sigma } => sigma * sigma,
            Self::Rademacher { a } => a * a,
            Self::Laplace { b } => 2.0 * b * b,
            Self::Uniform { a } => a * a / 3.0,
            Self::LogisticSech => PI * PI / 3.0,
        }
    }

    /// Whether the law has a density, which the second-order expansion needs.
    pub fn has_density(&self) -> bool {
        !matches!(self, Self::Rademacher { .. })
    }

    #[inline]
    pub fn sample(&self, rng: &mut SeededStream) -> f64 {
        match *self {
            Self::Gaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            Self::Rademacher { a } => {
                if rng.next_word() >> 63 == 1 {
                    a
                } else {
                    -a
                }
            }
            Self::Laplace { b } => {
                let sign = rng.next_word() >> 63;
                let e: f64 = rng.sample(Exp1);
                if sign == 1 {
                    b * e
                } else {
                    -b * e
                }
            }
            Self::Uniform { a } => a * (2.0 * rng.next_unit() - 1.0),
            Self::LogisticSech => {
                let u = rng.next_open_unit();
                (u / (1.0 - u)).ln()
            }
        }
    }

    pub fn fill(&self, rng: &mut SeededStream, out: &mut [f64]) {
        for slot in out {
            *slot = self.sample(rng);
        }
    }

    /// Cumulative distribution function P[h ≤ x].
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { sigma } => 0.5 * erfc(-x / (sigma * SQRT_2)),
            Self::Rademacher { a } => {
                if x < -a {
                    0.0
                } else if x < a {
                    0.5
                } else {
                    1.0
                }
            }
            Self::Laplace { b } => {
                if x < 0.0 {
                    0.5 * (x / b).exp()
                } else {
                    1.0 - 0.5 * (-x / b).exp()
                }
            }
            Self::Uniform { a } => ((x + a) / (2.0 * a)).clamp(0.0, 1.0),
            Self::LogisticSech => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Excess mean E[(h - t)⁺] = ∫_t^∞ P[h > y] dy.
    pub fn excess_mean(&self, t: f64) -> f64 {
        match *self {
            Self::Gaussian { sigma } => {
                let u = t / sigma;
                let pdf = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
                let tail = 0.5 * erfc(u / SQRT_2);
                (sigma * pdf - t * tail).max(0.0)
            }
            Self::Rademacher { a } => 0.5 * (a - t).max(0.0) + 0.5 * (-a - t).max(0.0),
            Self::Laplace { b } => {
                if t >= 0.0 {
                    0.5 * b * (-t / b).exp()
                } else {
                    -t + 0.5 * b * (t / b).exp()
                }
            }
            Self::Uniform { a } => {
                if t >= a {
                    0.0
                } else if t <= -a {
                    -t
                } else {
                    (a - t) * (a - t) / (4.0 * a)
                }
            }
            Self::LogisticSech => softplus(-t),
        }
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl fmt::Display for DisorderLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            Self::Rademacher { a } => write!(f, "rademacher:{a}"),
            Self::Laplace { b } => write!(f, "laplace:{b}"),
            Self::Uniform { a } => write!(f, "uniform:{a}"),
            Self::LogisticSech => write!(f, "logistic_sech"),
        }
    }
}

/// Grammar: `gaussian:σ`, `rademacher:a`, `laplace:b`, `uniform:a`,
/// `logistic_sech`. Case-sensitive.
impl FromStr for DisorderLaw {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let bad = |reason: &str| Error::LawSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (family, param) = match spec.split_once(':') {
            Some((f, p)) => (f, Some(p)),
            None => (spec, None),
        };
        if family == "logistic_sech" {
            return match param {
                None => Ok(Self::LogisticSech),
                Some(_) => Err(bad("logistic_sech takes no parameter")),
            };
        }
        let param = param.ok_or_else(|| bad("missing `:parameter`"))?;
        let value: f64 = param
            .parse()
            .map_err(|_| bad("parameter is not a number"))?;
        let law = match family {
            "gaussian" => Self::gaussian(value),
            "rademacher" => Self::rademacher(value),
            "laplace" => Self::laplace(value),
            "uniform" => Self::uniform(value),
            _ => {
                return Err(bad(
                    "unknown family (expected gaussian, rademacher, laplace, uniform or logistic_sech)",
                ))
            }
        };
        law.map_err(|e| match e {
            Error::LawSpec { reason, .. } => bad(&reason),
            other => other,
        })
    }
}

/// `n` independent draws from `law`.
pub fn sample_increments(law: &DisorderLaw, stream: &mut SeededStream, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    law.fill(stream, &mut out);
    out
}

/// Prefix sums of the field: `S_0 = 0`, `S_n = h_1 + … + h_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    values: Vec<f64>,
}

impl WalkPath {
    pub fn from_increments(h: &[f64]) -> Self {
        let mut values = Vec::with_capacity(h.len() + 1);
        let mut s = 0.0;
        values.push(s);
        for &x in h {
            s += x;
            values.push(s);
        }
        Self { values }
    }

    /// Wraps precomputed walk values. The first value is taken as `S_0`.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of points, i.e. number of increments plus one.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

impl std::ops::Index<usize> for WalkPath {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RunningMoments;
    use proptest::prelude::*;

    fn all_laws() -> Vec<DisorderLaw> {
        vec![
            DisorderLaw::gaussian(1.3).unwrap(),
            DisorderLaw::rademacher(0.7).unwrap(),
            DisorderLaw::laplace(0.9).unwrap(),
            DisorderLaw::uniform(2.0).unwrap(),
            DisorderLaw::logistic_sech(),
        ]
    }

    /// Composite Simpson rule, test-only oracle.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn variance_examples() {
        assert_eq!(DisorderLaw::rademacher(1.0).unwrap().variance(), 1.0);
        assert_eq!(DisorderLaw::gaussian(2.0).unwrap().variance(), 4.0);
        let v = DisorderLaw::logistic_sech().variance();
        assert!((v - 3.28987).abs() < 1e-5);
    }

    #[test]
    fn logistic_variance_matches_quadrature() {
        let density = |x: f64| {
            let c = 2.0 * (x / 2.0).cosh();
            1.0 / (c * c)
        };
        let mass = simpson(density, -80.0, 80.0, 200_000);
        let second = simpson(|x| x * x * density(x), -80.0, 80.0, 200_000);
        assert!((mass - 1.0).abs() < 1e-10);
        assert!((second - DisorderLaw::logistic_sech().variance()).abs() < 1e-8);
    }

    #[test]
    fn laplace_variance_matches_quadrature() {
        let b = 1.0;
        let second = simpson(
            |x: f64| x * x * (-(x.abs()) / b).exp() / (2.0 * b),
            -80.0,
            80.0,
            400_000,
        );
        assert!((second - 2.0).abs() < 1e-8);
    }

    #[test]
    fn empty_sample() {
        let mut s = SeededStream::new(1);
        for law in all_laws() {
            assert!(sample_increments(&law, &mut s, 0).is_empty());
        }
    }

    #[test]
    fn rademacher_mean_within_clt_bound() {
        let law = DisorderLaw::rademacher(1.0).unwrap();
        let xs = sample_increments(&law, &mut SeededStream::new(3), 1_000_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 4.0 / 1000.0, "mean {mean}");
        assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn laplace_empirical_variance() {
        let law = DisorderLaw::laplace(1.0).unwrap();
        let xs = sample_increments(&law, &mut SeededStream::new(5), 1_000_000);
        let mut m = RunningMoments::default();
        xs.iter().for_each(|&x| m.push(x));
        assert!((m.variance() / 2.0 - 1.0).abs() < 0.05, "{}", m.variance());
    }

    #[test]
    fn empirical_moments_for_every_law() {
        for (i, law) in all_laws().into_iter().enumerate() {
            let xs = sample_increments(&law, &mut SeededStream::new(100 + i as u64), 400_000);
            let mut m2 = RunningMoments::default();
            let mut m4 = RunningMoments::default();
            for &x in &xs {
                m2.push(x * x);
                m4.push(x.powi(4));
            }
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let sd = law.variance().sqrt();
            assert!(mean.abs() < 5.0 * sd / (xs.len() as f64).sqrt(), "{law}: {mean}");
            assert!((m2.mean() / law.variance() - 1.0).abs() < 0.02, "{law}");
            // finite, stable fourth moment: two halves agree
            let half = xs.len() / 2;
            let q = |s: &[f64]| s.iter().map(|x| x.powi(4)).sum::<f64>() / s.len() as f64;
            let (a, b) = (q(&xs[..half]), q(&xs[half..]));
            assert!(a.is_finite() && ((a - b) / m4.mean()).abs() < 0.1, "{law}");
        }
    }

    #[test]
    fn cdf_matches_empirical_frequencies() {
        for (i, law) in all_laws().into_iter().enumerate() {
            let xs = sample_increments(&law, &mut SeededStream::new(200 + i as u64), 200_000);
            for &x in &[-1.5, -0.3, 0.0, 0.4, 2.2] {
                let freq = xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64;
                assert!((freq - law.cdf(x)).abs() < 0.006, "{law} at {x}");
            }
        }
    }

    #[test]
    fn excess_mean_matches_quadrature_of_survival() {
        for law in all_laws() {
            if matches!(law, DisorderLaw::Rademacher { .. }) {
                continue;
            }
            for &t in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
                let q = simpson(|y| 1.0 - law.cdf(y), t, 80.0, 400_000);
                assert!((q - law.excess_mean(t)).abs() < 1e-7, "{law} at {t}");
            }
        }
        let r = DisorderLaw::rademacher(1.0).unwrap();
        assert_eq!(r.excess_mean(0.0), 0.5);
        assert_eq!(r.excess_mean(-2.0), 2.0);
    }

    #[test]
    fn parse_round_trip_and_errors() {
        for law in all_laws() {
            assert_eq!(law.to_string().parse::<DisorderLaw>().unwrap(), law);
        }
        assert_eq!(
            "gaussian:1".parse::<DisorderLaw>().unwrap(),
            DisorderLaw::Gaussian { sigma: 1.0 }
        );
        let err = "gaussian:-1".parse::<DisorderLaw>().unwrap_err().to_string();
        assert!(err.contains("σ > 0"), "{err}");
        assert!("Gaussian:1".parse::<DisorderLaw>().is_err());
        assert!("laplace".parse::<DisorderLaw>().is_err());
        assert!("logistic_sech:2".parse::<DisorderLaw>().is_err());
        assert!("uniform:abc".parse::<DisorderLaw>().is_err());
        assert!("rademacher:0".parse::<DisorderLaw>().is_err());
    }

    #[test]
    fn walk_examples() {
        assert_eq!(WalkPath::from_increments(&[]).values(), &[0.0]);
        assert_eq!(
            WalkPath::from_increments(&[1.0, -1.0, 1.0]).values(),
            &[0.0, 1.0, 0.0, 1.0]
        );
        let w = WalkPath::from_increments(&[0.5, -0.3]);
        assert_eq!(w.values()[..2], [0.0, 0.5]);
        assert!((w[2] - 0.2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn sampling_is_reproducible(seed in any::<u64>(), which in 0usize..5, n in 0usize..300) {
            let law = all_laws()[which];
            let a = sample_increments(&law, &mut SeededStream::new(seed), n);
            let b = sample_increments(&law, &mut SeededStream::new(seed), n);
            prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }

        #[test]
        fn walk_differences_are_exact_on_dyadic_fields(
            steps in proptest::collection::vec(-1_000_000i64..1_000_000, 0..200)
        ) {
            // multiples of 2^-10 below 2^30 add without rounding
            let h: Vec<f64> = steps.iter().map(|&k| k as f64 / 1024.0).collect();
            let w = WalkPath::from_increments(&h);
            prop_assert_eq!(w.len(), h.len() + 1);
            for k in 1..w.len() {
                prop_assert_eq!(w[k] - w[k - 1], h[k - 1]);
            }
        }

        #[test]
        fn walk_differences_within_one_rounding(h in proptest::collection::vec(-1e3f64..1e3, 0..200)) {
            let w = WalkPath::from_increments(&h);
            for k in 1..w.len() {
                let tol = f64::EPSILON * w[k].abs().max(w[k - 1].abs());
                prop_assert!((w[k] - w[k - 1] - h[k - 1]).abs() <= tol);
            }
        }
    }
}
