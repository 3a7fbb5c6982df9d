//! Replica statistics: the `Estimate` record and the small reductions used to
//! build one.

use serde::{Deserialize, Serialize};

/// Mean with a standard error, the number of samples it was computed from and
/// the key of the random stream that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl Estimate {
    /// A deterministic value (no sampling error).
    pub fn exact(value: f64, seed: u64) -> Self {
        Self {
            mean: value,
            stderr: 0.0,
            n_samples: 1,
            seed,
        }
    }

    /// Between-replica mean and standard error, reduced in index order.
    pub fn from_replicas(values: &[f64], seed: u64) -> Self {
        let mut acc = RunningMoments::default();
        for &v in values {
            acc.push(v);
        }
        Self {
            mean: acc.mean(),
            stderr: acc.stderr(),
            n_samples: acc.count(),
            seed,
        }
    }

    pub fn combined_stderr(&self, other: &Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    /// |difference| in units of the combined standard error. Infinite when
    /// both are exact and differ, zero when both are exact and equal.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let diff = (self.mean - other.mean).abs();
        let se = self.combined_stderr(other);
        if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `a - b` for independent estimates.
    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate {
            mean: self.mean - other.mean,
            stderr: self.combined_stderr(other),
            n_samples: self.n_samples.min(other.n_samples),
            seed: self.seed,
        }
    }

    /// First-order propagation through a smooth map with derivative `slope`.
    pub fn map(&self, value: f64, slope: f64) -> Estimate {
        Estimate {
            mean: value,
            stderr: (slope * self.stderr).abs(),
            ..*self
        }
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let prec = f.precision().unwrap_or(6);
        write!(f, "{:.*} ± {:.*}", prec, self.mean, prec, self.stderr)
    }
}

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count > 1 {
            (self.variance() / self.count as f64).sqrt()
        } else {
            0.0
        }
    }
}

/// Ratio of two sample means with its first-order (delta method) standard
/// error, using the empirical covariance of the paired samples.
pub fn ratio_of_means(numerators: &[f64], denominators: &[f64]) -> (f64, f64) {
    assert_eq!(numerators.len(), denominators.len());
    let n = numerators.len();
    assert!(n > 0, "ratio of empty samples");
    let nf = n as f64;
    let mx = numerators.iter().sum::<f64>() / nf;
    let my = denominators.iter().sum::<f64>() / nf;
    let ratio = mx / my;
    if n < 2 {
        return (ratio, 0.0);
    }
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in numerators.iter().zip(denominators) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (vxx, vyy, vxy) = (sxx / (nf - 1.0), syy / (nf - 1.0), sxy / (nf - 1.0));
    let var = (vxx - 2.0 * ratio * vxy + ratio * ratio * vyy) / (my * my * nf);
    (ratio, var.max(0.0).sqrt())
}

/// A value together with the non-fatal diagnostics raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> Outcome<T> {
    pub fn clean(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }
}
