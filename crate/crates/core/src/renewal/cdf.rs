//! Weighted step-function CDFs (possibly of infinite measures, cut at some
//! level) and the Wasserstein-1 distance between them.

use serde::{Deserialize, Serialize};

/// `F(x) = Σ_{x_i ≤ x} w_i`, right-continuous. Atoms at equal positions are
/// merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    points: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EmpiricalCdf {
    /// Every sample carries weight `weight`.
    pub fn from_samples(mut values: Vec<f64>, weight: f64) -> Self {
        values.sort_by(f64::total_cmp);
        let mut points = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for v in values {
            if points.last() == Some(&v) {
                *counts.last_mut().unwrap() += 1;
            } else {
                points.push(v);
                counts.push(1);
            }
        }
        let mut total = 0u64;
        let cumulative = counts
            .iter()
            .map(|&c| {
                total += c;
                total as f64 * weight
            })
            .collect();
        Self { points, cumulative }
    }

    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::new();
        let mut cumulative: Vec<f64> = Vec::new();
        let mut total = 0.0;
        for (x, w) in atoms {
            total += w;
            if points.last() == Some(&x) {
                *cumulative.last_mut().unwrap() = total;
            } else {
                points.push(x);
                cumulative.push(total);
            }
        }
        Self { points, cumulative }
    }

    pub fn point_mass(x: f64) -> Self {
        Self::from_atoms(vec![(x, 1.0)])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.points.partition_point(|&p| p <= x);
        if i == 0 {
            0.0
        } else {
            self.cumulative[i - 1]
        }
    }

    /// Left limit `F(x⁻)`.
    pub fn eval_left(&self, x: f64) -> f64 {
        let i = self.points.partition_point(|&p| p < x);
        if i == 0 {
            0.0
        } else {
            self.cumulative[i - 1]
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distinct atom positions, increasing.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `(position, weight)` pairs.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().enumerate().map(move |(i, &x)| {
            let below = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
            (x, self.cumulative[i] - below)
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.clone(),
            cumulative: self.cumulative.iter().map(|c| c * factor).collect(),
        }
    }

    /// `(x, F(x))` on a grid, for export.
    pub fn tabulate(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        grid.iter().map(|&x| (x, self.eval(x))).collect()
    }
}

/// `∫ |F_a − F_b| dx`, integrated exactly between breakpoints. Finite only
/// when both measures have the same total mass.
pub fn wasserstein_1(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let mut xs: Vec<f64> = a.points().iter().chain(b.points()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2)
        .map(|w| (a.eval(w[0]) - b.eval(w[0])).abs() * (w[1] - w[0]))
        .sum()
}
