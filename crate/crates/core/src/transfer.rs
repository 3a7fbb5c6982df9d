//! Partition function of the chain as a product of 2×2 transfer matrices.
//!
//! `Z^{gd} = (Q T_{h_1} Q T_{h_2} ⋯ T_{h_N} Q)_{gd}` with `Q = [[1, e^{-2J}],
//! [e^{-2J}, 1]]` and `T_x = diag(e^x, e^{-x})`. Long products are carried as
//! a renormalized row vector (max entry 1) plus a log scale, so both `Z^{g+}`
//! and `Z^{g-}` come out of one pass.

use crate::disorder::DisorderLaw;
use crate::error::{check_coupling, invalid, Error, Result};
use crate::model::{configuration_energies, BoundaryCondition, Spin, ENUMERATION_CAP};
use crate::rng::SeededStream;
use crate::stats::Estimate;
use crate::{per_replica, BLOCK};

/// Positive 2×2 matrix stored as `exp(log_scale) * entries`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    entries: [[f64; 2]; 2],
    log_scale: f64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        Self {
            entries: [[1.0, 0.0], [0.0, 1.0]],
            log_scale: 0.0,
        }
    }

    /// The coupling matrix `Q_J`.
    pub fn coupling(j: f64) -> Self {
        let eps = (-2.0 * j).exp();
        Self {
            entries: [[1.0, eps], [eps, 1.0]],
            log_scale: 0.0,
        }
    }

    /// `M = T_h Q_J`, entries `(e^h, e^{-2J+h}; e^{-2J-h}, e^{-h})`, stored
    /// divided by `e^{|h|}`.
    pub fn step_matrix(h: f64, j: f64) -> Self {
        let eps = (-2.0 * j).exp();
        let r = (-2.0 * h.abs()).exp();
        let (top, bottom) = if h >= 0.0 { (1.0, r) } else { (r, 1.0) };
        Self {
            entries: [[top, top * eps], [bottom * eps, bottom]],
            log_scale: h.abs(),
        }
    }

    /// Stored entry, without the scale.
    pub fn entry(&self, row: Spin, col: Spin) -> f64 {
        self.entries[row.index()][col.index()]
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn log_entry(&self, row: Spin, col: Spin) -> f64 {
        self.log_scale + self.entry(row, col).ln()
    }

    /// Divide by the largest entry and move its log into the scale.
    pub fn renormalize(&mut self) {
        let m = self.entries.iter().flatten().fold(0.0_f64, |a, &b| a.max(b));
        if m > 0.0 {
            for e in self.entries.iter_mut().flatten() {
                *e /= m;
            }
            self.log_scale += m.ln();
        }
    }

    /// Renormalized product `self · rhs`.
    pub fn mul(&self, rhs: &TransferMatrix) -> TransferMatrix {
        let a = &self.entries;
        let b = &rhs.entries;
        let mut entries = [[0.0; 2]; 2];
        for (i, row) in entries.iter_mut().enumerate() {
            for (k, e) in row.iter_mut().enumerate() {
                *e = a[i][0] * b[0][k] + a[i][1] * b[1][k];
            }
        }
        let mut out = TransferMatrix {
            entries,
            log_scale: self.log_scale + rhs.log_scale,
        };
        out.renormalize();
        out
    }
}

/// The full product `Q T_{h_1} Q ⋯ T_{h_N} Q`, renormalized at every step.
/// Slower than [`log_partition`] but gives all four boundary conditions.
pub fn complete_product(h: &[f64], j: f64) -> Result<TransferMatrix> {
    check_coupling(j)?;
    if h.is_empty() {
        return Err(invalid("N", "the chain needs at least one site"));
    }
    let mut acc = TransferMatrix::coupling(j);
    for &x in h {
        acc = acc.mul(&TransferMatrix::step_matrix(x, j));
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPartition {
    pub value: f64,
    pub n: usize,
    pub j: f64,
    pub bc: BoundaryCondition,
}

// Below this the linear representation risks losing the smaller component.
const TINY: f64 = 1e-250;

/// Streaming form of the row vector `e_g^T Q T_{h_1} Q ⋯ T_{h_n} Q`.
///
/// In the linear representation the vector is kept with max entry exactly 1;
/// the dropped scale goes into `mantissa`, which is flushed into `log_scale`
/// whenever it leaves `[1e-150, 1e150]` so that only a handful of logarithms
/// are taken per million steps. Couplings with `2J > 500`, or a component
/// that would sink below `1e-250`, switch to a log-domain recursion.
#[derive(Debug, Clone)]
pub struct PartitionAccumulator {
    j: f64,
    eps: f64,
    v: [f64; 2],
    mantissa: f64,
    log_scale: f64,
    log_domain: bool,
    steps: u64,
}

impl PartitionAccumulator {
    pub fn new(j: f64, g: Spin) -> Self {
        let eps = (-2.0 * j).exp();
        let mut acc = Self {
            j,
            eps,
            v: [1.0, eps],
            mantissa: 1.0,
            log_scale: 0.0,
            log_domain: false,
            steps: 0,
        };
        if g == Spin::Minus {
            acc.v = [eps, 1.0];
        }
        if 2.0 * j > 500.0 {
            acc.v = if g == Spin::Plus {
                [0.0, -2.0 * j]
            } else {
                [-2.0 * j, 0.0]
            };
            acc.log_domain = true;
        }
        acc
    }

    #[cfg(test)]
    pub(crate) fn force_log_domain(&mut self) {
        if !self.log_domain {
            self.v = [self.v[0].ln(), self.v[1].ln()];
            self.log_scale += self.mantissa.ln();
            self.mantissa = 1.0;
            self.log_domain = true;
        }
    }

    #[inline]
    pub fn push(&mut self, h: f64) {
        self.steps += 1;
        if self.log_domain {
            let two_j = 2.0 * self.j;
            let [a, b] = self.v;
            self.v = [
                log_add(a + h, b - h - two_j),
                log_add(a + h - two_j, b - h),
            ];
            return;
        }
        let ah = h.abs();
        let r = (-2.0 * ah).exp();
        let (a, b) = if h >= 0.0 {
            (self.v[0], self.v[1] * r)
        } else {
            (self.v[0] * r, self.v[1])
        };
        let n0 = a + self.eps * b;
        let n1 = self.eps * a + b;
        let m = n0.max(n1);
        self.v = [n0 / m, n1 / m];
        self.log_scale += ah;
        self.mantissa *= m;
        if !(1e-150..=1e150).contains(&self.mantissa) {
            self.log_scale += self.mantissa.ln();
            self.mantissa = 1.0;
        }
        if self.v[0].min(self.v[1]) < TINY {
            self.v = [self.v[0].ln(), self.v[1].ln()];
            self.log_scale += self.mantissa.ln();
            self.mantissa = 1.0;
            self.log_domain = true;
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Current renormalized vector; `None` once in the log domain.
    pub fn normalized_state(&self) -> Option<[f64; 2]> {
        (!self.log_domain).then_some(self.v)
    }

    /// Accumulated log scale (finite by construction).
    pub fn log_scale(&self) -> f64 {
        self.log_scale + self.mantissa.ln()
    }

    /// `log Z^{g d}` for the field pushed so far.
    pub fn log_z(&self, d: Spin) -> f64 {
        let comp = self.v[d.index()];
        if self.log_domain {
            self.log_scale + comp
        } else {
            self.log_scale + self.mantissa.ln() + comp.ln()
        }
    }
}

#[inline]
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn check_chain(h: &[f64], j: f64) -> Result<()> {
    check_coupling(j)?;
    if h.is_empty() {
        return Err(invalid("N", "the chain needs at least one site"));
    }
    if let Some(x) = h.iter().find(|x| !x.is_finite()) {
        return Err(invalid("h", format!("field values must be finite, got {x}")));
    }
    Ok(())
}

pub fn log_partition(h: &[f64], j: f64, bc: BoundaryCondition) -> Result<LogPartition> {
    check_chain(h, j)?;
    let mut acc = PartitionAccumulator::new(j, bc.g);
    for &x in h {
        acc.push(x);
    }
    Ok(LogPartition {
        value: acc.log_z(bc.d),
        n: h.len(),
        j,
        bc,
    })
}

/// Log-sum-exp of the Hamiltonian over all `2^N` configurations.
pub fn brute_force_log_partition(h: &[f64], j: f64, bc: BoundaryCondition) -> Result<LogPartition> {
    if h.len() > ENUMERATION_CAP {
        return Err(Error::TooLarge {
            what: "chain",
            got: h.len(),
            max: ENUMERATION_CAP,
        });
    }
    check_chain(h, j)?;
    let energies = configuration_energies(h, j, bc);
    let top = energies.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let sum: f64 = energies.iter().map(|&e| (e - top).exp()).sum();
    Ok(LogPartition {
        value: top + sum.ln(),
        n: h.len(),
        j,
        bc,
    })
}

pub(crate) fn check_replica_budget(n: u64, min_n: u64, replicas: usize) -> Result<()> {
    if n < min_n {
        return Err(invalid("N", format!("need N >= {min_n}, got {n}")));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "need at least one replica"));
    }
    Ok(())
}

/// `(1/N) log Z^{gd}` for one realization drawn from `stream`.
pub fn free_energy_sample(
    law: &DisorderLaw,
    j: f64,
    n: u64,
    bc: BoundaryCondition,
    mut stream: SeededStream,
) -> f64 {
    let mut acc = PartitionAccumulator::new(j, bc.g);
    let mut block = vec![0.0; BLOCK];
    let mut left = n;
    while left > 0 {
        let take = left.min(BLOCK as u64) as usize;
        law.fill(&mut stream, &mut block[..take]);
        for &x in &block[..take] {
            acc.push(x);
        }
        left -= take as u64;
    }
    acc.log_z(bc.d) / n as f64
}

/// Free energy density with boundary condition `bc`; replica `r` uses
/// `stream.split(r)`.
pub fn free_energy_estimate_bc(
    law: &DisorderLaw,
    j: f64,
    n: u64,
    replicas: usize,
    bc: BoundaryCondition,
    stream: &SeededStream,
) -> Result<Estimate> {
    check_coupling(j)?;
    check_replica_budget(n, 1000, replicas)?;
    let values = per_replica(replicas, |r| free_energy_sample(law, j, n, bc, stream.split(r)));
    Ok(Estimate::from_replicas(&values, stream.key()))
}

/// Free energy density `F(J)` from `replicas` chains of length `N` with
/// boundary condition `++`.
pub fn free_energy_estimate(
    law: &DisorderLaw,
    j: f64,
    n: u64,
    replicas: usize,
    stream: &SeededStream,
) -> Result<Estimate> {
    free_energy_estimate_bc(law, j, n, replicas, BoundaryCondition::PLUS_PLUS, stream)
}
