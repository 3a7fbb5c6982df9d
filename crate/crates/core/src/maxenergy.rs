//! Maximal energy of the chain: the `(M⁺, M⁻)` dynamic program, the
//! `X = M⁺ − M⁻` chain and its ergodic average, and the explicit maximizer
//! built from Γ-extrema.

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderLaw;
use crate::error::{check_coupling, invalid, Error, Result};
use crate::extrema::GammaDecomposition;
use crate::model::{configuration_energies, hamiltonian, BoundaryCondition, Spin, ENUMERATION_CAP};
use crate::rng::SeededStream;
use crate::stats::{Estimate, Outcome};
use crate::transfer::check_replica_budget;
use crate::{per_replica, BLOCK};

/// Best energies of the first `n` sites with `σ_n = +` (`m_plus`) and
/// `σ_n = −` (`m_minus`), left boundary `+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    pub m_plus: f64,
    pub m_minus: f64,
}

impl EnergyState {
    pub fn initial(j: f64) -> Self {
        Self {
            m_plus: 0.0,
            m_minus: -2.0 * j,
        }
    }

    pub fn x(&self) -> f64 {
        self.m_plus - self.m_minus
    }
}

pub fn dp_step(state: EnergyState, h_next: f64, j: f64) -> EnergyState {
    let two_j = 2.0 * j;
    EnergyState {
        m_plus: (state.m_plus + h_next).max(state.m_minus - two_j - h_next),
        m_minus: (state.m_plus - two_j + h_next).max(state.m_minus - h_next),
    }
}

/// `X' = clamp(X + 2h, -Γ, Γ)` with `Γ = 2J`.
#[inline]
pub fn x_chain_step(x: f64, h_next: f64, j: f64) -> f64 {
    let gamma = 2.0 * j;
    (x + 2.0 * h_next).clamp(-gamma, gamma)
}

/// Long-run form of the DP: `M⁺` is split into an offset and a small
/// remainder, and `X` is carried directly, so nothing loses significance when
/// `M⁺` grows linearly in `n`.
#[derive(Debug, Clone)]
pub struct MaxEnergyAccumulator {
    gamma: f64,
    offset: f64,
    rest: f64,
    x: f64,
    since_flush: usize,
}

impl MaxEnergyAccumulator {
    pub fn new(j: f64) -> Self {
        Self {
            gamma: 2.0 * j,
            offset: 0.0,
            rest: 0.0,
            x: 2.0 * j,
            since_flush: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, h: f64) {
        self.rest += h.max(-self.x - self.gamma - h);
        self.x = (self.x + 2.0 * h).clamp(-self.gamma, self.gamma);
        self.since_flush += 1;
        if self.since_flush == BLOCK {
            self.offset += self.rest;
            self.rest = 0.0;
            self.since_flush = 0;
        }
    }

    pub fn m_plus(&self) -> f64 {
        self.offset + self.rest
    }

    pub fn m_minus(&self) -> f64 {
        self.m_plus() - self.x
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn value(&self, d: Spin) -> f64 {
        match d {
            Spin::Plus => self.m_plus(),
            Spin::Minus => self.m_minus(),
        }
    }
}

fn check_chain(h: &[f64], j: f64) -> Result<()> {
    check_coupling(j)?;
    if h.is_empty() {
        return Err(invalid("N", "the chain needs at least one site"));
    }
    Ok(())
}

/// `max_σ H^{gd}(σ)`. Left boundary `-` is reduced to `+` by the global flip
/// `(h, g, d) -> (-h, -g, -d)`.
pub fn max_energy(h: &[f64], j: f64, bc: BoundaryCondition) -> Result<f64> {
    check_chain(h, j)?;
    let mut acc = MaxEnergyAccumulator::new(j);
    if bc.g == Spin::Plus {
        h.iter().for_each(|&x| acc.push(x));
        Ok(acc.value(bc.d))
    } else {
        h.iter().for_each(|&x| acc.push(-x));
        Ok(acc.value(bc.d.flipped()))
    }
}

/// Spin configuration described by its walls: position `k` means
/// `σ_k ≠ σ_{k+1}`, with `σ_0 = g` and `σ_{N+1} = d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinConfig {
    n: usize,
    walls: Vec<usize>,
    bc: BoundaryCondition,
}

impl SpinConfig {
    pub fn new(n: usize, walls: Vec<usize>, bc: BoundaryCondition) -> Result<Self> {
        if walls.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("walls", "positions must be strictly increasing"));
        }
        if walls.last().is_some_and(|&w| w > n) {
            return Err(invalid("walls", format!("positions must lie in [0, {n}]")));
        }
        if (walls.len().is_multiple_of(2)) != (bc.g == bc.d) {
            return Err(invalid(
                "walls",
                format!("{} walls are incompatible with boundary condition {bc}", walls.len()),
            ));
        }
        Ok(Self { n, walls, bc })
    }

    pub fn from_spins(spins: &[Spin], bc: BoundaryCondition) -> Self {
        let mut walls = Vec::new();
        let mut prev = bc.g;
        for (k, &s) in spins.iter().enumerate() {
            if s != prev {
                walls.push(k);
            }
            prev = s;
        }
        if prev != bc.d {
            walls.push(spins.len());
        }
        Self {
            n: spins.len(),
            walls,
            bc,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn walls(&self) -> &[usize] {
        &self.walls
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn spins(&self) -> Vec<Spin> {
        let mut out = Vec::with_capacity(self.n);
        let mut current = self.bc.g;
        let mut next_wall = self.walls.iter().peekable();
        for k in 0..self.n {
            if next_wall.peek() == Some(&&k) {
                current = current.flipped();
                next_wall.next();
            }
            out.push(current);
        }
        out
    }

    pub fn energy(&self, h: &[f64], j: f64) -> f64 {
        hamiltonian(h, j, self.bc, &self.spins())
    }
}

/// Exhaustive maximum with its maximizer. Ties go to the lexicographically
/// smallest configuration with `+ < −`, so the all-plus chain wins first.
pub fn brute_force_max(h: &[f64], j: f64, bc: BoundaryCondition) -> Result<(f64, SpinConfig)> {
    if h.len() > ENUMERATION_CAP {
        return Err(Error::TooLarge {
            what: "chain",
            got: h.len(),
            max: ENUMERATION_CAP,
        });
    }
    check_chain(h, j)?;
    let energies = configuration_energies(h, j, bc);
    let mut best = 0u32;
    for (mask, &e) in energies.iter().enumerate().skip(1) {
        let mask = mask as u32;
        let top = energies[best as usize];
        // Bit i is σ_{i+1} = −; the first differing site decides the order.
        if e > top || (e == top && (mask ^ best) & (mask ^ best).wrapping_neg() & best != 0) {
            best = mask;
        }
    }
    let spins = crate::model::spins_from_mask(best, h.len());
    Ok((energies[best as usize], SpinConfig::from_spins(&spins, bc)))
}

/// The maximizer for `bc = ++` on the walk cut at `t_{2K}`: walls exactly at
/// the canonical extrema `u_1, …, u_{2K}`.
pub fn reconstruct_maximal_config(decomp: &GammaDecomposition) -> Result<SpinConfig> {
    let t = decomp.t();
    if t.is_empty() || !t.len().is_multiple_of(2) {
        return Err(Error::Decomposition(format!(
            "need an even number of Γ-extrema, found {}",
            t.len()
        )));
    }
    let end = *t.last().unwrap();
    if decomp.n_steps() != end {
        return Err(Error::Decomposition(format!(
            "walk has {} steps but should stop at t_{} = {end}",
            decomp.n_steps(),
            t.len()
        )));
    }
    SpinConfig::new(end, decomp.u().to_vec(), BoundaryCondition::PLUS_PLUS)
}

/// Mean over steps `n+1 ∈ (burn_in, N]` of the `M⁺` increment
/// `h_{n+1} + max(0, −X_n − Γ − 2h_{n+1})` along the X-chain started at `Γ`.
/// With `burn_in = 0` this is exactly `M^{++}_N / N`.
pub fn ergodic_path_average(h: &[f64], j: f64, burn_in: usize) -> f64 {
    let gamma = 2.0 * j;
    let mut x = gamma;
    let mut sum = 0.0;
    for (n, &hn) in h.iter().enumerate() {
        if n >= burn_in {
            sum += hn + (-x - gamma - 2.0 * hn).max(0.0);
        }
        x = (x + 2.0 * hn).clamp(-gamma, gamma);
    }
    sum / (h.len() - burn_in.min(h.len())) as f64
}

/// Mixing scale `Γ²/ϑ²` of the X-chain, in steps.
pub fn mixing_scale(law: &DisorderLaw, j: f64) -> f64 {
    let gamma = 2.0 * j;
    gamma * gamma / law.variance()
}

pub fn default_burn_in(law: &DisorderLaw, j: f64) -> u64 {
    10 * mixing_scale(law, j).ceil() as u64
}

/// Ergodic estimator of `M(J)`: each replica averages the `M⁺` increment
/// after `burn_in` steps (default `10⌈Γ²/ϑ²⌉`).
pub fn ergodic_max_energy(
    law: &DisorderLaw,
    j: f64,
    n: u64,
    burn_in: Option<u64>,
    replicas: usize,
    stream: &SeededStream,
) -> Result<Outcome<Estimate>> {
    check_coupling(j)?;
    check_replica_budget(n, 1000, replicas)?;
    let scale = mixing_scale(law, j);
    let burn_in = burn_in.unwrap_or_else(|| default_burn_in(law, j));
    let mut warnings = Vec::new();
    if (burn_in as f64) < scale {
        return Err(invalid(
            "burn_in",
            format!("{burn_in} is below the mixing scale Γ²/ϑ² = {scale:.1}"),
        ));
    }
    if n <= burn_in {
        return Err(invalid("N", format!("N = {n} must exceed the burn-in {burn_in}")));
    }
    if (burn_in as f64) < 8.0 * scale {
        warnings.push(format!(
            "burn-in {burn_in} is shorter than 8Γ²/ϑ² = {:.0}; expect initialization bias",
            8.0 * scale
        ));
    }
    if n < 10 * burn_in {
        warnings.push(format!("N = {n} is less than ten burn-in lengths"));
    }
    let gamma = 2.0 * j;
    let values = per_replica(replicas, |r| {
        let mut s = stream.split(r);
        let mut block = vec![0.0; BLOCK];
        let mut x = gamma;
        let mut sum = 0.0;
        let mut index = 0u64;
        while index < n {
            let take = (n - index).min(BLOCK as u64) as usize;
            law.fill(&mut s, &mut block[..take]);
            for &hn in &block[..take] {
                if index >= burn_in {
                    sum += hn + (-x - gamma - 2.0 * hn).max(0.0);
                }
                x = (x + 2.0 * hn).clamp(-gamma, gamma);
                index += 1;
            }
        }
        sum / (n - burn_in) as f64
    });
    Ok(Outcome {
        value: Estimate::from_replicas(&values, stream.key()),
        warnings,
    })
}

/// `(1/N) M^{++}_N` for one realization drawn from `stream`.
pub fn dp_max_energy_sample(law: &DisorderLaw, j: f64, n: u64, mut stream: SeededStream) -> f64 {
    let mut acc = MaxEnergyAccumulator::new(j);
    let mut block = vec![0.0; BLOCK];
    let mut left = n;
    while left > 0 {
        let take = left.min(BLOCK as u64) as usize;
        law.fill(&mut stream, &mut block[..take]);
        block[..take].iter().for_each(|&x| acc.push(x));
        left -= take as u64;
    }
    acc.m_plus() / n as f64
}

/// Per-site DP estimator of `M(J)`; replica `r` uses `stream.split(r)`, the
/// same realizations as the free energy estimator given the same stream.
pub fn dp_max_energy(
    law: &DisorderLaw,
    j: f64,
    n: u64,
    replicas: usize,
    stream: &SeededStream,
) -> Result<Estimate> {
    check_coupling(j)?;
    check_replica_budget(n, 1000, replicas)?;
    let values = per_replica(replicas, |r| dp_max_energy_sample(law, j, n, stream.split(r)));
    Ok(Estimate::from_replicas(&values, stream.key()))
}

/// Two X-chains driven by the same field from starts `x0` and `y0`; entry
/// `n` holds `(X_n, X'_n)`, entry 0 the starts.
pub fn coupled_x_chains(h: &[f64], j: f64, x0: f64, y0: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(h.len() + 1);
    let (mut x, mut y) = (x0, y0);
    out.push((x, y));
    for &hn in h {
        x = x_chain_step(x, hn, j);
        y = x_chain_step(y, hn, j);
        out.push((x, y));
    }
    out
}
