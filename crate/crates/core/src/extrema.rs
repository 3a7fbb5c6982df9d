//! Γ-extrema of a walk, the stretches between them, and the environment seen
//! from a Γ-minimum.
//!
//! Starting from `t_0 = 0` the walk first looks for a drawdown of size `Γ`:
//! `t_{j+1}` is the first `n > t_j` where the drawdown (j even) or drawup
//! (j odd) from the running extremum over `[t_j, n]` reaches `Γ`. The extremum
//! itself sits at `u_{j+1}` (first location) and `u⁺_{j+1}` (last location) in
//! `[t_j, t_{j+1}]`. Odd indices are maxima, even indices minima.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::disorder::{DisorderLaw, WalkPath};
use crate::error::{check_coupling, invalid, Error, Result};
use crate::rng::SeededStream;
use crate::stats::Estimate;
use crate::{per_replica, BLOCK};

/// One Γ-extremum, as emitted by [`Decomposer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    /// 1-based index; odd for maxima.
    pub k: usize,
    pub t: usize,
    pub u: usize,
    pub u_plus: usize,
    pub s_u: f64,
}

impl Extremum {
    pub fn is_max(&self) -> bool {
        self.k % 2 == 1
    }
}

/// Single-pass detector fed one walk value at a time.
#[derive(Debug, Clone)]
pub struct Decomposer {
    gamma: f64,
    next_index: usize,
    found: usize,
    ext: f64,
    first: usize,
    last: usize,
}

impl Decomposer {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            next_index: 0,
            found: 0,
            ext: 0.0,
            first: 0,
            last: 0,
        }
    }

    /// Number of values consumed.
    pub fn len(&self) -> usize {
        self.next_index
    }

    pub fn is_empty(&self) -> bool {
        self.next_index == 0
    }

    #[inline]
    pub fn push(&mut self, value: f64) -> Option<Extremum> {
        let n = self.next_index;
        self.next_index += 1;
        if n == 0 {
            self.ext = value;
            return None;
        }
        let seeking_max = self.found.is_multiple_of(2);
        let further = if seeking_max { value > self.ext } else { value < self.ext };
        if further {
            self.ext = value;
            self.first = n;
            self.last = n;
            return None;
        }
        if value == self.ext {
            self.last = n;
            return None;
        }
        let excursion = if seeking_max { self.ext - value } else { value - self.ext };
        if excursion < self.gamma {
            return None;
        }
        self.found += 1;
        let out = Extremum {
            k: self.found,
            t: n,
            u: self.first,
            u_plus: self.last,
            s_u: self.ext,
        };
        self.ext = value;
        self.first = n;
        self.last = n;
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaDecomposition {
    gamma: f64,
    len: usize,
    t: Vec<usize>,
    u: Vec<usize>,
    u_plus: Vec<usize>,
    s_u: Vec<f64>,
}

impl GammaDecomposition {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `t_1, t_2, …`
    pub fn t(&self) -> &[usize] {
        &self.t
    }

    pub fn u(&self) -> &[usize] {
        &self.u
    }

    pub fn u_plus(&self) -> &[usize] {
        &self.u_plus
    }

    /// Walk values at the extrema, `S[u_k]`.
    pub fn s_u(&self) -> &[f64] {
        &self.s_u
    }

    /// Number of increments of the decomposed walk.
    pub fn n_steps(&self) -> usize {
        self.len.saturating_sub(1)
    }

    /// At least one maximum and one minimum were found.
    pub fn is_complete(&self) -> bool {
        self.t.len() >= 2
    }

    /// Full (maximum, minimum) periods.
    pub fn periods(&self) -> usize {
        self.t.len() / 2
    }

    /// The decomposition of the same walk cut at `t_{2K}`.
    pub fn truncated(&self, periods: usize) -> Result<Self> {
        let m = 2 * periods;
        if periods == 0 || m > self.t.len() {
            return Err(Error::Decomposition(format!(
                "asked for {periods} periods, only {} available",
                self.periods()
            )));
        }
        Ok(Self {
            gamma: self.gamma,
            len: self.t[m - 1] + 1,
            t: self.t[..m].to_vec(),
            u: self.u[..m].to_vec(),
            u_plus: self.u_plus[..m].to_vec(),
            s_u: self.s_u[..m].to_vec(),
        })
    }

    /// CSV with columns `k,t,u,u_plus,S_u`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["k", "t", "u", "u_plus", "S_u"]).map_err(ser)?;
        for i in 0..self.t.len() {
            w.write_record([
                (i + 1).to_string(),
                self.t[i].to_string(),
                self.u[i].to_string(),
                self.u_plus[i].to_string(),
                self.s_u[i].to_string(),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

pub fn decompose(walk: &WalkPath, gamma: f64) -> GammaDecomposition {
    let mut d = Decomposer::new(gamma);
    let mut out = GammaDecomposition {
        gamma,
        len: walk.len(),
        t: Vec::new(),
        u: Vec::new(),
        u_plus: Vec::new(),
        s_u: Vec::new(),
    };
    for &v in walk.values() {
        if let Some(e) = d.push(v) {
            out.t.push(e.t);
            out.u.push(e.u);
            out.u_plus.push(e.u_plus);
            out.s_u.push(e.s_u);
        }
    }
    out
}

/// Walk values `S_0 = 0, S_1, …` generated block by block.
pub(crate) struct WalkStream<'a> {
    law: &'a DisorderLaw,
    stream: SeededStream,
    block: Vec<f64>,
    pos: usize,
    s: f64,
    started: bool,
}

impl<'a> WalkStream<'a> {
    pub(crate) fn new(law: &'a DisorderLaw, stream: SeededStream) -> Self {
        Self {
            law,
            stream,
            block: vec![0.0; BLOCK],
            pos: BLOCK,
            s: 0.0,
            started: false,
        }
    }

    #[inline]
    pub(crate) fn next_value(&mut self) -> f64 {
        if !self.started {
            self.started = true;
            return 0.0;
        }
        if self.pos == BLOCK {
            self.law.fill(&mut self.stream, &mut self.block);
            self.pos = 0;
        }
        self.s += self.block[self.pos];
        self.pos += 1;
        self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Descending,
    Ascending,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchSample {
    pub direction: Direction,
    pub height: f64,
    pub length: usize,
}

/// Stretches split by direction; samples within a pool are i.i.d.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StretchPools {
    pub descending: Vec<StretchSample>,
    pub ascending: Vec<StretchSample>,
}

fn stretch_between(a: (usize, f64), b: (usize, f64), from_max: bool) -> StretchSample {
    StretchSample {
        direction: if from_max {
            Direction::Descending
        } else {
            Direction::Ascending
        },
        height: (b.1 - a.1).abs(),
        length: b.0 - a.0,
    }
}

/// Stretches `u_k → u_{k+1}` for every pair of consecutive extrema.
pub fn stretch_samples(decomp: &GammaDecomposition) -> Result<StretchPools> {
    if decomp.u.len() < 2 {
        return Err(Error::Decomposition(
            "need at least two Γ-extrema for a stretch".into(),
        ));
    }
    let mut pools = StretchPools::default();
    for k in 0..decomp.u.len() - 1 {
        let s = stretch_between(
            (decomp.u[k], decomp.s_u[k]),
            (decomp.u[k + 1], decomp.s_u[k + 1]),
            k % 2 == 0,
        );
        match s.direction {
            Direction::Descending => pools.descending.push(s),
            Direction::Ascending => pools.ascending.push(s),
        }
    }
    Ok(pools)
}

/// `pairs` descending and `pairs` ascending stretches from one fresh walk:
/// `u_{2k-1} → u_{2k}` and `u_{2k} → u_{2k+1}` for `k = 1..=pairs`.
pub fn sample_stretch_pairs(
    law: &DisorderLaw,
    gamma: f64,
    pairs: usize,
    stream: SeededStream,
) -> StretchPools {
    let mut walk = WalkStream::new(law, stream);
    let mut d = Decomposer::new(gamma);
    let mut pools = StretchPools {
        descending: Vec::with_capacity(pairs),
        ascending: Vec::with_capacity(pairs),
    };
    let mut prev: Option<Extremum> = None;
    while pools.ascending.len() < pairs {
        if let Some(e) = d.push(walk.next_value()) {
            if let Some(p) = prev {
                let s = stretch_between((p.u, p.s_u), (e.u, e.s_u), p.is_max());
                match s.direction {
                    Direction::Descending => pools.descending.push(s),
                    Direction::Ascending => pools.ascending.push(s),
                }
            }
            prev = Some(e);
        }
    }
    pools
}

/// `(Σ (H↓ + H↑) − 2ΓK) / Σ (L↓ + L↑)`.
pub fn stretch_ratio(pools: &StretchPools, gamma: f64) -> f64 {
    let k = pools.descending.len().min(pools.ascending.len());
    let pairs = pools.descending[..k].iter().zip(&pools.ascending[..k]);
    let (h, l) = pairs.fold((0.0, 0usize), |(h, l), (a, b)| {
        (h + a.height + b.height, l + a.length + b.length)
    });
    (h - 2.0 * gamma * k as f64) / l as f64
}

/// `M(J) = (E[H↓ + H↑] − 2Γ) / E[L↓ + L↑]` at `Γ = 2J`, one ratio per replica.
pub fn stretch_max_energy(
    law: &DisorderLaw,
    j: f64,
    pairs: usize,
    replicas: usize,
    stream: &SeededStream,
) -> Result<Estimate> {
    check_coupling(j)?;
    if pairs < 100 {
        return Err(invalid("K", format!("need at least 100 stretch pairs, got {pairs}")));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "need at least one replica"));
    }
    let gamma = 2.0 * j;
    let values = per_replica(replicas, |r| {
        stretch_ratio(&sample_stretch_pairs(law, gamma, pairs, stream.split(r)), gamma)
    });
    Ok(Estimate::from_replicas(&values, stream.key()))
}

/// The recentered walk around a Γ-minimum `u_k`, on offsets
/// `u_{k-1} - u_k ..= u⁺_{k+1} - u_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    start: i64,
    values: Vec<f64>,
    tau_minus: i64,
    tau_plus: i64,
    right_truncated: bool,
}

impl Environment {
    /// `values[i]` sits at offset `start + i`; the offset-0 value must be the
    /// minimum 0.
    pub fn from_values(start: i64, values: Vec<f64>, gamma: f64, right_truncated: bool) -> Result<Self> {
        let zero = usize::try_from(-start)
            .ok()
            .filter(|&z| z < values.len())
            .ok_or_else(|| invalid("environment", "offset 0 must lie in the range"))?;
        let half = gamma / 2.0;
        let left = (0..=zero).rev().find(|&i| values[i] >= half);
        let right = (zero..values.len()).find(|&i| values[i] >= half);
        let (Some(l), Some(r)) = (left, right) else {
            return Err(invalid("environment", "the walk never climbs Γ/2 on both sides"));
        };
        Ok(Self {
            start,
            tau_minus: start + l as i64,
            tau_plus: start + r as i64,
            values,
            right_truncated,
        })
    }

    /// First offset, `u_{k-1} - u_k`.
    pub fn start(&self) -> i64 {
        self.start
    }

    /// Last offset.
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, offset: i64) -> Option<f64> {
        usize::try_from(offset - self.start)
            .ok()
            .and_then(|i| self.values.get(i).copied())
    }

    pub fn tau_minus(&self) -> i64 {
        self.tau_minus
    }

    pub fn tau_plus(&self) -> i64 {
        self.tau_plus
    }

    /// The right end fell back to `t_k` because `u⁺_{k+1}` was not available.
    pub fn right_truncated(&self) -> bool {
        self.right_truncated
    }

    /// `log Σ_{τ⁻ < n < τ⁺} e^{-2 S(n)}`.
    pub fn log_sum_inner(&self) -> f64 {
        let lo = (self.tau_minus - self.start + 1) as usize;
        let hi = (self.tau_plus - self.start) as usize;
        log_sum_neg2(&self.values[lo..hi])
    }

    /// `log Σ e^{-2 S(n)}` over the whole range.
    pub fn log_sum_full(&self) -> f64 {
        log_sum_neg2(&self.values)
    }
}

// Every value is >= 0 and one is exactly 0, so the sum is in [1, len].
fn log_sum_neg2(values: &[f64]) -> f64 {
    values.iter().map(|&v| (-2.0 * v).exp()).sum::<f64>().ln()
}

/// Environment around the minimum `u_k` (`k` even, 1-based). Falls back to
/// `t_k` on the right when `u⁺_{k+1}` is not in the decomposition.
pub fn environment_around_minimum(
    walk: &WalkPath,
    decomp: &GammaDecomposition,
    k: usize,
) -> Result<Environment> {
    if k == 0 || !k.is_multiple_of(2) {
        return Err(invalid(
            "k",
            format!("{k} is not a minimum index; maxima are handled by negating the walk"),
        ));
    }
    if k > decomp.u.len() {
        return Err(Error::Decomposition(format!(
            "minimum {k} not found, only {} extrema",
            decomp.u.len()
        )));
    }
    let left = decomp.u[k - 2];
    let center = decomp.u[k - 1];
    let (right, truncated) = match decomp.u_plus.get(k) {
        Some(&r) => (r, false),
        None => (decomp.t[k - 1], true),
    };
    if right >= walk.len() {
        return Err(Error::Decomposition("walk shorter than its decomposition".into()));
    }
    let base = walk[center];
    let values = walk.values()[left..=right].iter().map(|&v| v - base).collect();
    Environment::from_values(left as i64 - center as i64, values, decomp.gamma, truncated)
}

/// Both environment functionals `(inner, full)` for `count` successive
/// Γ-minima of one fresh walk. Only the stretch in progress is buffered.
pub fn sample_environment_functionals(
    law: &DisorderLaw,
    gamma: f64,
    count: usize,
    stream: SeededStream,
) -> Vec<(f64, f64)> {
    let mut walk = WalkStream::new(law, stream);
    let mut d = Decomposer::new(gamma);
    let mut buffer: Vec<f64> = Vec::new();
    let mut base = 0usize;
    let mut extrema: Vec<Extremum> = Vec::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = walk.next_value();
        buffer.push(v);
        let Some(e) = d.push(v) else { continue };
        if e.is_max() && extrema.len() >= 2 {
            let n = extrema.len();
            let (left, center) = (extrema[n - 2], extrema[n - 1]);
            let slice = &buffer[left.u - base..=e.u_plus - base];
            let values = slice.iter().map(|&s| s - center.s_u).collect();
            let env = Environment::from_values(
                left.u as i64 - center.u as i64,
                values,
                gamma,
                false,
            )
            .expect("Γ-extrema bound the environment");
            out.push((env.log_sum_inner(), env.log_sum_full()));
        }
        // The next environment starts at the extremum before `e` at the earliest.
        if let Some(p) = extrema.last() {
            buffer.drain(..p.u - base);
            base = p.u;
        }
        extrema.push(e);
        if extrema.len() > 2 {
            extrema.remove(0);
        }
    }
    out
}
