//! Spins, boundary conditions and the chain Hamiltonian
//! `H(σ) = -2J · #{n ∈ [0, N] : σ_n ≠ σ_{n+1}} + Σ h_n σ_n` with `σ_0 = g`,
//! `σ_{N+1} = d`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Spin {
    pub fn value(self) -> f64 {
        match self {
            Spin::Plus => 1.0,
            Spin::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }

    /// Row/column index in a transfer matrix: `+` is 0, `-` is 1.
    pub fn index(self) -> usize {
        match self {
            Spin::Plus => 0,
            Spin::Minus => 1,
        }
    }

    fn symbol(self) -> char {
        match self {
            Spin::Plus => '+',
            Spin::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub g: Spin,
    pub d: Spin,
}

impl BoundaryCondition {
    pub const PLUS_PLUS: Self = Self::new(Spin::Plus, Spin::Plus);
    pub const PLUS_MINUS: Self = Self::new(Spin::Plus, Spin::Minus);
    pub const MINUS_PLUS: Self = Self::new(Spin::Minus, Spin::Plus);
    pub const MINUS_MINUS: Self = Self::new(Spin::Minus, Spin::Minus);
    pub const ALL: [Self; 4] = [
        Self::PLUS_PLUS,
        Self::PLUS_MINUS,
        Self::MINUS_PLUS,
        Self::MINUS_MINUS,
    ];

    pub const fn new(g: Spin, d: Spin) -> Self {
        Self { g, d }
    }

    /// Global spin flip: `(g, d) -> (-g, -d)`.
    pub fn flipped(self) -> Self {
        Self::new(self.g.flipped(), self.d.flipped())
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.g.symbol(), self.d.symbol())
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let spin = |c| match c {
            '+' => Ok(Spin::Plus),
            '-' => Ok(Spin::Minus),
            _ => Err(invalid("boundary condition", format!("`{s}` is not one of ++, +-, -+, --"))),
        };
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 2 {
            return Err(invalid("boundary condition", format!("`{s}` is not one of ++, +-, -+, --")));
        }
        Ok(Self::new(spin(chars[0])?, spin(chars[1])?))
    }
}

/// Energy of a configuration; `spins.len()` must equal `h.len()`.
pub fn hamiltonian(h: &[f64], j: f64, bc: BoundaryCondition, spins: &[Spin]) -> f64 {
    assert_eq!(h.len(), spins.len(), "configuration length must match the field");
    let mut walls = 0usize;
    let mut prev = bc.g;
    let mut field = 0.0;
    for (&hn, &s) in h.iter().zip(spins) {
        if s != prev {
            walls += 1;
        }
        field += hn * s.value();
        prev = s;
    }
    if prev != bc.d {
        walls += 1;
    }
    field - 2.0 * j * walls as f64
}

/// Largest chain the exhaustive enumerations accept.
pub const ENUMERATION_CAP: usize = 20;

/// Configuration `mask`: bit `i` set means `σ_{i+1} = -1`.
pub fn spins_from_mask(mask: u32, n: usize) -> Vec<Spin> {
    (0..n)
        .map(|i| if mask >> i & 1 == 1 { Spin::Minus } else { Spin::Plus })
        .collect()
}

/// Energies of all `2^N` configurations, indexed by mask.
///
/// The field part is split into two lookup tables over the low and high bits,
/// so each energy is two table reads plus a wall count and carries only a few
/// roundings regardless of `N`.
pub(crate) fn configuration_energies(h: &[f64], j: f64, bc: BoundaryCondition) -> Vec<f64> {
    let n = h.len();
    debug_assert!((1..=ENUMERATION_CAP).contains(&n));
    let low_bits = n.min(10);
    let high_bits = n - low_bits;
    let field_table = |offset: usize, bits: usize| -> Vec<f64> {
        (0..1u32 << bits)
            .map(|m| {
                (0..bits)
                    .map(|i| {
                        let hn = h[offset + i];
                        if m >> i & 1 == 1 {
                            -hn
                        } else {
                            hn
                        }
                    })
                    .sum()
            })
            .collect()
    };
    let low = field_table(0, low_bits);
    let high = field_table(low_bits, high_bits);
    let inner_mask: u32 = if n > 1 { (1u32 << (n - 1)) - 1 } else { 0 };
    let left_minus = bc.g == Spin::Minus;
    let right_minus = bc.d == Spin::Minus;
    let low_mask = (1u32 << low_bits) - 1;
    (0..1u32 << n)
        .map(|mask| {
            let mut walls = ((mask ^ (mask >> 1)) & inner_mask).count_ones();
            if (mask & 1 == 1) != left_minus {
                walls += 1;
            }
            if (mask >> (n - 1) & 1 == 1) != right_minus {
                walls += 1;
            }
            let field = low[(mask & low_mask) as usize] + high[(mask >> low_bits) as usize];
            field - 2.0 * j * walls as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Spin::{Minus as M, Plus as P};

    #[test]
    fn table_energies_match_direct_evaluation() {
        let h = [0.3, -1.1, 0.25, 2.0, -0.7, 0.05, 1.3, -0.2, 0.9, -1.4, 0.6, 0.1];
        for bc in BoundaryCondition::ALL {
            let table = configuration_energies(&h, 0.8, bc);
            for (mask, &e) in table.iter().enumerate() {
                let direct = hamiltonian(&h, 0.8, bc, &spins_from_mask(mask as u32, h.len()));
                assert!((e - direct).abs() < 1e-13);
            }
        }
        let single = configuration_energies(&[0.4], 1.0, BoundaryCondition::PLUS_MINUS);
        assert_eq!(single.len(), 2);
        assert!((single[0] - (0.4 - 2.0)).abs() < 1e-15);
        assert!((single[1] - (-0.4 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn energies_of_the_two_site_fixture() {
        // h = (0.5, -0.3), J = 1, bc = ++: {0.2, -3.2, -4.8, -4.2}
        let h = [0.5, -0.3];
        let bc = BoundaryCondition::PLUS_PLUS;
        let e = |s: [Spin; 2]| hamiltonian(&h, 1.0, bc, &s);
        assert!((e([P, P]) - 0.2).abs() < 1e-15);
        assert!((e([P, M]) + 3.2).abs() < 1e-15);
        assert!((e([M, P]) + 4.8).abs() < 1e-15);
        assert!((e([M, M]) + 4.2).abs() < 1e-15);
    }

    #[test]
    fn boundary_condition_parsing() {
        for bc in BoundaryCondition::ALL {
            assert_eq!(bc.to_string().parse::<BoundaryCondition>().unwrap(), bc);
        }
        assert!("+".parse::<BoundaryCondition>().is_err());
        assert!("+x".parse::<BoundaryCondition>().is_err());
    }

    #[test]
    fn flip_symmetry_of_the_hamiltonian() {
        let h = [0.3, -1.1, 0.25, 2.0];
        let spins = [P, M, M, P];
        let flipped: Vec<Spin> = spins.iter().map(|s| s.flipped()).collect();
        let neg: Vec<f64> = h.iter().map(|x| -x).collect();
        for bc in BoundaryCondition::ALL {
            let a = hamiltonian(&h, 0.7, bc, &spins);
            let b = hamiltonian(&neg, 0.7, bc.flipped(), &flipped);
            assert_eq!(a, b);
        }
    }
}
