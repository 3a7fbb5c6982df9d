//! Exact bounds between boundary conditions and long-run stability of the
//! transfer recursion.

use rfic_core::maxenergy::{brute_force_max, max_energy};
use rfic_core::transfer::{brute_force_log_partition, log_partition, PartitionAccumulator};
use rfic_core::{sample_increments, BoundaryCondition, DisorderLaw, SeededStream, Spin};

const PP: BoundaryCondition = BoundaryCondition::PLUS_PLUS;

fn fields(seed: u64, n: usize) -> Vec<f64> {
    let law = DisorderLaw::gaussian(1.0).unwrap();
    sample_increments(&law, &mut SeededStream::new(seed), n)
}

#[test]
fn hundred_million_steps_stay_normalized() {
    let law = DisorderLaw::gaussian(1.0).unwrap();
    let mut s = SeededStream::new(8);
    let mut acc = PartitionAccumulator::new(3.0, Spin::Plus);
    let mut block = vec![0.0; 1 << 16];
    let mut worst = (1.0f64, 0.0f64);
    for _ in 0..(100_000_000 / block.len() + 1) {
        law.fill(&mut s, &mut block);
        for &h in &block {
            acc.push(h);
            let v = acc.normalized_state().expect("gaussian field never needs the log domain");
            worst = (worst.0.min(v[0].min(v[1])), worst.1.max(v[0].max(v[1])));
        }
    }
    assert!(acc.steps() >= 100_000_000);
    assert!(worst.0 > 0.0 && worst.1 <= 1.0, "entries left (0, 1]: {worst:?}");
    let f = acc.log_z(Spin::Plus) / acc.steps() as f64;
    assert!(acc.log_scale().is_finite() && f.is_finite());
    // 2J·F approaches ϑ² = 1 from below at strong coupling.
    assert!(6.0 * f > 0.9 && 6.0 * f < 1.0, "F(3) = {f}");
}

#[test]
fn boundary_conditions_cost_at_most_4j() {
    for seed in 0..200u64 {
        let n = 1 + (seed % 14) as usize;
        let j = 0.25 + (seed % 7) as f64 * 0.5;
        let h = fields(seed, n);
        let zpp = brute_force_log_partition(&h, j, PP).unwrap().value;
        let mpp = brute_force_max(&h, j, PP).unwrap().0;
        for bc in BoundaryCondition::ALL {
            let z = brute_force_log_partition(&h, j, bc).unwrap().value;
            let m = brute_force_max(&h, j, bc).unwrap().0;
            assert!((z - zpp).abs() <= 4.0 * j + 1e-12, "log Z {bc:?}: {z} vs {zpp}");
            assert!((m - mpp).abs() <= 4.0 * j + 1e-12, "max energy {bc:?}: {m} vs {mpp}");
        }
    }
}

#[test]
fn max_energy_is_superadditive_up_to_4j() {
    for seed in 0..200u64 {
        let j = 0.5 + (seed % 4) as f64;
        let h = fields(500 + seed, 2 + (seed % 15) as usize);
        let cut = 1 + (seed as usize % (h.len() - 1));
        let whole = brute_force_max(&h, j, PP).unwrap().0;
        let left = brute_force_max(&h[..cut], j, PP).unwrap().0;
        let right = brute_force_max(&h[cut..], j, PP).unwrap().0;
        assert!(whole >= left - 4.0 * j + right - 1e-12, "seed {seed}");
        assert!((max_energy(&h, j, PP).unwrap() - whole).abs() < 1e-12);
    }
}

#[test]
fn raising_the_first_field_raises_log_z() {
    for seed in 0..100u64 {
        let j = 0.5 + (seed % 3) as f64;
        let mut h = fields(900 + seed, 2 + (seed % 10) as usize);
        h[0] = h[0].abs();
        let base = log_partition(&h, j, PP).unwrap().value;
        h[0] += 1e-3;
        let bumped = log_partition(&h, j, PP).unwrap().value;
        assert!(bumped > base, "seed {seed}: {bumped} <= {base}");
    }
}
