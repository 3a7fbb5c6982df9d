//! Statistical properties of Γ-extrema, the X-chain and the renewal
//! quantities, on gaussian(1) fields unless stated otherwise.

use rfic_core::extrema::{decompose, sample_environment_functionals, sample_stretch_pairs};
use rfic_core::maxenergy::coupled_x_chains;
use rfic_core::renewal::{kappa_tilde, lindley_cdf_renewal, FitWindow, LadderDirection};
use rfic_core::stats::RunningMoments;
use rfic_core::{sample_increments, DisorderLaw, SeededStream, WalkPath};

fn gaussian() -> DisorderLaw {
    DisorderLaw::gaussian(1.0).unwrap()
}

fn moments(values: impl Iterator<Item = f64>) -> RunningMoments {
    let mut m = RunningMoments::default();
    values.for_each(|v| m.push(v));
    m
}

#[test]
fn stretch_scaling_trends_toward_brownian_limits() {
    let mut height = Vec::new();
    let mut length = Vec::new();
    for (i, gamma) in [4.0, 8.0, 16.0].into_iter().enumerate() {
        let pools = sample_stretch_pairs(&gaussian(), gamma, 20_000, SeededStream::new(31).split(i as u64));
        let all = || pools.descending.iter().chain(&pools.ascending);
        let h = moments(all().map(|s| s.height / gamma));
        let l = moments(all().map(|s| s.length as f64 / (gamma * gamma)));
        height.push((h.mean(), h.stderr()));
        length.push((l.mean(), l.stderr()));
    }
    for (series, limit) in [(&height, 2.0), (&length, 1.0)] {
        for w in series.windows(2) {
            let (a, b) = (w[0], w[1]);
            let slack = 3.0 * (a.1 * a.1 + b.1 * b.1).sqrt();
            assert!(
                (b.0 - limit).abs() <= (a.0 - limit).abs() + slack,
                "not moving toward {limit}: {series:?}"
            );
        }
        assert!((series[2].0 - limit).abs() < 0.2 * limit, "{series:?}");
    }
}

#[test]
fn consecutive_stretch_heights_are_uncorrelated() {
    let k = 20_000;
    let pools = sample_stretch_pairs(&gaussian(), 6.0, k + 1, SeededStream::new(41));
    for pool in [&pools.descending, &pools.ascending] {
        let x: Vec<f64> = pool.iter().map(|s| s.height).collect();
        let (a, b) = (&x[..k], &x[1..=k]);
        let (ma, mb) = (moments(a.iter().copied()), moments(b.iter().copied()));
        let cov = a.iter().zip(b).map(|(p, q)| (p - ma.mean()) * (q - mb.mean())).sum::<f64>() / k as f64;
        let corr = cov / (ma.variance() * mb.variance()).sqrt();
        assert!(corr.abs() < 4.0 / (k as f64).sqrt(), "correlation {corr}");
    }
}

#[test]
fn first_extremum_time_has_a_light_tail() {
    let gamma = 4.0;
    let mut s = SeededStream::new(51);
    let mut t1: Vec<usize> = (0..2000)
        .filter_map(|_| {
            let h = sample_increments(&gaussian(), &mut s, 4000);
            decompose(&WalkPath::from_increments(&h), gamma).t().first().copied()
        })
        .collect();
    assert!(t1.len() > 1990, "t_1 missing in {} walks", 2000 - t1.len());
    t1.sort_unstable();
    let median = t1[t1.len() / 2];
    let survival = t1.iter().filter(|&&t| t > 2 * median).count() as f64 / t1.len() as f64;
    assert!(survival < 0.6, "P[t_1 > 2·median] = {survival}");
}

#[test]
fn coupled_chains_contract_on_the_gamma_squared_scale() {
    let j = 2.0;
    let scale = (2.0 * j) * (2.0 * j);
    let (n1, n4) = (scale as usize, 4 * scale as usize);
    let mut s = SeededStream::new(61);
    let (mut d1, mut d4) = (0.0, 0.0);
    for _ in 0..4000 {
        let h = sample_increments(&gaussian(), &mut s, n4);
        let pairs = coupled_x_chains(&h, j, 2.0 * j, -2.0 * j);
        d1 += pairs[n1].0 - pairs[n1].1;
        d4 += pairs[n4].0 - pairs[n4].1;
    }
    assert!(d4 < 0.5 * d1, "distance {d1} at Γ²/ϑ², {d4} at 4Γ²/ϑ² (sums)");
}

#[test]
fn renewal_cdf_is_monotone_with_unit_slope() {
    for (i, law) in [gaussian(), DisorderLaw::uniform(1.0).unwrap()].iter().enumerate() {
        let window = FitWindow::for_law(law);
        for dir in [LadderDirection::Ascending, LadderDirection::Descending] {
            let r = lindley_cdf_renewal(law, dir, window.hi, 4096, &window, &SeededStream::new(71 + i as u64))
                .unwrap()
                .value;
            assert!((r.fit.slope - 1.0).abs() < 1e-6, "slope {}", r.fit.slope);
            let grid: Vec<f64> = (0..=2000).map(|k| r.x_max * k as f64 / 2000.0).collect();
            let values: Vec<f64> = grid.iter().map(|&x| r.cdf.eval(x)).collect();
            assert!(values.windows(2).all(|w| w[0] <= w[1]));
            assert!(values[0] >= 0.0);
        }
    }
}

#[test]
fn environment_functionals_are_nonnegative_and_settle() {
    for (inner, full) in sample_environment_functionals(&gaussian(), 6.0, 3000, SeededStream::new(81)) {
        assert!(inner >= 0.0 && full >= inner, "inner {inner}, full {full}");
    }
    let k = kappa_tilde(&gaussian(), &[4.0, 8.0, 16.0], 8000, &SeededStream::new(82)).unwrap().value;
    for pick in [|t: &rfic_core::renewal::KappaTilde| t.inner, |t: &rfic_core::renewal::KappaTilde| t.full] {
        let v: Vec<_> = k.iter().map(pick).collect();
        let (first, second) = (v[1].minus(&v[0]), v[2].minus(&v[1]));
        assert!(
            second.mean.abs() < first.mean.abs() + 2.0 * second.stderr,
            "differences {first} then {second}"
        );
    }
}
