//! Bin statistics against a brute-force moment oracle.

use std::time::Instant;

use fanwatch_core::stats;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};

/// Straightforward two-pass moments over a sorted copy.
struct Oracle {
    mean: f64,
    std: f64,
    range: f64,
    median: f64,
    kurtosis: f64,
}

fn oracle(xs: &[f64]) -> Oracle {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mean = sorted.iter().sum::<f64>() / nf;
    let dev = |p: i32| sorted.iter().map(|x| (x - mean).powi(p)).sum::<f64>();
    let (m2, m4) = (dev(2), dev(4));
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    let kurtosis = if m2 == 0.0 { 0.0 } else { (m4 / nf) / (m2 / nf).powi(2) - 3.0 };
    Oracle {
        mean,
        std: (m2 / (nf - 1.0)).sqrt(),
        range: sorted[n - 1] - sorted[0],
        median,
        kurtosis,
    }
}

fn assert_rel(name: &str, got: f64, want: f64, tol: f64) {
    let scale = want.abs().max(f64::MIN_POSITIVE);
    assert!(
        (got - want).abs() <= tol * scale,
        "{name}: got {got:e}, oracle {want:e}, rel err {:e}",
        (got - want).abs() / scale
    );
}

/// Sequences from shapes whose excess kurtosis is well away from zero, so a
/// relative comparison of it is meaningful.
fn random_sequence(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(2..=5000);
    let shift = rng.random_range(-100.0..100.0);
    let scale = rng.random_range(0.01..50.0);
    match rng.random_range(0..3) {
        0 => {
            let d = Uniform::new(-1.0, 1.0).unwrap();
            (0..n).map(|_| shift + scale * d.sample(rng)).collect()
        }
        1 => {
            let d = Exp::new(1.0).unwrap();
            (0..n).map(|_| shift + scale * d.sample(rng)).collect()
        }
        _ => {
            // two-point mixture: strongly platykurtic
            let d = Normal::new(0.0, 0.05).unwrap();
            (0..n).map(|i| shift + scale * (if i % 2 == 0 { 1.0 } else { -1.0 } + d.sample(rng))).collect()
        }
    }
}

#[test]
fn hundred_random_sequences_match_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..100 {
        let xs = random_sequence(&mut rng);
        let o = oracle(&xs);
        assert_rel("mean", stats::mean(&xs).unwrap(), o.mean, 1e-12);
        assert_rel("std", stats::std(&xs).unwrap(), o.std, 1e-12);
        assert_rel("range", stats::range(&xs).unwrap(), o.range, 1e-12);
        assert_rel("median", stats::median(&xs).unwrap(), o.median, 1e-12);
        if xs.len() > 2 {
            assert_rel("kurtosis", stats::kurtosis(&xs).unwrap(), o.kurtosis, 1e-12);
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0, "took {:?}", start.elapsed());
}

#[test]
fn two_point_sequences() {
    // n = 2: excess kurtosis is exactly -2, std is |a - b| / sqrt 2
    for (a, b) in [(0.0, 1.0), (-3.5, 7.25), (1e6, 1e6 + 1.0)] {
        assert_eq!(stats::kurtosis(&[a, b]).unwrap(), -2.0);
        assert_rel("std", stats::std(&[a, b]).unwrap(), (b - a) / 2f64.sqrt(), 1e-12);
    }
}

proptest! {
    #[test]
    fn order_invariants(xs in prop::collection::vec(-1e3f64..1e3, 2..200)) {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = stats::mean(&xs).unwrap();
        let median = stats::median(&xs).unwrap();
        prop_assert!(lo <= median && median <= hi);
        prop_assert!(lo - 1e-9 <= mean && mean <= hi + 1e-9);
        prop_assert!(stats::range(&xs).unwrap() >= 0.0);
        prop_assert!(stats::std(&xs).unwrap() >= 0.0);
        prop_assert!(stats::kurtosis(&xs).unwrap() >= -2.0 - 1e-9);
    }

    #[test]
    fn median_is_permutation_invariant(mut xs in prop::collection::vec(-1e3f64..1e3, 1..100), seed in any::<u64>()) {
        let before = stats::median(&xs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..xs.len()).rev() {
            xs.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(stats::median(&xs).unwrap(), before);
    }
}
