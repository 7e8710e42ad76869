//! Alignment, ramp removal, downsampling and binning against brute-force oracles.

use fanwatch_core::preprocess::{
    bin, bin_range, downsample, forward_fill_align, remove_ascends, stride_for, BinConfig, FeatureKind, FeatureSet,
};
use fanwatch_core::synth::{generate_run, ImpellerProfile, ScheduleConfig};
use fanwatch_core::{AlignedTable, Channel, Impeller, RawRecording, Segment};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(columns: Vec<Vec<f64>>, target: Vec<f64>) -> AlignedTable {
    let n = target.len();
    let names = (0..columns.len()).map(|c| format!("c{c}")).collect();
    AlignedTable::new(
        100.0,
        (0..n).map(|i| i as f64 / 100.0).collect(),
        names,
        columns,
        target,
        vec![Segment::Plateau(0); n],
    )
    .unwrap()
}

fn random_table(rng: &mut ChaCha8Rng, n: usize, channels: usize) -> AlignedTable {
    let columns = (0..channels).map(|_| (0..n).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    table(columns, (0..n).map(|_| rng.random_range(0.0..3000.0)).collect())
}

fn all_features() -> FeatureSet {
    "all".parse().unwrap()
}

/// Bin statistics recomputed by sorting each window.
fn oracle_bin(xs: &[f64]) -> [f64; 5] {
    let n = xs.len() as f64;
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / n;
    let m2 = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    let m4 = s.iter().map(|x| (x - mean).powi(4)).sum::<f64>();
    let k = s.len();
    let median = if k % 2 == 1 { s[k / 2] } else { (s[k / 2 - 1] + s[k / 2]) / 2.0 };
    let kurt = if m2 == 0.0 { 0.0 } else { (m4 / n) / (m2 / n).powi(2) - 3.0 };
    [mean, (m2 / (n - 1.0)).sqrt(), s[k - 1] - s[0], median, kurt]
}

#[test]
fn bins_match_windowed_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for size in [2, 3, 7, 50] {
        let t = random_table(&mut rng, 523, 3);
        let ds = bin(&t, &BinConfig::new(size, all_features()).unwrap()).unwrap();
        assert_eq!(ds.len(), 523 / size);
        let kinds = [FeatureKind::Mean, FeatureKind::Std, FeatureKind::Range, FeatureKind::Median, FeatureKind::Kurtosis];
        for b in 0..ds.len() {
            let rows = b * size..(b + 1) * size;
            for (c, col) in t.columns().iter().enumerate() {
                let want = oracle_bin(&col[rows.clone()]);
                for (k, kind) in kinds.iter().enumerate() {
                    let j = ds.column_names().iter().position(|n| *n == format!("c{c}_{}", kind.name())).unwrap();
                    let got = ds.features().get(b, j);
                    assert!((got - want[k]).abs() <= 1e-12 * want[k].abs().max(1.0), "bin {b} c{c} {kind:?}: {got} vs {}", want[k]);
                }
            }
            let mean_rpm = t.target()[rows].iter().sum::<f64>() / size as f64;
            assert!((ds.target()[b] - mean_rpm).abs() <= 1e-12 * mean_rpm.abs().max(1.0));
            assert_eq!(ds.provenance()[b], b);
        }
    }
}

#[test]
fn remove_ascends_keeps_exactly_plateau_rows() {
    let schedule = ScheduleConfig { plateau_s: 1.5, ramp_s: 0.4, ..Default::default() };
    let rec = generate_run(&schedule, &ImpellerProfile::default(), Impeller::Healthy, 3).unwrap();
    let aligned = forward_fill_align(&rec).unwrap();
    let kept = remove_ascends(&aligned).unwrap();
    // plateau k covers [k (P + R), k (P + R) + P) seconds
    let cycle = schedule.plateau_s + schedule.ramp_s;
    let expected = (0..schedule.sample_count(schedule.gyro_rate_hz))
        .filter(|&i| {
            let t = i as f64 / schedule.gyro_rate_hz;
            let k = (t / cycle).floor();
            k >= 8.0 || t - k * cycle < schedule.plateau_s
        })
        .count();
    assert_eq!(kept.len(), expected);
    assert_eq!(expected, 9 * 1500);
    assert!(kept.segments().iter().all(|s| *s != Segment::Ramp));
    let ts = kept.timestamps_s();
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
}

fn channel(name: &str, rate: f64, t0: f64, samples: Vec<f64>) -> Channel {
    Channel::new(name, rate, t0, samples).unwrap()
}

#[test]
fn forward_fill_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let fast = rng.random_range(50.0..500.0f64).round();
        let slow = (fast / rng.random_range(2..12) as f64).max(1.0);
        let n = rng.random_range(20..400);
        let t0 = rng.random_range(0..5) as f64 / fast;
        let rpm_t0 = rng.random_range(0.0..0.2);
        let m = rng.random_range(1..60);
        let gyro: Vec<Channel> = (0..3)
            .map(|c| channel(&format!("g{c}"), fast, t0, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let rpm_samples: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3000.0)).collect();
        let rpm = channel("rpm", slow, rpm_t0, rpm_samples.clone());
        let schedule = ScheduleConfig { plateau_s: 1000.0, ..Default::default() };
        let rec = RawRecording::new(gyro.clone(), rpm, schedule, Impeller::Healthy, 0).unwrap();
        let out = match forward_fill_align(&rec) {
            Ok(t) => t,
            Err(_) => {
                // only when no gyro sample follows the first rpm sample
                assert!((0..n).all(|i| t0 + i as f64 / fast < rpm_t0));
                continue;
            }
        };
        let mut row = 0;
        for i in 0..n {
            let t = t0 + i as f64 / fast;
            let last = (0..m).filter(|&j| rpm_t0 + j as f64 / slow <= t).last();
            let Some(j) = last else { continue };
            assert_eq!(out.timestamps_s()[row], t);
            assert_eq!(out.target()[row], rpm_samples[j]);
            for (c, ch) in gyro.iter().enumerate() {
                assert_eq!(out.columns()[c][row], ch.samples()[i]);
            }
            row += 1;
        }
        assert_eq!(row, out.len());
    }
}

fn table_strategy() -> impl Strategy<Value = AlignedTable> {
    (1usize..4, 1usize..300).prop_flat_map(|(c, n)| {
        (prop::collection::vec(prop::collection::vec(-1e3f64..1e3, n), c), prop::collection::vec(0.0f64..3000.0, n))
            .prop_map(|(cols, target)| table(cols, target))
    })
}

proptest! {
    #[test]
    fn unit_mean_bins_reproduce_input(t in table_strategy()) {
        let ds = bin(&t, &BinConfig::new(1, FeatureSet::new([FeatureKind::Mean]).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(ds.target(), t.target());
        for (c, col) in t.columns().iter().enumerate() {
            prop_assert_eq!(&ds.features().column(c).collect::<Vec<_>>(), col);
        }
    }

    #[test]
    fn stride_composition(t in table_strategy(), f1 in prop::sample::select(vec![1.0, 0.5, 0.25, 0.1, 0.2]), f2 in prop::sample::select(vec![1.0, 0.5, 1.0 / 3.0, 0.125])) {
        let ds = t.to_dataset();
        let twice = downsample(&downsample(&ds, f1).unwrap(), f2).unwrap();
        let k = stride_for(f1).unwrap() * stride_for(f2).unwrap();
        let once = downsample(&ds, 1.0 / k as f64).unwrap();
        prop_assert_eq!(stride_for(1.0 / k as f64).unwrap(), k);
        prop_assert_eq!(twice.provenance(), once.provenance());
        prop_assert_eq!(twice.target(), once.target());
        prop_assert_eq!(twice.features(), once.features());
    }

    #[test]
    fn bin_feature_bounds(t in table_strategy(), size in 2usize..40) {
        prop_assume!(t.len() >= size);
        let ds = bin(&t, &BinConfig::new(size, all_features()).unwrap()).unwrap();
        let per = all_features().len();
        for b in 0..ds.len() {
            for (c, col) in t.columns().iter().enumerate() {
                let w = &col[b * size..(b + 1) * size];
                let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let f = |k: usize| ds.features().get(b, c * per + k);
                let (mean, std, range, median) = (f(0), f(1), f(2), f(3));
                prop_assert!(lo <= median && median <= hi);
                prop_assert!(range >= 0.0 && std >= 0.0);
                prop_assert!(lo - 1e-9 <= mean && mean <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn binning_does_not_leak_across_a_boundary(a in 1usize..6, b in 1usize..6, size in 2usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng, (a + b) * size, 2);
        let cfg = BinConfig::new(size, all_features()).unwrap();
        let whole = bin(&t, &cfg).unwrap();
        let first = bin_range(&t, 0..a * size, &cfg, 0).unwrap();
        let second = bin_range(&t, a * size..(a + b) * size, &cfg, a).unwrap();
        let joined = fanwatch_core::Dataset::concat(&[first, second]).unwrap();
        prop_assert_eq!(whole, joined);
    }
}
