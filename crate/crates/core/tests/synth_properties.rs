//! Generator properties checked with independent plateau statistics.

use fanwatch_core::synth::{generate_run, rpm_setpoint, ImpellerProfile, ScheduleConfig, GYRO_CHANNELS};
use fanwatch_core::{Impeller, RawRecording};
use proptest::prelude::*;

fn short_schedule() -> ScheduleConfig {
    ScheduleConfig { plateau_s: 2.0, ramp_s: 0.5, ..Default::default() }
}

/// Indices of samples at `rate` that lie inside plateau `k`.
fn plateau_samples(schedule: &ScheduleConfig, rate: f64, n: usize, k: u32) -> Vec<usize> {
    let start = f64::from(k) * (schedule.plateau_s + schedule.ramp_s);
    (0..n)
        .filter(|&i| {
            let t = i as f64 / rate;
            t >= start && t < start + schedule.plateau_s
        })
        .collect()
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn run(profile: &ImpellerProfile, impeller: Impeller, seed: u64) -> RawRecording {
    generate_run(&short_schedule(), profile, impeller, seed).unwrap()
}

#[test]
fn damaged_plateaus_vary_more_on_every_channel() {
    let healthy = ImpellerProfile::default();
    let damaged = healthy.damaged(3.0);
    let s = short_schedule();
    for seed in [1, 2, 3] {
        let h = run(&healthy, Impeller::Healthy, seed);
        let d = run(&damaged, Impeller::Damaged, seed);
        for k in 1..s.plateau_count() {
            let idx = plateau_samples(&s, s.gyro_rate_hz, h.gyro()[0].len(), k);
            for c in 0..GYRO_CHANNELS {
                let pick = |r: &RawRecording| idx.iter().map(|&i| r.gyro()[c].samples()[i]).collect::<Vec<_>>();
                let (sh, sd) = (sample_std(&pick(&h)), sample_std(&pick(&d)));
                assert!(sd > sh, "seed {seed} plateau {k} channel {c}: damaged {sd} <= healthy {sh}");
            }
        }
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    for (rank, &i) in order.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let m = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let var: f64 = ra.iter().map(|x| (x - m).powi(2)).sum();
    cov / var
}

#[test]
fn tachometer_noise_grows_with_speed() {
    let s = short_schedule();
    for seed in [1, 2, 3] {
        let rec = run(&ImpellerProfile::default(), Impeller::Healthy, seed);
        let rpm = rec.rpm();
        let (levels, variances): (Vec<f64>, Vec<f64>) = (1..s.plateau_count())
            .map(|k| {
                let idx = plateau_samples(&s, s.rpm_rate_hz, rpm.len(), k);
                let resid: Vec<f64> =
                    idx.iter().map(|&i| rpm.samples()[i] - rpm_setpoint(i as f64 / s.rpm_rate_hz, &s)).collect();
                let var = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
                (f64::from(k), var)
            })
            .unzip();
        assert_eq!(levels.len(), 8);
        let rho = spearman(&levels, &variances);
        assert!(rho > 0.0, "seed {seed}: spearman {rho}, variances {variances:?}");
    }
}

#[test]
fn setpoint_examples() {
    let s = ScheduleConfig::default();
    assert_eq!(rpm_setpoint(5.0, &s), 0.0);
    assert_eq!(rpm_setpoint(4.0 * 12.0 + 5.0, &s), 1480.0);
    // midpoint of the ramp between plateaus 7 and 8
    assert_eq!(rpm_setpoint(7.0 * 12.0 + 10.0 + 1.0, &s), 2775.0);
    assert_eq!(rpm_setpoint(1e6, &s), 2960.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shape_and_determinism(
        plateau_s in 0.2f64..1.0,
        ramp_s in 0.05f64..0.5,
        gyro_rate in prop::sample::select(vec![200.0, 500.0, 1000.0]),
        rpm_rate in prop::sample::select(vec![10.0, 50.0, 100.0]),
        seed in any::<u64>(),
    ) {
        let s = ScheduleConfig { plateau_s, ramp_s, gyro_rate_hz: gyro_rate, rpm_rate_hz: rpm_rate, ..Default::default() };
        let p = ImpellerProfile::default();
        let a = generate_run(&s, &p, Impeller::Healthy, seed).unwrap();
        prop_assert_eq!(a.gyro().len(), GYRO_CHANNELS);
        for ch in a.gyro() {
            prop_assert_eq!(ch.rate_hz(), gyro_rate);
            prop_assert_eq!(ch.len(), s.sample_count(gyro_rate));
            prop_assert!(ch.samples().iter().all(|v| v.is_finite()));
        }
        prop_assert_eq!(a.rpm().rate_hz(), rpm_rate);
        prop_assert_eq!(a.rpm().len(), s.sample_count(rpm_rate));
        let b = generate_run(&s, &p, Impeller::Healthy, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
