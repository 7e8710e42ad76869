//! Deterministic synthetic test runs.
//!
//! The fan follows a staircase schedule: constant-speed plateaus separated
//! by linear ramps. Each gyro channel carries a once-per-revolution term, a
//! blade-pass term at twelve times the rotation frequency and Gaussian noise
//! whose spread grows with speed. The once-per-revolution term rides on a
//! per-channel offset proportional to its amplitude, so bin means follow the
//! speed. Impeller damage scales the harmonic amplitudes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Channel, Impeller, RawRecording, Segment, RPM_CHANNEL};
use crate::rng::{substream, Stream};

/// Number of gyro channels: four sensors, acceleration and rotation, three axes.
pub const GYRO_CHANNELS: usize = 24;

/// Blades on the impeller; sets the blade-pass harmonic order.
pub const BLADE_COUNT: f64 = 12.0;

/// Largest number of samples [`generate_run`] produces.
pub const DEFAULT_SAMPLE_BUDGET: u64 = 50_000_000;

/// Gyro channel names `g<sensor>_<acc|rot>_<x|y|z>` in file order.
pub fn gyro_channel_names() -> Vec<String> {
    let mut names = Vec::with_capacity(GYRO_CHANNELS);
    for sensor in 1..=4 {
        for kind in ["acc", "rot"] {
            for axis in ["x", "y", "z"] {
                names.push(format!("g{sensor}_{kind}_{axis}"));
            }
        }
    }
    names
}

/// Staircase test routine: plateau `k` runs at `k * rpm_step` for
/// `plateau_s`, then a ramp of `ramp_s` leads to plateau `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub rpm_step: f64,
    pub rpm_max: f64,
    pub plateau_s: f64,
    pub ramp_s: f64,
    pub gyro_rate_hz: f64,
    pub rpm_rate_hz: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            rpm_step: 370.0,
            rpm_max: 2960.0,
            plateau_s: 10.0,
            ramp_s: 2.0,
            gyro_rate_hz: 1000.0,
            rpm_rate_hz: 100.0,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("schedule.{name} must be positive, got {v}")))
            }
        };
        positive("rpm_step", self.rpm_step)?;
        positive("rpm_max", self.rpm_max)?;
        positive("plateau_s", self.plateau_s)?;
        positive("ramp_s", self.ramp_s)?;
        positive("gyro_rate_hz", self.gyro_rate_hz)?;
        positive("rpm_rate_hz", self.rpm_rate_hz)?;
        let steps = self.rpm_max / self.rpm_step;
        if libm::fabs(steps - libm::round(steps)) > 1e-9 * steps {
            return Err(Error::InvalidConfig(format!(
                "schedule.rpm_max ({}) must be a multiple of rpm_step ({})",
                self.rpm_max, self.rpm_step
            )));
        }
        if self.gyro_rate_hz <= self.rpm_rate_hz {
            return Err(Error::InvalidConfig("schedule.gyro_rate_hz must exceed rpm_rate_hz".into()));
        }
        Ok(())
    }

    /// Number of plateaus including the zero-speed one.
    pub fn plateau_count(&self) -> u32 {
        libm::round(self.rpm_max / self.rpm_step) as u32 + 1
    }

    fn cycle_s(&self) -> f64 {
        self.plateau_s + self.ramp_s
    }

    pub fn duration_s(&self) -> f64 {
        let n = f64::from(self.plateau_count());
        n * self.plateau_s + (n - 1.0) * self.ramp_s
    }

    /// Time at which plateau `k` ends and the ramp towards `k + 1` begins.
    pub fn change_time_s(&self, k: u32) -> f64 {
        f64::from(k) * self.cycle_s() + self.plateau_s
    }

    /// Samples needed at `rate_hz` to cover the schedule.
    pub fn sample_count(&self, rate_hz: f64) -> usize {
        libm::ceil(self.duration_s() * rate_hz - 1e-9) as usize
    }

    /// Ramps occupy the half-open window `[change, change + ramp_s)`.
    pub fn segment_at(&self, t_s: f64) -> Segment {
        let last = self.plateau_count() - 1;
        let t = t_s.max(0.0);
        let k = libm::floor(t / self.cycle_s());
        if k >= f64::from(last) {
            return Segment::Plateau(last);
        }
        let k = k as u32;
        if t - f64::from(k) * self.cycle_s() < self.plateau_s {
            Segment::Plateau(k)
        } else {
            Segment::Ramp
        }
    }
}

/// Commanded speed at time `t_s`; past the end of the schedule it stays at
/// `rpm_max`.
pub fn rpm_setpoint(t_s: f64, schedule: &ScheduleConfig) -> f64 {
    let last = schedule.plateau_count() - 1;
    let t = t_s.max(0.0);
    let k = libm::floor(t / schedule.cycle_s());
    if k >= f64::from(last) {
        return f64::from(last) * schedule.rpm_step;
    }
    let local = t - k * schedule.cycle_s();
    let base = k * schedule.rpm_step;
    if local < schedule.plateau_s {
        base
    } else {
        base + schedule.rpm_step * (local - schedule.plateau_s) / schedule.ramp_s
    }
}

/// Signal parameters of one impeller. Amplitudes and noise gains are per rpm.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpellerProfile {
    /// Once-per-revolution amplitude per rpm.
    pub imbalance_amp: f64,
    /// Blade-pass amplitude per rpm.
    pub blade_pass_amp: f64,
    /// Channel offset as a fraction of the once-per-revolution amplitude.
    pub offset_ratio: f64,
    /// Once-per-revolution phase of each channel; drawn from the seed when `None`.
    pub harmonic_phase: Option<Vec<f64>>,
    pub noise_floor: f64,
    pub noise_gain: f64,
    pub rpm_noise_floor: f64,
    pub rpm_noise_gain: f64,
}

impl Default for ImpellerProfile {
    fn default() -> Self {
        Self {
            imbalance_amp: 3.0e-3,
            blade_pass_amp: 4.0e-4,
            offset_ratio: 0.5,
            harmonic_phase: None,
            noise_floor: 5.0,
            noise_gain: 5.0e-4,
            rpm_noise_floor: 0.5,
            rpm_noise_gain: 2.0e-3,
        }
    }
}

/// Default amplitude scale of the damaged impeller.
pub const DEFAULT_DAMAGE_SCALE: f64 = 3.0;

impl ImpellerProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("imbalance_amp", self.imbalance_amp),
            ("blade_pass_amp", self.blade_pass_amp),
            ("offset_ratio", self.offset_ratio),
            ("noise_floor", self.noise_floor),
            ("noise_gain", self.noise_gain),
            ("rpm_noise_floor", self.rpm_noise_floor),
            ("rpm_noise_gain", self.rpm_noise_gain),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("profile.{name} must be nonnegative, got {v}")));
            }
        }
        if let Some(phases) = &self.harmonic_phase {
            if phases.len() != GYRO_CHANNELS || phases.iter().any(|p| !p.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "profile.harmonic_phase needs {GYRO_CHANNELS} finite values"
                )));
            }
        }
        Ok(())
    }

    /// The same impeller with both harmonic amplitudes multiplied by `scale`.
    pub fn damaged(&self, scale: f64) -> Self {
        Self {
            imbalance_amp: self.imbalance_amp * scale,
            blade_pass_amp: self.blade_pass_amp * scale,
            ..self.clone()
        }
    }

    /// A profile with every amplitude and noise term set to zero.
    pub fn silent() -> Self {
        Self {
            imbalance_amp: 0.0,
            blade_pass_amp: 0.0,
            offset_ratio: 0.0,
            harmonic_phase: None,
            noise_floor: 0.0,
            noise_gain: 0.0,
            rpm_noise_floor: 0.0,
            rpm_noise_gain: 0.0,
        }
    }
}

/// Per-channel constants of the sensor mounting, drawn once from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorLayout {
    pub harmonic_phase: Vec<f64>,
    pub blade_phase: Vec<f64>,
    /// Signed offset coefficient with magnitude in `[0.5, 1)`.
    pub offset: Vec<f64>,
}

impl SensorLayout {
    pub fn draw(seed: u64) -> Self {
        let mut rng = substream(seed, Stream::Layout, 0);
        let mut layout = Self {
            harmonic_phase: Vec::with_capacity(GYRO_CHANNELS),
            blade_phase: Vec::with_capacity(GYRO_CHANNELS),
            offset: Vec::with_capacity(GYRO_CHANNELS),
        };
        for _ in 0..GYRO_CHANNELS {
            layout.harmonic_phase.push(rng.random_range(0.0..2.0 * PI));
            layout.blade_phase.push(rng.random_range(0.0..2.0 * PI));
            let magnitude = rng.random_range(0.5..1.0);
            layout.offset.push(if rng.random_bool(0.5) { magnitude } else { -magnitude });
        }
        layout
    }
}

/// [`generate_run_with_budget`] with [`DEFAULT_SAMPLE_BUDGET`].
pub fn generate_run(
    schedule: &ScheduleConfig,
    profile: &ImpellerProfile,
    impeller: Impeller,
    seed: u64,
) -> Result<RawRecording> {
    generate_run_with_budget(schedule, profile, impeller, seed, DEFAULT_SAMPLE_BUDGET)
}

/// Generates one run. Output is a pure function of the arguments; every
/// channel draws its noise from its own substream of `seed`, and the
/// tachometer substream does not depend on the profile's amplitudes.
pub fn generate_run_with_budget(
    schedule: &ScheduleConfig,
    profile: &ImpellerProfile,
    impeller: Impeller,
    seed: u64,
    budget: u64,
) -> Result<RawRecording> {
    schedule.validate()?;
    profile.validate()?;
    let n_gyro = schedule.sample_count(schedule.gyro_rate_hz);
    let n_rpm = schedule.sample_count(schedule.rpm_rate_hz);
    let requested = (n_gyro as u64)
        .saturating_mul(GYRO_CHANNELS as u64)
        .saturating_add(n_rpm as u64);
    if requested > budget {
        return Err(Error::SampleBudgetExceeded { requested, budget });
    }

    let mut layout = SensorLayout::draw(seed);
    if let Some(phases) = &profile.harmonic_phase {
        layout.harmonic_phase.clone_from(phases);
    }

    let gyro_rate = schedule.gyro_rate_hz;
    let setpoints: Vec<f64> = (0..n_gyro)
        .map(|i| rpm_setpoint(i as f64 / gyro_rate, schedule))
        .collect();

    let mut gyro = Vec::with_capacity(GYRO_CHANNELS);
    for (c, name) in gyro_channel_names().into_iter().enumerate() {
        let mut rng = substream(seed, Stream::Gyro, c as u64);
        let offset = profile.offset_ratio * layout.offset[c];
        let samples = setpoints
            .iter()
            .enumerate()
            .map(|(i, &rpm)| {
                let t = i as f64 / gyro_rate;
                let rev = 2.0 * PI * (rpm / 60.0) * t;
                let once = profile.imbalance_amp * rpm * (offset + libm::sin(rev + layout.harmonic_phase[c]));
                let blade = profile.blade_pass_amp * rpm * libm::sin(BLADE_COUNT * rev + layout.blade_phase[c]);
                let z: f64 = rng.sample(StandardNormal);
                once + blade + z * (profile.noise_floor + profile.noise_gain * rpm)
            })
            .collect();
        gyro.push(Channel::new(name, gyro_rate, 0.0, samples)?);
    }

    let mut rng = substream(seed, Stream::Tachometer, 0);
    let rpm_samples = (0..n_rpm)
        .map(|j| {
            let rpm = rpm_setpoint(j as f64 / schedule.rpm_rate_hz, schedule);
            let z: f64 = rng.sample(StandardNormal);
            rpm + z * (profile.rpm_noise_floor + profile.rpm_noise_gain * rpm)
        })
        .collect();
    let rpm = Channel::new(RPM_CHANNEL, schedule.rpm_rate_hz, 0.0, rpm_samples)?;

    RawRecording::new(gyro, rpm, schedule.clone(), impeller, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid_plateau(s: &ScheduleConfig, k: u32) -> f64 {
        f64::from(k) * (s.plateau_s + s.ramp_s) + s.plateau_s / 2.0
    }

    #[test]
    fn setpoint_staircase() {
        let s = ScheduleConfig::default();
        assert_eq!(rpm_setpoint(mid_plateau(&s, 0), &s), 0.0);
        assert_eq!(rpm_setpoint(mid_plateau(&s, 4), &s), 1480.0);
        let ramp_mid = s.change_time_s(7) + s.ramp_s / 2.0;
        assert!((rpm_setpoint(ramp_mid, &s) - 2775.0).abs() < 1e-9);
        assert_eq!(rpm_setpoint(1e6, &s), 2960.0);
    }

    #[test]
    fn default_schedule_shape() {
        let s = ScheduleConfig::default();
        s.validate().unwrap();
        assert_eq!(s.plateau_count(), 9);
        assert_eq!(s.duration_s(), 106.0);
        assert_eq!(s.sample_count(1000.0), 106_000);
        assert_eq!(s.segment_at(9.999), Segment::Plateau(0));
        assert_eq!(s.segment_at(10.0), Segment::Ramp);
        assert_eq!(s.segment_at(11.999), Segment::Ramp);
        assert_eq!(s.segment_at(12.0), Segment::Plateau(1));
        assert_eq!(s.segment_at(105.999), Segment::Plateau(8));
    }

    #[test]
    fn invalid_schedules_rejected() {
        let s = ScheduleConfig { rpm_max: 3000.0, ..Default::default() };
        assert!(s.validate().is_err());
        let s = ScheduleConfig { rpm_rate_hz: 1000.0, ..Default::default() };
        assert!(s.validate().is_err());
        let s = ScheduleConfig { plateau_s: 0.0, ..Default::default() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn negative_profile_rejected() {
        let p = ImpellerProfile { noise_gain: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn budget_guards_full_scale_runs() {
        let s = ScheduleConfig { plateau_s: 900.0, ..Default::default() };
        let err = generate_run(&s, &ImpellerProfile::default(), Impeller::Healthy, 1).unwrap_err();
        assert!(matches!(err, Error::SampleBudgetExceeded { .. }));
        assert!(err.is_config());
    }

    #[test]
    fn silent_profile_gives_clean_staircase() {
        let s = ScheduleConfig { plateau_s: 0.5, ramp_s: 0.2, ..Default::default() };
        let run = generate_run(&s, &ImpellerProfile::silent(), Impeller::Healthy, 3).unwrap();
        assert_eq!(run.gyro().len(), GYRO_CHANNELS);
        assert!(run.gyro().iter().all(|c| c.samples().iter().all(|&v| v == 0.0)));
        for (j, &v) in run.rpm().samples().iter().enumerate() {
            assert_eq!(v, rpm_setpoint(run.rpm().timestamp(j), &s));
        }
    }

    #[test]
    fn same_seed_same_run() {
        let s = ScheduleConfig { plateau_s: 0.5, ramp_s: 0.2, ..Default::default() };
        let p = ImpellerProfile::default();
        let a = generate_run(&s, &p, Impeller::Healthy, 9).unwrap();
        let b = generate_run(&s, &p, Impeller::Healthy, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_run(&s, &p, Impeller::Healthy, 10).unwrap();
        assert_ne!(a.gyro()[0].samples(), c.gyro()[0].samples());
    }

    #[test]
    fn tachometer_shared_between_impellers() {
        let s = ScheduleConfig { plateau_s: 0.5, ramp_s: 0.2, ..Default::default() };
        let p = ImpellerProfile::default();
        let a = generate_run(&s, &p, Impeller::Healthy, 4).unwrap();
        let b = generate_run(&s, &p.damaged(3.0), Impeller::Damaged, 4).unwrap();
        assert_eq!(a.rpm(), b.rpm());
        assert_ne!(a.gyro()[5].samples(), b.gyro()[5].samples());
    }
}
