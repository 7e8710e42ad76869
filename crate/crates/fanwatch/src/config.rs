//! Run configuration, read from a sectioned TOML file.

use std::fs;
use std::path::Path;

use fanwatch_core::eval::{GridCell, GridConfig, ModelKind, SplitKind};
use fanwatch_core::forest::ForestParams;
use fanwatch_core::preprocess::{BinConfig, FeatureSet, Reduction};
use fanwatch_core::splits::PartitionPlan;
use fanwatch_core::synth::{ImpellerProfile, ScheduleConfig, DEFAULT_DAMAGE_SCALE, DEFAULT_SAMPLE_BUDGET};
use fanwatch_core::rng::GENERATOR_ID;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Name accepted in place of a path for the built-in defaults.
pub const DEFAULT_CONFIG_NAME: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub schedule: ScheduleSection,
    pub healthy: ProfileSection,
    pub damaged: DamagedSection,
    pub grid: GridSection,
    pub forest: ForestSection,
    pub health: HealthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub master_seed: u64,
    pub rng: String,
    pub sample_budget: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { master_seed: 1, rng: GENERATOR_ID.into(), sample_budget: DEFAULT_SAMPLE_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub rpm_step: f64,
    pub rpm_max: f64,
    pub plateau_s: f64,
    pub ramp_s: f64,
    pub gyro_rate_hz: f64,
    pub rpm_rate_hz: f64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let s = ScheduleConfig::default();
        Self {
            rpm_step: s.rpm_step,
            rpm_max: s.rpm_max,
            plateau_s: s.plateau_s,
            ramp_s: s.ramp_s,
            gyro_rate_hz: s.gyro_rate_hz,
            rpm_rate_hz: s.rpm_rate_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub imbalance_amp: f64,
    pub blade_pass_amp: f64,
    pub offset_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonic_phase: Option<Vec<f64>>,
    pub noise_floor: f64,
    pub noise_gain: f64,
    pub rpm_noise_floor: f64,
    pub rpm_noise_gain: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        let p = ImpellerProfile::default();
        Self {
            imbalance_amp: p.imbalance_amp,
            blade_pass_amp: p.blade_pass_amp,
            offset_ratio: p.offset_ratio,
            harmonic_phase: p.harmonic_phase,
            noise_floor: p.noise_floor,
            noise_gain: p.noise_gain,
            rpm_noise_floor: p.rpm_noise_floor,
            rpm_noise_gain: p.rpm_noise_gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DamagedSection {
    /// Multiplier on both harmonic amplitudes of the healthy profile.
    pub scale: f64,
}

impl Default for DamagedSection {
    fn default() -> Self {
        Self { scale: DEFAULT_DAMAGE_SCALE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub fractions: Vec<f64>,
    pub bin_sizes: Vec<usize>,
    pub feature_sets: Vec<String>,
    pub splits: Vec<String>,
    pub models: Vec<String>,
    pub train_ratio: f64,
    pub train_plateaus: Vec<u32>,
    pub test_plateaus: Vec<u32>,
    pub excluded_plateaus: Vec<u32>,
}

impl Default for GridSection {
    fn default() -> Self {
        use fanwatch_core::eval::{BIN_SIZES, DOWNSAMPLE_FRACTIONS, FEATURE_PRESETS};
        let plan = PartitionPlan::default();
        Self {
            fractions: DOWNSAMPLE_FRACTIONS.to_vec(),
            bin_sizes: BIN_SIZES.to_vec(),
            feature_sets: FEATURE_PRESETS.iter().map(|f| f.label()).collect(),
            splits: vec!["shuffled".into(), "partitioned".into()],
            models: vec!["lr".into(), "rf".into()],
            train_ratio: fanwatch_core::splits::DEFAULT_TRAIN_RATIO,
            train_plateaus: plan.train_steps.into_iter().collect(),
            test_plateaus: plan.test_steps.into_iter().collect(),
            excluded_plateaus: plan.excluded_steps.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    pub row_fraction: f64,
    pub feature_fraction: f64,
    pub min_leaf: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
}

impl Default for ForestSection {
    fn default() -> Self {
        let f = ForestParams::default();
        Self {
            n_trees: f.n_trees,
            row_fraction: f.row_fraction,
            feature_fraction: f.feature_fraction,
            min_leaf: f.min_leaf,
            max_depth: f.max_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HealthSection {
    /// Grid cell whose model is scored on healthy and damaged data by `grid`.
    pub figure_config: String,
}

impl Default for HealthSection {
    fn default() -> Self {
        Self { figure_config: "bin-5000-all/shuffled/rf".into() }
    }
}

const DEFAULT_TOML: &str = r#"# fanwatch-format v1
# fanwatch run configuration. Every key is optional; the values shown are
# the built-in defaults.

[run]
# Seed from which every per-cell seed is derived.
master_seed = 1
# Random generator; only "chacha8-v1" is supported.
rng = "chacha8-v1"
# Largest number of samples (gyro samples x channels + rpm samples) that
# `generate` will produce.
sample_budget = 50000000

[schedule]
# Plateau k runs at k * rpm_step until rpm_max is reached.
rpm_step = 370.0
rpm_max = 2960.0
# Seconds per plateau and per ramp between plateaus.
plateau_s = 10.0
ramp_s = 2.0
# Sampling rates of the gyro channels and of the tachometer.
gyro_rate_hz = 1000.0
rpm_rate_hz = 100.0

[healthy]
# Once-per-revolution and blade-pass amplitudes, per rpm.
imbalance_amp = 0.003
blade_pass_amp = 0.0004
# Per-channel offset as a fraction of the once-per-revolution amplitude.
offset_ratio = 0.5
# harmonic_phase = [24 values]   (unset: drawn from the seed)
# Gyro noise standard deviation is noise_floor + noise_gain * rpm.
noise_floor = 5.0
noise_gain = 0.0005
# Tachometer noise standard deviation is rpm_noise_floor + rpm_noise_gain * rpm.
rpm_noise_floor = 0.5
rpm_noise_gain = 0.002

[damaged]
# The damaged impeller is the healthy profile with both harmonic
# amplitudes multiplied by this factor.
scale = 3.0

[grid]
fractions = [0.5, 0.25, 0.1, 0.01, 0.001, 0.0001]
bin_sizes = [100, 500, 1000, 2500, 5000, 10000, 50000]
# Feature sets: names from mean, std, range, median, kurtosis joined by
# "+", or "all".
feature_sets = ["mean", "mean+std", "all"]
splits = ["shuffled", "partitioned"]
models = ["lr", "rf"]
# Share of rows in the training partition of the shuffled split.
train_ratio = 0.67
# Plateau ordinals of the partitioned split; plateau 0 is never used.
train_plateaus = [1, 3, 5, 7]
test_plateaus = [2, 4, 6]
excluded_plateaus = [8]

[forest]
n_trees = 50
# Bootstrap sample size as a fraction of the training rows.
row_fraction = 0.66
# Features searched at each split, as a fraction (at least one).
feature_fraction = 0.33
min_leaf = 1
# max_depth = 20   (unset: unlimited)

[health]
# Grid cell evaluated on healthy and damaged data by `grid`.
figure_config = "bin-5000-all/shuffled/rf"
"#;

impl RunConfig {
    /// Documented configuration holding the built-in defaults.
    pub fn default_toml() -> &'static str {
        DEFAULT_TOML
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::config(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults for `None` and `"default"`.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) if p.as_os_str() == DEFAULT_CONFIG_NAME => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text)
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.run.rng != GENERATOR_ID {
            return Err(CliError::config(format!("unsupported rng {:?}, expected {GENERATOR_ID:?}", self.run.rng)));
        }
        self.schedule().validate()?;
        self.healthy_profile().validate()?;
        if !(self.damaged.scale.is_finite() && self.damaged.scale >= 0.0) {
            return Err(CliError::config(format!("damaged.scale must be nonnegative, got {}", self.damaged.scale)));
        }
        self.forest_params().validate()?;
        let grid = self.grid_config()?;
        grid.plan.validate()?;
        for r in &grid.reductions {
            r.validate()?;
        }
        parse_cell_id(&self.health.figure_config)?;
        Ok(())
    }

    pub fn schedule(&self) -> ScheduleConfig {
        let s = &self.schedule;
        ScheduleConfig {
            rpm_step: s.rpm_step,
            rpm_max: s.rpm_max,
            plateau_s: s.plateau_s,
            ramp_s: s.ramp_s,
            gyro_rate_hz: s.gyro_rate_hz,
            rpm_rate_hz: s.rpm_rate_hz,
        }
    }

    pub fn healthy_profile(&self) -> ImpellerProfile {
        let p = &self.healthy;
        ImpellerProfile {
            imbalance_amp: p.imbalance_amp,
            blade_pass_amp: p.blade_pass_amp,
            offset_ratio: p.offset_ratio,
            harmonic_phase: p.harmonic_phase.clone(),
            noise_floor: p.noise_floor,
            noise_gain: p.noise_gain,
            rpm_noise_floor: p.rpm_noise_floor,
            rpm_noise_gain: p.rpm_noise_gain,
        }
    }

    pub fn damaged_profile(&self) -> ImpellerProfile {
        self.healthy_profile().damaged(self.damaged.scale)
    }

    /// Forest hyperparameters with seed 0; commands set the seed.
    pub fn forest_params(&self) -> ForestParams {
        let f = &self.forest;
        ForestParams {
            n_trees: f.n_trees,
            row_fraction: f.row_fraction,
            feature_fraction: f.feature_fraction,
            min_leaf: f.min_leaf,
            max_depth: f.max_depth,
            seed: 0,
        }
    }

    pub fn plan(&self) -> PartitionPlan {
        PartitionPlan {
            train_steps: self.grid.train_plateaus.iter().copied().collect(),
            test_steps: self.grid.test_plateaus.iter().copied().collect(),
            excluded_steps: self.grid.excluded_plateaus.iter().copied().collect(),
        }
    }

    pub fn grid_config(&self) -> CliResult<GridConfig> {
        let g = &self.grid;
        let feature_sets = g
            .feature_sets
            .iter()
            .map(|s| s.parse::<FeatureSet>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut reductions: Vec<Reduction> = g.fractions.iter().map(|&f| Reduction::Downsample(f)).collect();
        for &size in &g.bin_sizes {
            for &features in &feature_sets {
                reductions.push(Reduction::Bin(BinConfig { size, features }));
            }
        }
        Ok(GridConfig {
            reductions,
            splits: g.splits.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
            models: g.models.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
            train_ratio: g.train_ratio,
            plan: self.plan(),
            forest: self.forest_params(),
            master_seed: self.run.master_seed,
        })
    }
}

/// Parses `<reduction>/<split>/<model>` into a grid cell with index 0.
pub fn parse_cell_id(id: &str) -> CliResult<GridCell> {
    let parts: Vec<&str> = id.split('/').collect();
    let [reduction, split, model] = parts[..] else {
        return Err(CliError::config(format!("config id {id:?} is not <reduction>/<split>/<model>")));
    };
    let reduction: Reduction = reduction.parse()?;
    reduction.validate()?;
    Ok(GridCell {
        index: 0,
        reduction,
        split: split.parse::<SplitKind>()?,
        model: model.parse::<ModelKind>()?,
    })
}
