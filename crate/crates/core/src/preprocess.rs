//! Alignment, ascend removal and the two data-reduction strategies:
//! stride downsampling and binning with descriptive-statistics features.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{AlignedTable, Dataset, RawRecording, Segment};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Mean,
    Std,
    Range,
    Median,
    Kurtosis,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::Mean,
        FeatureKind::Std,
        FeatureKind::Range,
        FeatureKind::Median,
        FeatureKind::Kurtosis,
    ];

    /// Suffix used in output column names.
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Mean => "mean",
            FeatureKind::Std => "std",
            FeatureKind::Range => "range",
            FeatureKind::Median => "median",
            FeatureKind::Kurtosis => "kurtosis",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    fn compute(self, xs: &[f64], scratch: &mut Vec<f64>) -> Result<f64> {
        match self {
            FeatureKind::Mean => stats::mean(xs),
            FeatureKind::Std => stats::std(xs),
            FeatureKind::Range => stats::range(xs),
            FeatureKind::Median => {
                scratch.clear();
                scratch.extend_from_slice(xs);
                stats::median_in_place(scratch)
            }
            FeatureKind::Kurtosis => stats::kurtosis(xs),
        }
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown bin feature {s:?}")))
    }
}

/// Non-empty set of bin features, iterated in canonical order.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSet(u8);

impl FeatureSet {
    pub const MEAN: FeatureSet = FeatureSet(1);
    pub const MEAN_STD: FeatureSet = FeatureSet(0b11);
    pub const ALL: FeatureSet = FeatureSet(0b1_1111);

    pub fn new(kinds: impl IntoIterator<Item = FeatureKind>) -> Result<Self> {
        let bits = kinds.into_iter().fold(0u8, |acc, k| acc | k.bit());
        if bits == 0 {
            return Err(Error::InvalidConfig("feature set must not be empty".into()));
        }
        Ok(FeatureSet(bits))
    }

    pub fn contains(self, kind: FeatureKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn iter(self) -> impl Iterator<Item = FeatureKind> {
        FeatureKind::ALL.into_iter().filter(move |k| self.contains(k.clone()))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// `all` for the full set, otherwise feature names joined by `+`.
    pub fn label(self) -> String {
        if self == Self::ALL {
            return "all".into();
        }
        let names: Vec<&str> = self.iter().map(FeatureKind::name).collect();
        names.join("+")
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    /// Accepts `all` or feature names separated by `,` or `+`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(Self::ALL);
        }
        let kinds = s
            .split([',', '+'])
            .map(FeatureKind::from_str)
            .collect::<Result<Vec<_>>>()?;
        Self::new(kinds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinConfig {
    pub size: usize,
    pub features: FeatureSet,
}

impl BinConfig {
    pub fn new(size: usize, features: FeatureSet) -> Result<Self> {
        let cfg = Self { size, features };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidConfig("bin size must be positive".into()));
        }
        let needs_two = self.features.contains(FeatureKind::Std) || self.features.contains(FeatureKind::Kurtosis);
        if needs_two && self.size < 2 {
            return Err(Error::InvalidConfig("bin size must be at least 2 for std or kurtosis".into()));
        }
        Ok(())
    }
}

/// Resamples every channel onto the gyro grid, holding the most recent rpm
/// sample. Grid rows before the first rpm sample are dropped; each row is
/// tagged with its schedule segment.
pub fn forward_fill_align(rec: &RawRecording) -> Result<AlignedTable> {
    let rpm = rec.rpm();
    if rpm.is_empty() {
        return Err(Error::Empty("rpm channel"));
    }
    let gyro = rec.gyro();
    let reference = &gyro[0];
    let mut first_row = None;
    let mut timestamps = Vec::with_capacity(reference.len());
    let mut target = Vec::with_capacity(reference.len());
    let mut j = 0usize;
    for i in 0..reference.len() {
        let t = reference.timestamp(i);
        if rpm.timestamp(0) > t {
            continue;
        }
        while j + 1 < rpm.len() && rpm.timestamp(j + 1) <= t {
            j += 1;
        }
        first_row.get_or_insert(i);
        timestamps.push(t);
        target.push(rpm.samples()[j]);
    }
    let start = first_row.unwrap_or(reference.len());
    let schedule = rec.schedule();
    let segments = timestamps.iter().map(|&t| schedule.segment_at(t)).collect();
    AlignedTable::new(
        reference.rate_hz(),
        timestamps,
        gyro.iter().map(|c| c.name().into()).collect(),
        gyro.iter().map(|c| c.samples()[start..].to_vec()).collect(),
        target,
        segments,
    )
}

/// Drops every ramp row, preserving order.
pub fn remove_ascends(table: &AlignedTable) -> Result<AlignedTable> {
    let segments = table.segments();
    let out = table.retain_rows(|i| segments[i] != Segment::Ramp);
    if out.is_empty() {
        return Err(Error::Empty("every row lies on a ramp"));
    }
    Ok(out)
}

/// Row stride for a kept `fraction` of the data: `round(1 / fraction)`, at least 1.
pub fn stride_for(fraction: f64) -> Result<usize> {
    if !(fraction.is_finite() && fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidFraction(fraction));
    }
    Ok((libm::round(1.0 / fraction) as usize).max(1))
}

/// Keeps rows `0, k, 2k, ...` with `k` from [`stride_for`].
pub fn downsample(ds: &Dataset, fraction: f64) -> Result<Dataset> {
    let stride = stride_for(fraction)?;
    if ds.is_empty() {
        return Err(Error::Empty("dataset to downsample"));
    }
    let rows: Vec<usize> = (0..ds.len()).step_by(stride).collect();
    Ok(ds.select(&rows))
}

/// Output column names for binned `channels`: `<channel>_<feature>`.
pub fn bin_column_names(channels: &[String], features: FeatureSet) -> Vec<String> {
    channels
        .iter()
        .flat_map(|c| features.iter().map(move |f| format!("{c}_{}", f.name())))
        .collect()
}

/// Bins the whole table; see [`bin_range`].
pub fn bin(table: &AlignedTable, cfg: &BinConfig) -> Result<Dataset> {
    bin_range(table, 0..table.len(), cfg, 0)
}

/// Bins rows `range` into consecutive windows of `cfg.size` rows, dropping
/// the trailing partial window. Bin `b` gets provenance `first_ordinal + b`
/// and the mean rpm of its rows as target.
pub fn bin_range(table: &AlignedTable, range: Range<usize>, cfg: &BinConfig, first_ordinal: usize) -> Result<Dataset> {
    cfg.validate()?;
    let n = range.len();
    if n < cfg.size {
        return Err(Error::TooShort { needed: cfg.size, got: n });
    }
    let n_bins = n / cfg.size;
    let names = bin_column_names(table.column_names(), cfg.features);
    let mut features = Matrix::zeros(n_bins, names.len());
    let mut target = Vec::with_capacity(n_bins);
    let mut scratch = Vec::with_capacity(cfg.size);
    for b in 0..n_bins {
        let rows = range.start + b * cfg.size..range.start + (b + 1) * cfg.size;
        let mut col = 0;
        for column in table.columns() {
            let xs = &column[rows.clone()];
            for kind in cfg.features.iter() {
                features.set(b, col, kind.compute(xs, &mut scratch)?);
                col += 1;
            }
        }
        target.push(stats::mean(&table.target()[rows])?);
    }
    Dataset::new(features, target, names, (first_ordinal..first_ordinal + n_bins).collect())
}

/// A data-reduction configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reduction {
    /// Keep this fraction of rows by stride decimation.
    Downsample(f64),
    Bin(BinConfig),
}

impl Reduction {
    pub fn validate(&self) -> Result<()> {
        match self {
            Reduction::Downsample(f) => stride_for(*f).map(|_| ()),
            Reduction::Bin(cfg) => cfg.validate(),
        }
    }

    /// Stable textual id, e.g. `ds-0.25` or `bin-2500-mean+std`.
    pub fn label(&self) -> String {
        match self {
            Reduction::Downsample(f) => format!("ds-{f}"),
            Reduction::Bin(cfg) => format!("bin-{}-{}", cfg.size, cfg.features.label()),
        }
    }

    /// Reduces rows `range` of `table`. Downsampling starts its stride at
    /// `range.start`; bins are numbered from `first_ordinal`.
    pub fn apply_range(&self, table: &AlignedTable, range: Range<usize>, first_ordinal: usize) -> Result<Dataset> {
        match self {
            Reduction::Downsample(f) => {
                if range.is_empty() {
                    return Err(Error::Empty("rows to downsample"));
                }
                downsample(&table.dataset_rows(range), *f)
            }
            Reduction::Bin(cfg) => bin_range(table, range, cfg, first_ordinal),
        }
    }

    pub fn apply(&self, table: &AlignedTable) -> Result<Dataset> {
        self.apply_range(table, 0..table.len(), 0)
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("invalid reduction {s:?}"));
        let r = if let Some(f) = s.strip_prefix("ds-") {
            Reduction::Downsample(f.parse().map_err(|_| bad())?)
        } else if let Some(rest) = s.strip_prefix("bin-") {
            let (size, features) = rest.split_once('-').ok_or_else(bad)?;
            Reduction::Bin(BinConfig { size: size.parse().map_err(|_| bad())?, features: features.parse()? })
        } else {
            return Err(bad());
        };
        r.validate()?;
        Ok(r)
    }
}
