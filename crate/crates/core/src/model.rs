//! Shared data types flowing through the pipeline.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::synth::ScheduleConfig;

/// Name of the tachometer channel in a [`RawRecording`].
pub const RPM_CHANNEL: &str = "rpm";

/// One uniformly sampled sensor stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    name: String,
    rate_hz: f64,
    t0_s: f64,
    samples: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, rate_hz: f64, t0_s: f64, samples: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!("channel {name}: rate must be positive")));
        }
        if !t0_s.is_finite() {
            return Err(Error::InvalidConfig(format!("channel {name}: start offset must be finite")));
        }
        if let Some(row) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { column: name, row });
        }
        Ok(Self { name, rate_hz, t0_s, samples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn t0_s(&self) -> f64 {
        self.t0_s
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn timestamp(&self, i: usize) -> f64 {
        self.t0_s + i as f64 / self.rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Impeller {
    Healthy,
    Damaged,
}

impl Impeller {
    pub fn as_str(self) -> &'static str {
        match self {
            Impeller::Healthy => "healthy",
            Impeller::Damaged => "damaged",
        }
    }
}

impl core::str::FromStr for Impeller {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy" => Ok(Impeller::Healthy),
            "damaged" => Ok(Impeller::Damaged),
            other => Err(Error::InvalidConfig(format!("unknown impeller {other:?}"))),
        }
    }
}

/// Multi-rate sample streams from one test run: the gyro channels share one
/// rate and length, the tachometer channel is sampled more slowly.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    gyro: Vec<Channel>,
    rpm: Channel,
    schedule: ScheduleConfig,
    impeller: Impeller,
    seed: u64,
}

impl RawRecording {
    pub fn new(
        gyro: Vec<Channel>,
        rpm: Channel,
        schedule: ScheduleConfig,
        impeller: Impeller,
        seed: u64,
    ) -> Result<Self> {
        if rpm.name() != RPM_CHANNEL {
            return Err(Error::Malformed(format!("tachometer channel must be named {RPM_CHANNEL:?}")));
        }
        let first = gyro.first().ok_or(Error::Empty("no gyro channels"))?;
        for ch in &gyro {
            if ch.name() == RPM_CHANNEL {
                return Err(Error::Malformed("more than one rpm channel".into()));
            }
            if ch.rate_hz() != first.rate_hz() || ch.len() != first.len() || ch.t0_s() != first.t0_s() {
                return Err(Error::Malformed(format!(
                    "gyro channel {} differs in rate, start or length from {}",
                    ch.name(),
                    first.name()
                )));
            }
        }
        if rpm.rate_hz() > first.rate_hz() {
            return Err(Error::Malformed("rpm rate must not exceed the gyro rate".into()));
        }
        Ok(Self { gyro, rpm, schedule, impeller, seed })
    }

    pub fn gyro(&self) -> &[Channel] {
        &self.gyro
    }

    pub fn rpm(&self) -> &Channel {
        &self.rpm
    }

    pub fn schedule(&self) -> &ScheduleConfig {
        &self.schedule
    }

    pub fn impeller(&self) -> Impeller {
        self.impeller
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Position of a row in the test schedule.
///
/// `Plateau(k)` is the k-th constant-speed segment, running at `k` rpm steps;
/// the zero-speed start is `Plateau(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    /// Transition between two plateaus.
    Ramp,
    Plateau(u32),
}

impl Segment {
    pub fn plateau(self) -> Option<u32> {
        match self {
            Segment::Ramp => None,
            Segment::Plateau(k) => Some(k),
        }
    }

    /// Integer code used in files: `-1` for ramps, the ordinal otherwise.
    pub fn code(self) -> i64 {
        match self {
            Segment::Ramp => -1,
            Segment::Plateau(k) => i64::from(k),
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            -1 => Ok(Segment::Ramp),
            k if (0..=i64::from(u32::MAX)).contains(&k) => Ok(Segment::Plateau(k as u32)),
            _ => Err(Error::Malformed(format!("invalid segment code {code}"))),
        }
    }
}

/// Uniform-grid table at the gyro rate: feature columns plus the rpm target.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTable {
    rate_hz: f64,
    timestamps_s: Vec<f64>,
    column_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch { column: String, expected: usize, got: usize },
    NonFinite { column: String, row: usize },
    NonMonotoneTimestamps { row: usize },
    /// Spacing differs from `1 / rate` inside a segment.
    NonUniformSpacing { row: usize },
    NonPositiveRate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl AlignedTable {
    /// Assembles a table without checking it; see [`AlignedTable::validate`].
    pub fn from_parts(
        rate_hz: f64,
        timestamps_s: Vec<f64>,
        column_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        segments: Vec<Segment>,
    ) -> Self {
        Self { rate_hz, timestamps_s, column_names, columns, target, segments }
    }

    /// Like [`AlignedTable::from_parts`] but fails on the first violated invariant.
    pub fn new(
        rate_hz: f64,
        timestamps_s: Vec<f64>,
        column_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        segments: Vec<Segment>,
    ) -> Result<Self> {
        let table = Self::from_parts(rate_hz, timestamps_s, column_names, columns, target, segments);
        match table.validate().violations.into_iter().next() {
            None => Ok(table),
            Some(v) => Err(Error::Malformed(format!("{v:?}"))),
        }
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn timestamps_s(&self) -> &[f64] {
        &self.timestamps_s
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Checks every table invariant and reports all violations found.
    ///
    /// Timestamps must increase strictly. Spacing must equal `1 / rate` except
    /// where the segment changes, since removing ramps leaves gaps there.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let n = self.target.len();
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            violations.push(Violation::NonPositiveRate);
        }
        if self.column_names.len() != self.columns.len() {
            violations.push(Violation::LengthMismatch {
                column: "column_names".into(),
                expected: self.columns.len(),
                got: self.column_names.len(),
            });
        }
        let mut check_len = |name: &str, len: usize| {
            if len != n {
                violations.push(Violation::LengthMismatch { column: name.into(), expected: n, got: len });
            }
        };
        check_len("t_s", self.timestamps_s.len());
        check_len("segment", self.segments.len());
        for (name, col) in self.column_names.iter().zip(&self.columns) {
            check_len(name, col.len());
        }

        let mut non_finite = |name: &str, values: &[f64]| {
            if let Some(row) = values.iter().position(|v| !v.is_finite()) {
                violations.push(Violation::NonFinite { column: name.into(), row });
            }
        };
        non_finite("t_s", &self.timestamps_s);
        non_finite(RPM_CHANNEL, &self.target);
        for (name, col) in self.column_names.iter().zip(&self.columns) {
            non_finite(name, col);
        }

        let step = 1.0 / self.rate_hz;
        let rows = self.timestamps_s.len().min(self.segments.len());
        for i in 1..rows {
            let dt = self.timestamps_s[i] - self.timestamps_s[i - 1];
            if !(dt > 0.0) {
                violations.push(Violation::NonMonotoneTimestamps { row: i });
            } else if self.segments[i] == self.segments[i - 1] && libm::fabs(dt - step) > 1e-6 * step {
                violations.push(Violation::NonUniformSpacing { row: i });
            }
        }
        ValidationReport { violations }
    }

    /// Maximal runs of consecutive rows sharing one segment, in table order.
    pub fn segment_runs(&self) -> Vec<(Segment, Range<usize>)> {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=self.segments.len() {
            if i == self.segments.len() || self.segments[i] != self.segments[start] {
                runs.push((self.segments[start], start..i));
                start = i;
            }
        }
        runs
    }

    /// Keeps the rows for which `keep` is true, preserving order.
    pub fn retain_rows(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            rate_hz: self.rate_hz,
            timestamps_s: pick(&self.timestamps_s),
            column_names: self.column_names.clone(),
            columns: self.columns.iter().map(|c| pick(c)).collect(),
            target: pick(&self.target),
            segments: idx.iter().map(|&i| self.segments[i]).collect(),
        }
    }

    /// Rows `range` as a dataset whose provenance is the table row index.
    pub fn dataset_rows(&self, range: Range<usize>) -> Dataset {
        let cols: Vec<&[f64]> = self.columns.iter().map(|c| &c[range.clone()]).collect();
        let features = Matrix::from_columns(&cols).expect("table columns have equal length");
        Dataset {
            features,
            target: self.target[range.clone()].to_vec(),
            column_names: self.column_names.clone(),
            provenance: range.collect(),
        }
    }

    /// The whole table as a dataset, one row per table row.
    pub fn to_dataset(&self) -> Dataset {
        self.dataset_rows(0..self.len())
    }
}

/// Feature matrix plus target, the unit consumed by the models.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    target: Vec<f64>,
    column_names: Vec<String>,
    provenance: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Matrix, target: Vec<f64>, column_names: Vec<String>, provenance: Vec<usize>) -> Result<Self> {
        if features.rows() != target.len() {
            return Err(Error::LengthMismatch { left: features.rows(), right: target.len() });
        }
        if provenance.len() != target.len() {
            return Err(Error::LengthMismatch { left: provenance.len(), right: target.len() });
        }
        if features.cols() != column_names.len() && features.rows() > 0 {
            return Err(Error::ColumnMismatch { expected: column_names.len(), got: features.cols() });
        }
        if let Some(row) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { column: RPM_CHANNEL.to_string(), row });
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = features.cols();
            return Err(Error::NonFinite { column: column_names[pos % cols].clone(), row: pos / cols });
        }
        Ok(Self { features, target, column_names, provenance })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Source table row index (or bin ordinal) of every row.
    pub fn provenance(&self) -> &[usize] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.column_names.len()
    }

    /// Copies the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            target: rows.iter().map(|&r| self.target[r]).collect(),
            column_names: self.column_names.clone(),
            provenance: rows.iter().map(|&r| self.provenance[r]).collect(),
        }
    }

    /// Concatenates datasets with identical column names.
    pub fn concat(parts: &[Dataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("no datasets to concatenate"))?;
        let mut out = Self {
            features: Matrix::zeros(0, first.n_features()),
            target: Vec::new(),
            column_names: first.column_names.clone(),
            provenance: Vec::new(),
        };
        for p in parts {
            if p.column_names != out.column_names {
                return Err(Error::ColumnMismatch { expected: out.n_features(), got: p.n_features() });
            }
            out.features.append(&p.features)?;
            out.target.extend_from_slice(&p.target);
            out.provenance.extend_from_slice(&p.provenance);
        }
        Ok(out)
    }
}

/// Train and test partitions with disjoint provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    train: Dataset,
    test: Dataset,
}

impl SplitPair {
    pub fn new(train: Dataset, test: Dataset) -> Result<Self> {
        if train.column_names != test.column_names {
            return Err(Error::ColumnMismatch { expected: train.n_features(), got: test.n_features() });
        }
        if train.is_empty() {
            return Err(Error::EmptyPartition("train"));
        }
        if test.is_empty() {
            return Err(Error::EmptyPartition("test"));
        }
        let seen: BTreeSet<usize> = train.provenance.iter().copied().collect();
        if let Some(p) = test.provenance.iter().find(|p| seen.contains(p)) {
            return Err(Error::Malformed(format!("row {p} appears in both train and test")));
        }
        Ok(Self { train, test })
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn test(&self) -> &Dataset {
        &self.test
    }

    pub fn into_parts(self) -> (Dataset, Dataset) {
        (self.train, self.test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn table(n: usize) -> AlignedTable {
        let ts: Vec<f64> = (0..n).map(|i| i as f64 / 100.0).collect();
        AlignedTable::from_parts(
            100.0,
            ts,
            vec!["a".into(), "b".into()],
            vec![(0..n).map(|i| i as f64).collect(), vec![1.0; n]],
            (0..n).map(|i| 10.0 * i as f64).collect(),
            vec![Segment::Plateau(1); n],
        )
    }

    #[test]
    fn well_formed_table_validates() {
        assert!(table(10).validate().is_ok());
    }

    #[test]
    fn non_finite_target_reported_with_row() {
        let mut t = table(10);
        t.target[3] = f64::NAN;
        assert_eq!(
            t.validate().violations,
            vec![Violation::NonFinite { column: RPM_CHANNEL.into(), row: 3 }]
        );
    }

    #[test]
    fn duplicated_timestamp_reported() {
        let mut t = table(10);
        t.timestamps_s[5] = t.timestamps_s[4];
        let v = t.validate().violations;
        assert!(v.contains(&Violation::NonMonotoneTimestamps { row: 5 }), "{v:?}");
    }

    #[test]
    fn gap_allowed_only_at_segment_change() {
        let mut t = table(10);
        for i in 5..10 {
            t.timestamps_s[i] += 2.0;
        }
        assert_eq!(t.validate().violations, vec![Violation::NonUniformSpacing { row: 5 }]);
        for s in &mut t.segments[5..] {
            *s = Segment::Plateau(2);
        }
        assert!(t.validate().is_ok());
    }

    #[test]
    fn length_mismatch_reported() {
        let mut t = table(10);
        t.columns[1].pop();
        assert!(matches!(t.validate().violations[0], Violation::LengthMismatch { .. }));
    }

    #[test]
    fn segment_runs_cover_table() {
        let mut t = table(6);
        t.segments = vec![
            Segment::Plateau(0),
            Segment::Plateau(0),
            Segment::Ramp,
            Segment::Plateau(1),
            Segment::Plateau(1),
            Segment::Plateau(1),
        ];
        assert_eq!(
            t.segment_runs(),
            vec![(Segment::Plateau(0), 0..2), (Segment::Ramp, 2..3), (Segment::Plateau(1), 3..6)]
        );
    }

    #[test]
    fn split_pair_rejects_overlap() {
        let ds = table(6).to_dataset();
        let a = ds.select(&[0, 1, 2]);
        let b = ds.select(&[2, 3]);
        assert!(SplitPair::new(a.clone(), b).is_err());
        assert!(SplitPair::new(a, ds.select(&[3, 4, 5])).is_ok());
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let m = Matrix::from_rows(&[vec![1.0, f64::INFINITY]]).unwrap();
        let err = Dataset::new(m, vec![1.0], vec!["a".into(), "b".into()], vec![0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { column: "b".into(), row: 0 });
    }
}
