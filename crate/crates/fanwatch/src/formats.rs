//! CSV file formats. Every file starts with `# fanwatch-format v1` and a
//! second comment line `# <kind> key=value ...` describing its contents.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use fanwatch_core::eval::{CellStatus, ExperimentReport, HealthReport, ReportRow};
use fanwatch_core::preprocess::{forward_fill_align, Reduction};
use fanwatch_core::synth::{gyro_channel_names, ScheduleConfig};
use fanwatch_core::{AlignedTable, Channel, Dataset, Impeller, Matrix, RawRecording};

use crate::error::{CliError, CliResult};

pub const FORMAT_LINE: &str = "# fanwatch-format v1";

/// The `# <kind> key=value ...` line following the format line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Header {
    pub kind: String,
    pub fields: BTreeMap<String, String>,
}

impl Header {
    pub fn new(kind: &str) -> Self {
        Self { kind: kind.into(), fields: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key).ok_or_else(|| CliError::data(format!("{} header lacks {key}", self.kind)))
    }

    pub fn parse_field<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| CliError::data(format!("{} header: bad {key}={raw}", self.kind)))
    }

    pub fn line(&self) -> String {
        let mut s = format!("# {}", self.kind);
        for (k, v) in &self.fields {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }

    pub fn parse_line(line: &str) -> CliResult<Self> {
        let body = line
            .strip_prefix("# ")
            .ok_or_else(|| CliError::data(format!("expected a header comment, found {line:?}")))?;
        let mut words = body.split_whitespace();
        let kind = words.next().ok_or_else(|| CliError::data("empty header comment"))?;
        let mut header = Header::new(kind);
        for w in words {
            let (k, v) = w.split_once('=').ok_or_else(|| CliError::data(format!("bad header field {w:?}")))?;
            header.fields.insert(k.into(), v.into());
        }
        Ok(header)
    }
}

fn create(path: &Path, header: &Header) -> CliResult<BufWriter<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{FORMAT_LINE}\n{}", header.line()).map_err(|e| CliError::io(path, e))?;
    Ok(w)
}

/// Opens `path` and consumes its two header lines.
fn open(path: &Path) -> CliResult<(Header, BufReader<File>)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut first = String::new();
    r.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
    if first.trim_end() != FORMAT_LINE {
        return Err(CliError::data(format!("{}: not a fanwatch v1 file", path.display())));
    }
    let mut second = String::new();
    r.read_line(&mut second).map_err(|e| CliError::io(path, e))?;
    Ok((Header::parse_line(second.trim_end())?, r))
}

/// Reads only the header of `path`.
pub fn read_header(path: &Path) -> CliResult<Header> {
    open(path).map(|(h, _)| h)
}

fn expect_kind(path: &Path, header: &Header, kinds: &[&str]) -> CliResult<()> {
    if kinds.contains(&header.kind.as_str()) {
        Ok(())
    } else {
        Err(CliError::data(format!("{}: expected a {} file, found {}", path.display(), kinds.join(" or "), header.kind)))
    }
}

fn csv_writer(w: BufWriter<File>) -> csv::Writer<BufWriter<File>> {
    csv::WriterBuilder::new().from_writer(w)
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().from_reader(r)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!(),
        }
    } else {
        CliError::data(format!("{}: {e}", path.display()))
    }
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> CliResult<()> {
    let mut inner = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| CliError::io(path, e))
}

fn parse_f64(path: &Path, line: u64, field: &str) -> CliResult<f64> {
    field
        .parse()
        .map_err(|_| CliError::data(format!("{}: line {line}: not a number: {field:?}", path.display())))
}

fn fmt_time(t: f64) -> String {
    format!("{t:.6}")
}

/// Full round-trip decimal formatting.
pub fn fmt_value(v: f64) -> String {
    format!("{v}")
}

/// NMSE as printed in reports.
pub fn fmt_nmse(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// Provenance of a recording: which impeller, which seed, which schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingMeta {
    pub impeller: Impeller,
    pub seed: u64,
    pub schedule: ScheduleConfig,
}

impl RecordingMeta {
    pub fn of(rec: &RawRecording) -> Self {
        Self { impeller: rec.impeller(), seed: rec.seed(), schedule: rec.schedule().clone() }
    }

    fn header(&self, kind: &str) -> Header {
        let s = &self.schedule;
        Header::new(kind)
            .with("impeller", self.impeller.as_str())
            .with("seed", self.seed)
            .with("rpm_step", s.rpm_step)
            .with("rpm_max", s.rpm_max)
            .with("plateau_s", s.plateau_s)
            .with("ramp_s", s.ramp_s)
            .with("gyro_rate_hz", s.gyro_rate_hz)
            .with("rpm_rate_hz", s.rpm_rate_hz)
    }

    fn from_header(h: &Header) -> CliResult<Self> {
        let schedule = ScheduleConfig {
            rpm_step: h.parse_field("rpm_step")?,
            rpm_max: h.parse_field("rpm_max")?,
            plateau_s: h.parse_field("plateau_s")?,
            ramp_s: h.parse_field("ramp_s")?,
            gyro_rate_hz: h.parse_field("gyro_rate_hz")?,
            rpm_rate_hz: h.parse_field("rpm_rate_hz")?,
        };
        schedule.validate().map_err(|e| CliError::data(format!("recording header: {e}")))?;
        let impeller = h.require("impeller")?.parse().map_err(|e: fanwatch_core::Error| CliError::data(e.to_string()))?;
        Ok(Self { impeller, seed: h.parse_field("seed")?, schedule })
    }
}

/// A recording read back from disk: the aligned table on the gyro grid,
/// ramps included, with each row tagged by its schedule segment.
#[derive(Debug, Clone)]
pub struct Recording {
    pub meta: RecordingMeta,
    pub table: AlignedTable,
}

/// Writes `rec` aligned onto the gyro grid: `t_s`, `rpm`, then the gyro channels.
pub fn write_recording(path: &Path, rec: &RawRecording) -> CliResult<()> {
    let table = forward_fill_align(rec)?;
    let mut w = csv_writer(create(path, &RecordingMeta::of(rec).header("recording"))?);
    let mut names = vec!["t_s".to_string(), "rpm".to_string()];
    names.extend(table.column_names().iter().cloned());
    w.write_record(&names).map_err(|e| csv_err(path, e))?;
    let mut record = Vec::with_capacity(names.len());
    for i in 0..table.len() {
        record.clear();
        record.push(fmt_time(table.timestamps_s()[i]));
        record.push(fmt_value(table.target()[i]));
        record.extend(table.columns().iter().map(|c| fmt_value(c[i])));
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Reads a recording written by [`write_recording`]. Timestamps are rebuilt
/// as `t0 + i / gyro_rate_hz` and must agree with the file to the printed
/// precision.
pub fn read_recording(path: &Path) -> CliResult<Recording> {
    let (header, r) = open(path)?;
    expect_kind(path, &header, &["recording"])?;
    let meta = RecordingMeta::from_header(&header)?;
    let mut rdr = csv_reader(r);
    let names: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    if names.len() < 3 || names[0] != "t_s" || names[1] != "rpm" {
        return Err(CliError::data(format!("{}: expected columns t_s, rpm, <channels...>", path.display())));
    }
    let n_channels = names.len() - 2;
    let mut t_file = Vec::new();
    let mut target = Vec::new();
    let mut columns = vec![Vec::new(); n_channels];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i as u64 + 4;
        if rec.len() != names.len() {
            return Err(CliError::data(format!("{}: line {line}: expected {} fields", path.display(), names.len())));
        }
        t_file.push(parse_f64(path, line, &rec[0])?);
        target.push(parse_f64(path, line, &rec[1])?);
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(parse_f64(path, line, &rec[c + 2])?);
        }
    }
    let rate = meta.schedule.gyro_rate_hz;
    let t0 = t_file.first().copied().unwrap_or(0.0);
    let timestamps: Vec<f64> = (0..t_file.len()).map(|i| t0 + i as f64 / rate).collect();
    if let Some(i) = (0..t_file.len()).find(|&i| (timestamps[i] - t_file[i]).abs() > 1e-6) {
        return Err(CliError::data(format!(
            "{}: row {i}: timestamp {} is off the {rate} Hz grid",
            path.display(),
            t_file[i]
        )));
    }
    let segments = timestamps.iter().map(|&t| meta.schedule.segment_at(t)).collect();
    let table = AlignedTable::new(rate, timestamps, names[2..].to_vec(), columns, target, segments)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(Recording { meta, table })
}

/// Writes `rec` at the native rates: `gyro.csv` and `rpm.csv` in `dir`.
pub fn write_multirate(dir: &Path, rec: &RawRecording) -> CliResult<()> {
    let meta = RecordingMeta::of(rec);
    let gyro_path = dir.join("gyro.csv");
    let mut w = csv_writer(create(&gyro_path, &meta.header("recording-gyro"))?);
    let mut names = vec!["t_s".to_string()];
    names.extend(rec.gyro().iter().map(|c| c.name().to_string()));
    w.write_record(&names).map_err(|e| csv_err(&gyro_path, e))?;
    let reference = &rec.gyro()[0];
    for i in 0..reference.len() {
        let mut record = vec![fmt_time(reference.timestamp(i))];
        record.extend(rec.gyro().iter().map(|c| fmt_value(c.samples()[i])));
        w.write_record(&record).map_err(|e| csv_err(&gyro_path, e))?;
    }
    finish(&gyro_path, w)?;

    let rpm_path = dir.join("rpm.csv");
    let mut w = csv_writer(create(&rpm_path, &meta.header("recording-rpm"))?);
    w.write_record(["t_s", "rpm"]).map_err(|e| csv_err(&rpm_path, e))?;
    let rpm = rec.rpm();
    for i in 0..rpm.len() {
        w.write_record([fmt_time(rpm.timestamp(i)), fmt_value(rpm.samples()[i])])
            .map_err(|e| csv_err(&rpm_path, e))?;
    }
    finish(&rpm_path, w)
}

fn read_channels(path: &Path, kind: &str, rate_key: &str) -> CliResult<(RecordingMeta, Vec<Channel>)> {
    let (header, r) = open(path)?;
    expect_kind(path, &header, &[kind])?;
    let meta = RecordingMeta::from_header(&header)?;
    let rate: f64 = header.parse_field(rate_key)?;
    let mut rdr = csv_reader(r);
    let names: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    if names.len() < 2 || names[0] != "t_s" {
        return Err(CliError::data(format!("{}: expected columns t_s, <channels...>", path.display())));
    }
    let mut t0 = None;
    let mut columns = vec![Vec::new(); names.len() - 1];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i as u64 + 4;
        let t = parse_f64(path, line, &rec[0])?;
        let t0 = *t0.get_or_insert(t);
        if (t0 + i as f64 / rate - t).abs() > 1e-6 {
            return Err(CliError::data(format!("{}: line {line}: timestamp off the {rate} Hz grid", path.display())));
        }
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(parse_f64(path, line, rec.get(c + 1).unwrap_or(""))?);
        }
    }
    let channels = names[1..]
        .iter()
        .zip(columns)
        .map(|(name, samples)| Channel::new(name.clone(), rate, t0.unwrap_or(0.0), samples))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok((meta, channels))
}

/// Reads the two files written by [`write_multirate`].
pub fn read_multirate(gyro_path: &Path, rpm_path: &Path) -> CliResult<RawRecording> {
    let (meta, gyro) = read_channels(gyro_path, "recording-gyro", "gyro_rate_hz")?;
    let (rpm_meta, mut rpm) = read_channels(rpm_path, "recording-rpm", "rpm_rate_hz")?;
    if rpm_meta != meta {
        return Err(CliError::data("gyro and rpm files describe different runs"));
    }
    if rpm.len() != 1 {
        return Err(CliError::data(format!("{}: expected a single rpm column", rpm_path.display())));
    }
    let expected = gyro_channel_names();
    if gyro.iter().map(Channel::name).ne(expected.iter().map(String::as_str)) {
        return Err(CliError::data(format!("{}: unexpected gyro channel names", gyro_path.display())));
    }
    Ok(RawRecording::new(gyro, rpm.remove(0), meta.schedule, meta.impeller, meta.seed)?)
}

/// Writes a dataset: `row` (provenance), the feature columns, then `rpm`.
pub fn write_dataset(path: &Path, ds: &Dataset, header: &Header) -> CliResult<()> {
    let mut w = csv_writer(create(path, header)?);
    let mut names = vec!["row".to_string()];
    names.extend(ds.column_names().iter().cloned());
    names.push("rpm".into());
    w.write_record(&names).map_err(|e| csv_err(path, e))?;
    let mut record = Vec::with_capacity(names.len());
    for (i, row) in ds.features().iter_rows().enumerate() {
        record.clear();
        record.push(ds.provenance()[i].to_string());
        record.extend(row.iter().map(|&v| fmt_value(v)));
        record.push(fmt_value(ds.target()[i]));
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_dataset(path: &Path) -> CliResult<(Header, Dataset)> {
    let (header, r) = open(path)?;
    expect_kind(path, &header, &["dataset"])?;
    let mut rdr = csv_reader(r);
    let names: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    if names.len() < 2 || names[0] != "row" || names[names.len() - 1] != "rpm" {
        return Err(CliError::data(format!("{}: expected columns row, <features...>, rpm", path.display())));
    }
    let p = names.len() - 2;
    let mut values = Vec::new();
    let mut target = Vec::new();
    let mut provenance = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i as u64 + 4;
        provenance.push(
            rec[0]
                .parse()
                .map_err(|_| CliError::data(format!("{}: line {line}: bad row index", path.display())))?,
        );
        for j in 0..p {
            values.push(parse_f64(path, line, &rec[j + 1])?);
        }
        target.push(parse_f64(path, line, &rec[p + 1])?);
    }
    let features = Matrix::new(target.len(), p, values)?;
    let ds = Dataset::new(features, target, names[1..=p].to_vec(), provenance)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok((header, ds))
}

/// Header of a dataset produced by `reduction` from a recording.
pub fn dataset_header(reduction: &Reduction, meta: &RecordingMeta) -> Header {
    Header::new("dataset")
        .with("reduction", reduction.label())
        .with("impeller", meta.impeller.as_str())
        .with("seed", meta.seed)
}

fn status_fields(row: &ReportRow) -> (&'static str, &str) {
    match &row.status {
        CellStatus::Ok => ("ok", ""),
        CellStatus::Failed(msg) => ("failed", msg.as_str()),
    }
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "cell", "config_id", "reduction", "split", "model", "status", "nmse_train", "nmse_test", "n_train", "n_test",
    "seed", "error",
];

pub fn write_report(path: &Path, report: &ExperimentReport, header: &Header) -> CliResult<()> {
    let mut w = csv_writer(create(path, header)?);
    w.write_record(REPORT_COLUMNS).map_err(|e| csv_err(path, e))?;
    for row in &report.rows {
        let (status, error) = status_fields(row);
        w.write_record([
            row.cell.to_string(),
            row.config_id.clone(),
            row.reduction.label(),
            row.split.to_string(),
            row.model.to_string(),
            status.into(),
            fmt_nmse(row.nmse_train),
            fmt_nmse(row.nmse_test),
            row.n_train.to_string(),
            row.n_test.to_string(),
            row.seed.to_string(),
            error.into(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub const FIGURE_FILES: [&str; 4] =
    ["fig2_downsampling.csv", "fig3_binning_shuffled.csv", "fig4_binning_partitioned.csv", "fig5_health.csv"];

/// Writes the per-figure files for `report` and `health` into `dir`.
pub fn write_figures(dir: &Path, report: &ExperimentReport, health: &HealthReport, header: &Header) -> CliResult<()> {
    let path = dir.join(FIGURE_FILES[0]);
    let mut w = csv_writer(create(&path, &Header { kind: "figure-downsampling".into(), ..header.clone() })?);
    w.write_record(["fraction", "split", "model", "nmse_train", "nmse_test", "status"]).map_err(|e| csv_err(&path, e))?;
    for row in &report.rows {
        if let Reduction::Downsample(f) = row.reduction {
            w.write_record([
                fmt_value(f),
                row.split.to_string(),
                row.model.to_string(),
                fmt_nmse(row.nmse_train),
                fmt_nmse(row.nmse_test),
                status_fields(row).0.into(),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    finish(&path, w)?;

    for (file, split, kind) in [
        (FIGURE_FILES[1], fanwatch_core::eval::SplitKind::Shuffled, "figure-binning-shuffled"),
        (FIGURE_FILES[2], fanwatch_core::eval::SplitKind::Partitioned, "figure-binning-partitioned"),
    ] {
        let path = dir.join(file);
        let mut w = csv_writer(create(&path, &Header { kind: kind.into(), ..header.clone() })?);
        w.write_record(["bin_size", "features", "model", "nmse_train", "nmse_test", "status"])
            .map_err(|e| csv_err(&path, e))?;
        for row in report.rows.iter().filter(|r| r.split == split) {
            if let Reduction::Bin(cfg) = row.reduction {
                w.write_record([
                    cfg.size.to_string(),
                    cfg.features.label(),
                    row.model.to_string(),
                    fmt_nmse(row.nmse_train),
                    fmt_nmse(row.nmse_test),
                    status_fields(row).0.into(),
                ])
                .map_err(|e| csv_err(&path, e))?;
            }
        }
        finish(&path, w)?;
    }

    write_health_points(&dir.join(FIGURE_FILES[3]), health, header)
}

/// Prediction-versus-actual pairs of a health evaluation.
pub fn write_health_points(path: &Path, health: &HealthReport, header: &Header) -> CliResult<()> {
    let header = Header { kind: "figure-health".into(), ..header.clone() }.with("config_id", &health.config_id);
    let mut w = csv_writer(create(path, &header)?);
    w.write_record(["impeller", "row", "actual", "predicted"]).map_err(|e| csv_err(path, e))?;
    for p in &health.points {
        w.write_record([p.impeller.as_str().to_string(), p.row.to_string(), fmt_value(p.actual), fmt_value(p.predicted)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Single-row summary of a health evaluation.
pub fn write_health_report(path: &Path, health: &HealthReport, header: &Header) -> CliResult<()> {
    let mut w = csv_writer(create(path, header)?);
    w.write_record(["config_id", "model", "nmse_healthy", "nmse_damaged", "ratio"]).map_err(|e| csv_err(path, e))?;
    w.write_record([
        health.config_id.clone(),
        health.model.to_string(),
        fmt_nmse(Some(health.nmse_healthy)),
        fmt_nmse(Some(health.nmse_damaged)),
        fmt_nmse(health.ratio),
    ])
    .map_err(|e| csv_err(path, e))?;
    finish(path, w)
}
