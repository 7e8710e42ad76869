//! NMSE scoring, the experiment grid and healthy-versus-damaged evaluation.
//!
//! NMSE is the mean squared error divided by the population variance of the
//! actual values of the partition being scored, so predicting that
//! partition's mean scores exactly 1.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::forest::{fit_rf, ForestModel, ForestParams};
use crate::linreg::{fit_ols, LinearModel};
use crate::matrix::Matrix;
use crate::model::{AlignedTable, Dataset, Impeller, RawRecording, SplitPair};
use crate::preprocess::{forward_fill_align, remove_ascends, BinConfig, FeatureSet, Reduction};
use crate::rng::derive_seed;
use crate::splits::{partitioned_split, shuffled_split, PartitionPlan, DEFAULT_TRAIN_RATIO};
use crate::stats;

pub fn nmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch { left: predicted.len(), right: actual.len() });
    }
    if actual.is_empty() {
        return Err(Error::Empty("values to score"));
    }
    let var = stats::population_variance(actual)?;
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let residuals: Vec<f64> = predicted.iter().zip(actual).map(|(p, a)| p - a).collect();
    let mse = stats::mean(&residuals.iter().map(|r| r * r).collect::<Vec<_>>())?;
    Ok(mse / var)
}

/// A fitted model that maps feature rows to rpm predictions.
pub trait Regressor {
    fn predict(&self, features: &Matrix) -> Result<Vec<f64>>;
    fn column_names(&self) -> &[String];
}

impl Regressor for LinearModel {
    fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        LinearModel::predict(self, features)
    }

    fn column_names(&self) -> &[String] {
        LinearModel::column_names(self)
    }
}

impl Regressor for ForestModel {
    fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        ForestModel::predict(self, features)
    }

    fn column_names(&self) -> &[String] {
        ForestModel::column_names(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Linear(LinearModel),
    Forest(ForestModel),
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Linear(_) => ModelKind::Lr,
            FittedModel::Forest(_) => ModelKind::Rf,
        }
    }
}

impl Regressor for FittedModel {
    fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        match self {
            FittedModel::Linear(m) => m.predict(features),
            FittedModel::Forest(m) => m.predict(features),
        }
    }

    fn column_names(&self) -> &[String] {
        match self {
            FittedModel::Linear(m) => m.column_names(),
            FittedModel::Forest(m) => m.column_names(),
        }
    }
}

/// NMSE of `model` on `ds`, after checking that the columns agree.
pub fn score<M: Regressor + ?Sized>(model: &M, ds: &Dataset) -> Result<f64> {
    if model.column_names() != ds.column_names() {
        return Err(Error::ColumnMismatch { expected: model.column_names().len(), got: ds.n_features() });
    }
    nmse(&model.predict(ds.features())?, ds.target())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub train: f64,
    pub test: f64,
}

/// Scores an already fitted model on both partitions.
pub fn evaluate<M: Regressor + ?Sized>(model: &M, split: &SplitPair) -> Result<Scores> {
    Ok(Scores { train: score(model, split.train())?, test: score(model, split.test())? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitKind {
    Shuffled,
    Partitioned,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Shuffled => "shuffled",
            SplitKind::Partitioned => "partitioned",
        }
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffled" => Ok(SplitKind::Shuffled),
            "partitioned" => Ok(SplitKind::Partitioned),
            _ => Err(Error::InvalidConfig(format!("unknown split {s:?}"))),
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Lr,
    Rf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Rf => "rf",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(ModelKind::Lr),
            "rf" => Ok(ModelKind::Rf),
            _ => Err(Error::InvalidConfig(format!("unknown model {s:?}"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DOWNSAMPLE_FRACTIONS: [f64; 6] = [0.5, 0.25, 0.1, 0.01, 0.001, 0.0001];
pub const BIN_SIZES: [usize; 7] = [100, 500, 1000, 2500, 5000, 10_000, 50_000];
pub const FEATURE_PRESETS: [FeatureSet; 3] = [FeatureSet::MEAN, FeatureSet::MEAN_STD, FeatureSet::ALL];

/// The six downsampling fractions followed by every bin size with every
/// feature preset: 27 reductions.
pub fn default_reductions() -> Vec<Reduction> {
    let mut out: Vec<Reduction> = DOWNSAMPLE_FRACTIONS.iter().map(|&f| Reduction::Downsample(f)).collect();
    for size in BIN_SIZES {
        for features in FEATURE_PRESETS {
            out.push(Reduction::Bin(BinConfig { size, features }));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub reductions: Vec<Reduction>,
    pub splits: Vec<SplitKind>,
    pub models: Vec<ModelKind>,
    pub train_ratio: f64,
    pub plan: PartitionPlan,
    /// Forest hyperparameters; the seed is replaced by each cell's seed.
    pub forest: ForestParams,
    pub master_seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            reductions: default_reductions(),
            splits: alloc::vec![SplitKind::Shuffled, SplitKind::Partitioned],
            models: alloc::vec![ModelKind::Lr, ModelKind::Rf],
            train_ratio: DEFAULT_TRAIN_RATIO,
            plan: PartitionPlan::default(),
            forest: ForestParams::default(),
            master_seed: 1,
        }
    }
}

impl GridConfig {
    /// Cells in report order: reduction, then split, then model.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for &reduction in &self.reductions {
            for &split in &self.splits {
                for &model in &self.models {
                    cells.push(GridCell { index: cells.len(), reduction, split, model });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub index: usize,
    pub reduction: Reduction,
    pub split: SplitKind,
    pub model: ModelKind,
}

impl GridCell {
    /// `<reduction>/<split>/<model>`, e.g. `bin-5000-all/shuffled/rf`.
    pub fn config_id(&self) -> String {
        format!("{}/{}/{}", self.reduction.label(), self.split, self.model)
    }

    /// Seed of this cell; depends only on the master seed and the config id.
    pub fn seed(&self, master_seed: u64) -> u64 {
        derive_seed(master_seed, &self.config_id())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub cell: usize,
    pub config_id: String,
    pub reduction: Reduction,
    pub split: SplitKind,
    pub model: ModelKind,
    pub status: CellStatus,
    pub nmse_train: Option<f64>,
    pub nmse_test: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, config_id: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.config_id == config_id)
    }
}

/// Aligns a recording onto the gyro grid and removes the ramps.
pub fn prepare_table(rec: &RawRecording) -> Result<AlignedTable> {
    remove_ascends(&forward_fill_align(rec)?)
}

/// Reduces and splits `table` as the cell prescribes, shuffling with `seed`.
pub fn build_split(table: &AlignedTable, cell: &GridCell, cfg: &GridConfig, seed: u64) -> Result<SplitPair> {
    match cell.split {
        SplitKind::Shuffled => shuffled_split(&cell.reduction.apply(table)?, cfg.train_ratio, seed),
        SplitKind::Partitioned => partitioned_split(table, &cfg.plan, &cell.reduction),
    }
}

/// Fits `kind` on `ds`; forests use `forest` with its seed set to `seed`.
/// Fits one grid model. A linear cell with fewer training rows than features
/// is rejected: the minimum-norm solution exists but is not a regression.
pub fn fit_model(kind: ModelKind, ds: &Dataset, forest: &ForestParams, seed: u64) -> Result<FittedModel> {
    match kind {
        ModelKind::Lr if ds.len() < ds.n_features() => Err(Error::TooShort { needed: ds.n_features(), got: ds.len() }),
        ModelKind::Lr => fit_ols(ds).map(FittedModel::Linear),
        ModelKind::Rf => fit_rf(ds, &ForestParams { seed, ..forest.clone() }).map(FittedModel::Forest),
    }
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub row: ReportRow,
    pub model: Option<FittedModel>,
}

/// Runs one cell on a prepared table. Failures are recorded in the row.
pub fn run_cell(table: &AlignedTable, cell: &GridCell, cfg: &GridConfig) -> CellOutcome {
    run_cell_with(table, cell, cfg, fit_model)
}

/// [`run_cell`] with a caller-supplied fitting routine that must behave like
/// [`fit_model`], for example by fitting trees concurrently.
pub fn run_cell_with<F>(table: &AlignedTable, cell: &GridCell, cfg: &GridConfig, fit: F) -> CellOutcome
where
    F: Fn(ModelKind, &Dataset, &ForestParams, u64) -> Result<FittedModel>,
{
    let seed = cell.seed(cfg.master_seed);
    let mut row = ReportRow {
        cell: cell.index,
        config_id: cell.config_id(),
        reduction: cell.reduction,
        split: cell.split,
        model: cell.model,
        status: CellStatus::Ok,
        nmse_train: None,
        nmse_test: None,
        n_train: 0,
        n_test: 0,
        seed,
    };
    let result = build_split(table, cell, cfg, seed).and_then(|split| {
        row.n_train = split.train().len();
        row.n_test = split.test().len();
        let model = fit(cell.model, split.train(), &cfg.forest, seed)?;
        let scores = evaluate(&model, &split)?;
        Ok((model, scores))
    });
    match result {
        Ok((model, scores)) => {
            row.nmse_train = Some(scores.train);
            row.nmse_test = Some(scores.test);
            CellOutcome { row, model: Some(model) }
        }
        Err(e) => {
            row.status = CellStatus::Failed(e.to_string());
            CellOutcome { row, model: None }
        }
    }
}

/// Runs every cell of the grid on one recording, in cell order.
pub fn run_grid(healthy_run: &RawRecording, cfg: &GridConfig) -> Result<ExperimentReport> {
    let table = prepare_table(healthy_run)?;
    let rows = cfg.cells().iter().map(|cell| run_cell(&table, cell, cfg).row).collect();
    Ok(ExperimentReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HealthPoint {
    pub impeller: Impeller,
    /// Provenance of the row in its dataset.
    pub row: usize,
    pub actual: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HealthReport {
    pub config_id: String,
    pub model: ModelKind,
    pub nmse_healthy: f64,
    pub nmse_damaged: f64,
    /// `nmse_damaged / nmse_healthy`, absent when the healthy NMSE is 0.
    pub ratio: Option<f64>,
    pub points: Vec<HealthPoint>,
}

/// Scores a model trained on healthy data on whole healthy and damaged
/// datasets produced by the same preprocessing.
pub fn health_eval(model: &FittedModel, healthy: &Dataset, damaged: &Dataset, config_id: &str) -> Result<HealthReport> {
    let mut points = Vec::with_capacity(healthy.len() + damaged.len());
    let mut nmse_of = |impeller, ds: &Dataset| -> Result<f64> {
        if model.column_names() != ds.column_names() {
            return Err(Error::ColumnMismatch { expected: model.column_names().len(), got: ds.n_features() });
        }
        let predicted = model.predict(ds.features())?;
        let value = nmse(&predicted, ds.target())?;
        points.extend(ds.provenance().iter().zip(ds.target()).zip(&predicted).map(|((&row, &actual), &predicted)| {
            HealthPoint { impeller, row, actual, predicted }
        }));
        Ok(value)
    };
    let nmse_healthy = nmse_of(Impeller::Healthy, healthy)?;
    let nmse_damaged = nmse_of(Impeller::Damaged, damaged)?;
    Ok(HealthReport {
        config_id: config_id.into(),
        model: model.kind(),
        nmse_healthy,
        nmse_damaged,
        ratio: (nmse_healthy > 0.0).then(|| nmse_damaged / nmse_healthy),
        points,
    })
}

/// Fits the cell's model on the healthy table exactly as [`run_cell`] does,
/// then evaluates it on the whole reduced healthy and damaged tables.
pub fn health_cell(
    healthy: &AlignedTable,
    damaged: &AlignedTable,
    cell: &GridCell,
    cfg: &GridConfig,
) -> Result<HealthReport> {
    health_cell_with(healthy, damaged, cell, cfg, fit_model)
}

/// [`health_cell`] with a caller-supplied fitting routine.
pub fn health_cell_with<F>(
    healthy: &AlignedTable,
    damaged: &AlignedTable,
    cell: &GridCell,
    cfg: &GridConfig,
    fit: F,
) -> Result<HealthReport>
where
    F: Fn(ModelKind, &Dataset, &ForestParams, u64) -> Result<FittedModel>,
{
    let outcome = run_cell_with(healthy, cell, cfg, fit);
    let model = match (outcome.model, outcome.row.status) {
        (Some(m), _) => m,
        (None, CellStatus::Failed(msg)) => return Err(Error::Malformed(format!("cell {}: {msg}", cell.config_id()))),
        (None, CellStatus::Ok) => unreachable!("successful cells carry a model"),
    };
    health_eval(&model, &cell.reduction.apply(healthy)?, &cell.reduction.apply(damaged)?, &cell.config_id())
}
