//! Concurrent forest fitting and grid execution on a rayon pool.
//!
//! Every tree draws from its own substream and every cell from its own seed,
//! so results do not depend on the number of workers.

use fanwatch_core::eval::{
    fit_model, health_cell_with, prepare_table, run_cell_with, ExperimentReport, FittedModel, GridCell, GridConfig,
    HealthReport, ModelKind,
};
use fanwatch_core::forest::{fit_forest_tree, FeatureOrder, ForestModel, ForestParams};
use fanwatch_core::{AlignedTable, Dataset, RawRecording};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{CliError, CliResult};

pub fn pool(jobs: usize) -> CliResult<ThreadPool> {
    if jobs == 0 {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {jobs} workers: {e}")))
}

/// Same forest as [`fanwatch_core::forest::fit_rf`], trees fitted concurrently.
pub fn fit_rf_parallel(ds: &Dataset, params: &ForestParams) -> fanwatch_core::Result<ForestModel> {
    params.validate()?;
    let order = FeatureOrder::new(ds);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| fit_forest_tree(ds, &order, params, i))
        .collect::<fanwatch_core::Result<Vec<_>>>()?;
    ForestModel::from_trees(trees, params.clone(), ds.column_names().to_vec())
}

/// Drop-in for [`fit_model`] that fits forests with [`fit_rf_parallel`].
pub fn fit_model_parallel(
    kind: ModelKind,
    ds: &Dataset,
    forest: &ForestParams,
    seed: u64,
) -> fanwatch_core::Result<FittedModel> {
    match kind {
        ModelKind::Rf => fit_rf_parallel(ds, &ForestParams { seed, ..forest.clone() }).map(FittedModel::Forest),
        ModelKind::Lr => fit_model(kind, ds, forest, seed),
    }
}

/// Runs every cell on `table` inside `pool`; rows come back in cell order.
pub fn run_grid_on(pool: &ThreadPool, table: &AlignedTable, cfg: &GridConfig) -> ExperimentReport {
    let cells = cfg.cells();
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell_with(table, cell, cfg, fit_model_parallel).row)
            .collect()
    });
    ExperimentReport { rows }
}

pub fn run_grid_parallel(pool: &ThreadPool, rec: &RawRecording, cfg: &GridConfig) -> CliResult<ExperimentReport> {
    let table = prepare_table(rec)?;
    Ok(run_grid_on(pool, &table, cfg))
}

pub fn health_cell_parallel(
    pool: &ThreadPool,
    healthy: &AlignedTable,
    damaged: &AlignedTable,
    cell: &GridCell,
    cfg: &GridConfig,
) -> CliResult<HealthReport> {
    Ok(pool.install(|| health_cell_with(healthy, damaged, cell, cfg, fit_model_parallel))?)
}
