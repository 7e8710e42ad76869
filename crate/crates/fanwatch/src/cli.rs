use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fanwatch_core::eval::{evaluate, health_eval, ModelKind};
use fanwatch_core::preprocess::{remove_ascends, BinConfig, FeatureSet, Reduction};
use fanwatch_core::splits::{partitioned_split, shuffled_split, PartitionPlan};
use fanwatch_core::synth::generate_run_with_budget;
use fanwatch_core::{AlignedTable, Dataset, Impeller, RawRecording};

use crate::config::{parse_cell_id, RunConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{self, dataset_header, Header, RecordingMeta};
use crate::modelio;
use crate::parallel;

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "FANWATCH_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "fanwatch", version, about = "Data reduction and rpm modelling for radial fan sensor runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Configuration file, or `default` for the built-in defaults.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> CliResult<RunConfig> {
        RunConfig::load(self.config.as_deref())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ImpellerArg {
    Healthy,
    Damaged,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Downsample,
    Bin,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Shuffled,
    Partitioned,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Lr,
    Rf,
}

#[derive(Debug, Args)]
pub struct ReductionArgs {
    /// Reduction as a label such as `ds-0.25` or `bin-2500-mean+std`.
    #[arg(long, conflicts_with_all = ["mode", "fraction", "size", "features"])]
    pub reduction: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Fraction of rows kept by downsampling.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Rows per bin.
    #[arg(long)]
    pub size: Option<usize>,
    /// Bin features: names joined by `,` or `+`, or `all`.
    #[arg(long)]
    pub features: Option<String>,
}

impl ReductionArgs {
    fn resolve(&self) -> CliResult<Reduction> {
        let reduction = match (&self.reduction, self.mode) {
            (Some(label), _) => label.parse()?,
            (None, Some(ModeArg::Downsample)) => {
                if self.size.is_some() || self.features.is_some() {
                    return Err(CliError::config("--size and --features apply to --mode bin"));
                }
                Reduction::Downsample(self.fraction.ok_or_else(|| CliError::config("--mode downsample needs --fraction"))?)
            }
            (None, Some(ModeArg::Bin)) => {
                if self.fraction.is_some() {
                    return Err(CliError::config("--fraction applies to --mode downsample"));
                }
                let size = self.size.ok_or_else(|| CliError::config("--mode bin needs --size"))?;
                let features: FeatureSet = self.features.as_deref().unwrap_or("mean").parse()?;
                Reduction::Bin(BinConfig { size, features })
            }
            (None, None) => return Err(CliError::config("give --reduction or --mode")),
        };
        reduction.validate()?;
        Ok(reduction)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a test run and write it as a recording.
    Generate {
        #[arg(long, value_enum)]
        impeller: ImpellerArg,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        config: ConfigArg,
        /// Output file; a directory with `--raw-multirate`.
        #[arg(long)]
        out: PathBuf,
        /// Write `gyro.csv` and `rpm.csv` at their native rates instead.
        #[arg(long)]
        raw_multirate: bool,
    },
    /// Align multi-rate `gyro.csv` and `rpm.csv` into one recording.
    Align {
        #[arg(long)]
        gyro: PathBuf,
        #[arg(long)]
        rpm: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a recording to a dataset by downsampling or binning.
    Reduce {
        #[command(flatten)]
        reduction: ReductionArgs,
        /// Reduce ramp rows too instead of removing them first.
        #[arg(long)]
        keep_ramps: bool,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split into `train.csv` and `test.csv`.
    Split {
        #[arg(long, value_enum)]
        split: SplitArg,
        /// A dataset for `shuffled`, a recording for `partitioned`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Shuffling seed.
        #[arg(long, required_if_eq("split", "shuffled"))]
        seed: Option<u64>,
        /// Training share; the config value when absent.
        #[arg(long)]
        ratio: Option<f64>,
        #[command(flatten)]
        reduction: ReductionArgs,
        /// Training plateaus, e.g. `1,3,5,7`; the config value when absent.
        #[arg(long, value_delimiter = ',')]
        train_plateaus: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        test_plateaus: Option<Vec<u32>>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit a model on a training dataset.
    Train {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long = "in")]
        input: PathBuf,
        /// Forest seed.
        #[arg(long, required_if_eq("model", "rf"))]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on training and test datasets.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Run the experiment grid and write the report and figure data.
    Grid {
        #[command(flatten)]
        config: ConfigArg,
        /// Healthy recording; generated from the config when absent.
        #[arg(long, requires = "damaged")]
        healthy: Option<PathBuf>,
        #[arg(long, requires = "healthy")]
        damaged: Option<PathBuf>,
        /// Master seed; the config value when absent.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score a healthy-trained model on healthy and damaged data.
    Health {
        #[arg(long)]
        model: PathBuf,
        /// Recording or dataset.
        #[arg(long)]
        healthy: PathBuf,
        #[arg(long)]
        damaged: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for `fig5_health.csv`; next to `--out` when absent.
        #[arg(long)]
        figures: Option<PathBuf>,
    },
    /// Print or check configuration files.
    Config {
        /// Print the documented default configuration.
        #[arg(long, conflicts_with = "check")]
        emit_default: bool,
        /// Validate a configuration file.
        #[arg(long)]
        check: Option<PathBuf>,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { impeller, seed, config, out, raw_multirate } => {
            let cfg = config.load()?;
            let (impeller, profile) = match impeller {
                ImpellerArg::Healthy => (Impeller::Healthy, cfg.healthy_profile()),
                ImpellerArg::Damaged => (Impeller::Damaged, cfg.damaged_profile()),
            };
            let rec = generate_run_with_budget(&cfg.schedule(), &profile, impeller, seed, cfg.run.sample_budget)?;
            if raw_multirate {
                fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
                formats::write_multirate(&out, &rec)
            } else {
                formats::write_recording(&out, &rec)
            }
        }
        Command::Align { gyro, rpm, out } => formats::write_recording(&out, &formats::read_multirate(&gyro, &rpm)?),
        Command::Reduce { reduction, keep_ramps, input, out } => {
            let reduction = reduction.resolve()?;
            let rec = formats::read_recording(&input)?;
            let table = if keep_ramps { rec.table } else { remove_ascends(&rec.table)? };
            let ds = reduction.apply(&table)?;
            formats::write_dataset(&out, &ds, &dataset_header(&reduction, &rec.meta))
        }
        Command::Split { split, input, seed, ratio, reduction, train_plateaus, test_plateaus, config, out_dir } => {
            let cfg = config.load()?;
            let (header, split) = match split {
                SplitArg::Shuffled => {
                    let (header, ds) = formats::read_dataset(&input)?;
                    let seed = seed.ok_or_else(|| CliError::config("shuffled split needs --seed"))?;
                    (header.with("split", "shuffled"), shuffled_split(&ds, ratio.unwrap_or(cfg.grid.train_ratio), seed)?)
                }
                SplitArg::Partitioned => {
                    let reduction = reduction.resolve()?;
                    let rec = formats::read_recording(&input)?;
                    let mut plan: PartitionPlan = cfg.plan();
                    if let Some(t) = train_plateaus {
                        plan.train_steps = t.into_iter().collect();
                    }
                    if let Some(t) = test_plateaus {
                        plan.test_steps = t.into_iter().collect();
                    }
                    plan.excluded_steps.retain(|k| !plan.train_steps.contains(k) && !plan.test_steps.contains(k));
                    let table = remove_ascends(&rec.table)?;
                    let header = dataset_header(&reduction, &rec.meta).with("split", "partitioned");
                    (header, partitioned_split(&table, &plan, &reduction)?)
                }
            };
            fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
            formats::write_dataset(&out_dir.join("train.csv"), split.train(), &header.clone().with("part", "train"))?;
            formats::write_dataset(&out_dir.join("test.csv"), split.test(), &header.with("part", "test"))
        }
        Command::Train { model, input, seed, config, jobs, out } => {
            let cfg = config.load()?;
            let (header, ds) = formats::read_dataset(&input)?;
            let kind = match model {
                ModelArg::Lr => ModelKind::Lr,
                ModelArg::Rf => ModelKind::Rf,
            };
            let pool = parallel::pool(jobs)?;
            let fitted = pool.install(|| parallel::fit_model_parallel(kind, &ds, &cfg.forest_params(), seed.unwrap_or(0)))?;
            let mut model_header = Header::new("model");
            if let Some(r) = header.get("reduction") {
                model_header = model_header.with("reduction", r);
            }
            modelio::write_model(&out, &fitted, &model_header)
        }
        Command::Evaluate { model, train, test } => {
            let model = modelio::read_model(&model)?.model;
            let (_, train) = formats::read_dataset(&train)?;
            let (_, test) = formats::read_dataset(&test)?;
            let split = fanwatch_core::SplitPair::new(train, test)?;
            let scores = evaluate(&model, &split)?;
            println!("nmse_train={}\nnmse_test={}", scores.train, scores.test);
            Ok(())
        }
        Command::Grid { config, healthy, damaged, seed, jobs, out_dir } => {
            let cfg = config.load()?;
            let mut grid = cfg.grid_config()?;
            if let Some(s) = seed {
                grid.master_seed = s;
            }
            let pool = parallel::pool(jobs)?;
            let (healthy_table, damaged_table, h_meta, d_meta) = match (healthy, damaged) {
                (Some(h), Some(d)) => {
                    let h = formats::read_recording(&h)?;
                    let d = formats::read_recording(&d)?;
                    (remove_ascends(&h.table)?, remove_ascends(&d.table)?, h.meta, d.meta)
                }
                _ => {
                    let schedule = cfg.schedule();
                    let budget = cfg.run.sample_budget;
                    let gen = |impeller, profile| -> CliResult<RawRecording> {
                        Ok(generate_run_with_budget(&schedule, &profile, impeller, grid.master_seed, budget)?)
                    };
                    let h = gen(Impeller::Healthy, cfg.healthy_profile())?;
                    let d = gen(Impeller::Damaged, cfg.damaged_profile())?;
                    let tables = (fanwatch_core::eval::prepare_table(&h)?, fanwatch_core::eval::prepare_table(&d)?);
                    (tables.0, tables.1, RecordingMeta::of(&h), RecordingMeta::of(&d))
                }
            };
            let report = parallel::run_grid_on(&pool, &healthy_table, &grid);
            let cell = parse_cell_id(&cfg.health.figure_config)?;
            let health = parallel::health_cell_parallel(&pool, &healthy_table, &damaged_table, &cell, &grid)?;
            let header = Header::new("report")
                .with("master_seed", grid.master_seed)
                .with("healthy_seed", h_meta.seed)
                .with("damaged_seed", d_meta.seed)
                .with("plateau_s", h_meta.schedule.plateau_s);
            fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
            formats::write_report(&out_dir.join("report.csv"), &report, &header)?;
            formats::write_figures(&out_dir, &report, &health, &header)
        }
        Command::Health { model, healthy, damaged, out, figures } => {
            let file = modelio::read_model(&model)?;
            let reduction = file.header.get("reduction").map(str::parse::<Reduction>).transpose()?;
            let h = load_health_input(&healthy, reduction.as_ref())?;
            let d = load_health_input(&damaged, reduction.as_ref())?;
            if h.0 != d.0 {
                return Err(CliError::data(format!(
                    "healthy and damaged data were reduced differently ({} vs {})",
                    h.0.as_deref().unwrap_or("unknown"),
                    d.0.as_deref().unwrap_or("unknown")
                )));
            }
            let config_id = h.0.clone().unwrap_or_else(|| "unknown".into());
            let config_id = format!("{config_id}/{}", file.model.kind());
            let report = health_eval(&file.model, &h.1, &d.1, &config_id)?;
            let header = Header::new("health").with("config_id", &config_id);
            formats::write_health_report(&out, &report, &header)?;
            let dir = figures.unwrap_or_else(|| out.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
            fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            formats::write_health_points(&dir.join(formats::FIGURE_FILES[3]), &report, &header)
        }
        Command::Config { emit_default, check } => {
            if let Some(path) = check {
                RunConfig::load(Some(&path))?;
                println!("ok");
            } else if emit_default {
                std::io::stdout()
                    .write_all(RunConfig::default_toml().as_bytes())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            } else {
                return Err(CliError::config("give --emit-default or --check FILE"));
            }
            Ok(())
        }
    }
}

/// A dataset as-is, or a recording reduced like the model's training data.
fn load_health_input(path: &Path, reduction: Option<&Reduction>) -> CliResult<(Option<String>, Dataset)> {
    let header = formats::read_header(path)?;
    if header.kind == "dataset" {
        let (header, ds) = formats::read_dataset(path)?;
        return Ok((header.get("reduction").map(String::from), ds));
    }
    let reduction =
        reduction.ok_or_else(|| CliError::data("model file does not record its reduction; pass datasets instead"))?;
    let rec = formats::read_recording(path)?;
    let table: AlignedTable = remove_ascends(&rec.table)?;
    Ok((Some(reduction.label()), reduction.apply(&table)?))
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let msg = e.kind().to_string().replace('"', "\\\"");
            eprintln!("error kind=usage msg=\"{msg}\"");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.kind().exit_code())
        }
    }
}
