//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 data or format problems, 4 when a run
//! ended with an AdminAlert (the QoS target could not be met from the pool).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{parse_distribution, ScenarioConfig, ScenarioKind, TenantSpec};
use super::report::report;
use super::scenarios::{
    dataset_seed, model_file_name, run_scenario, train_options, write_file, ACCURACY_FILE, EVAL_FILE,
};
use crate::error::{Error, Result};
use crate::estimator::AccuracyRow;
use crate::par::Exec;
use crate::predictor::{
    build_training_set, eval_report_csv, evaluate, save_model, train_model, DataGrid, EvalRow, ModelKind,
    SimulatorOracle, TrainingSet,
};
use crate::rng::derive_seed;
use crate::workload::{concat_phases, keyspace_from_gb, Family};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_QOS: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Format(_) | Error::State(_) | Error::Numeric(_) | Error::Training(_) | Error::Io { .. } => EXIT_DATA,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cachepilot",
    version,
    about = "Learning-based dynamic cache sizing on a simulated cache tier"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Base seed; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scenario JSON document; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceFormat {
    Bin,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Test,
}

fn family_arg(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn kind_arg(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn scenario_arg(s: &str) -> std::result::Result<ScenarioKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a key trace (single distribution or the configured phases).
    GenTrace {
        #[command(flatten)]
        common: Common,
        /// Distribution such as `uniform`, `zipf:0.7` or `ycsb-like`.
        #[arg(long)]
        dist: Option<String>,
        #[arg(long)]
        data_gb: Option<f64>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, value_enum, default_value_t = TraceFormat::Bin)]
        format: TraceFormat,
    },
    /// Label a family's training or testing grid with simulated hit rates.
    GenTraining {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = family_arg)]
        family: Family,
        #[arg(long, value_enum, default_value_t = Split::Train)]
        split: Split,
        #[arg(long)]
        queries_per_point: Option<usize>,
    },
    /// Train a hit-rate model and score it on the testing grid.
    Train {
        #[command(flatten)]
        common: Common,
        /// Training CSV from `gen-training`.
        #[arg(long)]
        data: PathBuf,
        /// Testing CSV; simulated from the testing grid when omitted.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Expected family of the training CSV.
        #[arg(long, value_parser = family_arg)]
        family: Option<Family>,
        #[arg(long, value_parser = kind_arg, default_value = "fcn")]
        kind: ModelKind,
        /// Overrides the network's epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        queries_per_point: Option<usize>,
    },
    /// Run a scenario and write its report files.
    Run {
        #[command(flatten)]
        common: Common,
        /// Scenario whose defaults apply when no config file is given.
        #[arg(long, value_parser = scenario_arg)]
        scenario: Option<ScenarioKind>,
        /// Directory holding `<family>-<kind>.model` files.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, value_parser = kind_arg)]
        model_kind: Option<ModelKind>,
    },
    /// Estimator accuracy versus sample count.
    AccuracyStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        data_gb: Option<f64>,
    },
    /// Summarise a run directory and write plot-ready data files.
    Report {
        #[command(flatten)]
        common: Common,
        /// Run directory; defaults to `--out`.
        dir: Option<PathBuf>,
    },
}

const DEFAULT_OUT: &str = "out";

fn load_config(common: &Common, kind: ScenarioKind) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::defaults(kind),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// What a command produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub stdout: String,
    pub alerts: usize,
}

impl Outcome {
    fn files(files: Vec<PathBuf>) -> Self {
        Self {
            files,
            ..Self::default()
        }
    }
}

pub fn execute(command: Command) -> Result<Outcome> {
    let exec = Exec::default();
    match command {
        Command::GenTrace {
            common,
            dist,
            data_gb,
            length,
            format,
        } => {
            let mut cfg = load_config(&common, ScenarioKind::SingleResize)?;
            if cfg.tenants.is_empty() {
                cfg.tenants.push(TenantSpec::default());
            }
            if let Some(d) = dist {
                cfg.tenants[0].distribution = parse_distribution(&d)?;
                cfg.phases.clear();
            }
            if let Some(g) = data_gb {
                cfg.tenants[0].data_gb = g;
            }
            if let Some(n) = length {
                cfg.trace_length = n;
                cfg.phases.clear();
            }
            cfg.validate()?;
            let t = &cfg.tenants[0];
            let mut trace = concat_phases(
                &cfg.workload_phases()?,
                keyspace_from_gb(t.data_gb)?,
                derive_seed(cfg.seed, 0),
            )?;
            trace.tenant_id = t.id.clone();
            let out = out_dir(&common);
            let path = match format {
                TraceFormat::Bin => write_file(&out, "trace.bin", trace.to_bytes())?,
                TraceFormat::Csv => {
                    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
                    let p = out.join("trace.csv");
                    trace.write_csv(&p)?;
                    p
                }
            };
            Ok(Outcome::files(vec![path]))
        }
        Command::GenTraining {
            common,
            family,
            split,
            queries_per_point,
        } => {
            let mut cfg = load_config(&common, ScenarioKind::TrainEval)?;
            if let Some(q) = queries_per_point {
                cfg.training.queries_per_point = q;
            }
            let (grid, s) = match split {
                Split::Train => (DataGrid::training(family), 0),
                Split::Test => (DataGrid::testing(family), 1),
            };
            let oracle = oracle(&cfg, exec)?;
            let set = build_training_set(&grid, &oracle, dataset_seed(cfg.seed, family, s))?;
            let name = format!("{}-{}.csv", family.name(), if s == 0 { "train" } else { "test" });
            Ok(Outcome::files(vec![write_file(
                &out_dir(&common),
                &name,
                set.to_csv(),
            )?]))
        }
        Command::Train {
            common,
            data,
            test,
            family,
            kind,
            epochs,
            queries_per_point,
        } => {
            let mut cfg = load_config(&common, ScenarioKind::TrainEval)?;
            if let Some(q) = queries_per_point {
                cfg.training.queries_per_point = q;
            }
            let train = TrainingSet::read_csv(&data)?;
            if let Some(f) = family.filter(|&f| f != train.family) {
                return Err(Error::format(format!(
                    "{} holds {} rows, expected {f}",
                    data.display(),
                    train.family
                )));
            }
            let test = match test {
                Some(p) => {
                    let t = TrainingSet::read_csv(&p)?;
                    if t.family != train.family {
                        return Err(Error::format(format!(
                            "{} holds {} rows, expected {}",
                            p.display(),
                            t.family,
                            train.family
                        )));
                    }
                    t
                }
                None => build_training_set(
                    &DataGrid::testing(train.family),
                    &oracle(&cfg, exec)?,
                    dataset_seed(cfg.seed, train.family, 1),
                )?,
            };
            let mut opts = train_options(&cfg, train.family);
            if let Some(e) = epochs {
                opts.fcn.epochs = e;
            }
            let model = train_model(kind, &train, &opts)?;
            let row = EvalRow {
                family: train.family,
                model_kind: kind.name().to_string(),
                mse: evaluate(&model, &test)?,
            };
            let out = out_dir(&common);
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let model_path = out.join(model_file_name(train.family, kind));
            save_model(&model, &model_path)?;
            let eval_path = write_file(&out, EVAL_FILE, eval_report_csv(std::slice::from_ref(&row)))?;
            Ok(Outcome {
                files: vec![model_path, eval_path],
                stdout: format!("{} {} test mse {:.4}\n", row.family, row.model_kind, row.mse),
                alerts: 0,
            })
        }
        Command::Run {
            common,
            scenario,
            models,
            model_kind,
        } => {
            let mut cfg = load_config(&common, scenario.unwrap_or(ScenarioKind::SingleResize))?;
            if let Some(s) = scenario.filter(|&s| s != cfg.scenario) {
                return Err(Error::invalid(format!(
                    "--scenario {s} conflicts with the config's {}",
                    cfg.scenario
                )));
            }
            if let Some(m) = models {
                cfg.models_dir = m;
            }
            if let Some(k) = model_kind {
                cfg.model_kind = k.name().to_string();
            }
            let r = run_scenario(&cfg, None, &out_dir(&common), exec)?;
            Ok(Outcome {
                files: r.files,
                stdout: String::new(),
                alerts: r.alerts,
            })
        }
        Command::AccuracyStudy {
            common,
            counts,
            trials,
            data_gb,
        } => {
            let mut cfg = load_config(&common, ScenarioKind::AccuracyStudy)?;
            if let Some(c) = counts {
                cfg.accuracy.sample_counts = c;
            }
            if let Some(t) = trials {
                cfg.accuracy.trials = t;
            }
            if let Some(g) = data_gb {
                cfg.accuracy.data_gb = g;
            }
            let rows = super::scenarios::run_accuracy_study(&cfg, exec)?;
            let path = write_file(&out_dir(&common), ACCURACY_FILE, AccuracyRow::to_csv(&rows))?;
            Ok(Outcome::files(vec![path]))
        }
        Command::Report { common, dir } => {
            let dir = dir.unwrap_or_else(|| out_dir(&common));
            let r = report(&dir)?;
            Ok(Outcome {
                files: r.files,
                stdout: r.text,
                alerts: 0,
            })
        }
    }
}

fn oracle(cfg: &ScenarioConfig, exec: Exec) -> Result<SimulatorOracle> {
    if cfg.training.queries_per_point < 2 {
        return Err(Error::invalid("queries_per_point must be at least 2"));
    }
    Ok(SimulatorOracle {
        exec,
        ..SimulatorOracle::with_queries(cfg.training.queries_per_point)
    })
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(o) => {
            print!("{}", o.stdout);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if o.alerts > 0 {
                eprintln!(
                    "error: {} AdminAlert(s) raised; the pool cannot meet the QoS target",
                    o.alerts
                );
                EXIT_QOS
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
