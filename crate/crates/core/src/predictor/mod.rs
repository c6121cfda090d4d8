//! Hit-rate regressors H(cache, d): a small fully connected network, a
//! Gaussian process, and a log-curve baseline, plus simulator-labelled
//! training data.

mod dataset;
mod eval;
pub mod fcn;
mod features;
pub mod gpr;
pub mod logfit;
mod model;

pub use dataset::{build_training_set, cache_grid, DataGrid, SimulatorOracle, TrainingSet, TRAINING_CSV_HEADER};
pub use eval::{eval_report_csv, evaluate, EvalRow, EVAL_CSV_HEADER};
pub use fcn::{train_fcn, Activation, FcnConfig, FcnModel, Loss, Regularizer};
pub use features::{FeatureVector, SizeTransform, Standardizer};
pub use gpr::{train_gpr, GprConfig, GprModel};
pub use logfit::{fit_log, LogFitModel};
pub use model::{load_model, save_model, HitRateModel, HitRatePredictor, ModelBody, ModelKind, MODEL_VERSION};

use crate::error::Result;

/// Training options for [`train_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub fcn: FcnConfig,
    pub gpr: GprConfig,
}

impl TrainOptions {
    pub fn for_family(family: crate::workload::Family) -> Self {
        Self {
            fcn: FcnConfig::tuned(family),
            gpr: GprConfig::best(family),
        }
    }
}

/// Trains one model of `kind` on `set`. The log baseline ignores data size
/// and parameter and regresses hit rate on `ln(cache_gb)` over every row.
pub fn train_model(kind: ModelKind, set: &TrainingSet, opts: &TrainOptions) -> Result<HitRateModel> {
    Ok(match kind {
        ModelKind::Fcn => HitRateModel::fcn(set.family, train_fcn(set, &opts.fcn)?),
        ModelKind::Gpr => HitRateModel::gpr(set.family, train_gpr(set, &opts.gpr)?),
        ModelKind::LogFit => {
            let pts: Vec<(f64, f64)> = set.rows.iter().map(|(x, t)| (x.cache_gb, *t)).collect();
            HitRateModel::logfit(set.family, fit_log(&pts)?)
        }
    })
}
