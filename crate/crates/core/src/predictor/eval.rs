//! Test-grid scoring and the per-family evaluation report.

use std::fmt::Write as _;

use super::model::HitRatePredictor;
use super::TrainingSet;
use crate::error::{Error, Result};
use crate::workload::Family;

pub const EVAL_CSV_HEADER: &str = "family,model_kind,mse";

/// Mean squared error (in squared percentage points) over every test row.
pub fn evaluate<P: HitRatePredictor + ?Sized>(model: &P, test: &TrainingSet) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let xs: Vec<_> = test.rows.iter().map(|r| r.0).collect();
    let preds = model.predict_hits(&xs)?;
    let sse: f64 = preds.iter().zip(&test.rows).map(|(p, (_, t))| (p - t).powi(2)).sum();
    Ok(sse / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub family: Family,
    pub model_kind: String,
    pub mse: f64,
}

pub fn eval_report_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from(EVAL_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{:.4}", r.family, r.model_kind, r.mse);
    }
    s
}
