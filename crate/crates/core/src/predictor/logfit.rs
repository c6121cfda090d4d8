//! Baseline: least-squares fit of `hit = a + b ln(cache_gb)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogFitModel {
    pub a: f64,
    pub b: f64,
}

impl LogFitModel {
    pub fn predict_raw(&self, cache_gb: f64) -> f64 {
        self.a + self.b * cache_gb.ln()
    }
}

/// Closed-form regression of `y` on `[1, ln x]`.
pub fn fit_log(points: &[(f64, f64)]) -> Result<LogFitModel> {
    if let Some(&(x, _)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0) || !y.is_finite() || !x.is_finite())
    {
        return Err(Error::invalid(format!("log fit needs positive finite x, got {x}")));
    }
    let distinct = points.iter().any(|p| (p.0 - points[0].0).abs() > 1e-12);
    if points.len() < 2 || !distinct {
        return Err(Error::invalid("log fit needs at least two distinct cache sizes"));
    }
    let n = points.len() as f64;
    let lx_mean = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x.ln() - lx_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let b = sxy / sxx;
    Ok(LogFitModel {
        a: y_mean - b * lx_mean,
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::gb_to_objects;
    use crate::workload::keyspace_from_gb;

    fn grid() -> Vec<f64> {
        (1..=40).map(|i| i as f64 / 10.0).collect()
    }

    #[test]
    fn recovers_exact_log_curve() {
        let pts: Vec<(f64, f64)> = grid().into_iter().map(|x| (x, 2.0 + 3.0 * x.ln())).collect();
        let m = fit_log(&pts).unwrap();
        assert!((m.a - 2.0).abs() < 1e-9 && (m.b - 3.0).abs() < 1e-9, "{m:?}");
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let pts: Vec<(f64, f64)> = grid()
            .into_iter()
            .map(|x| (x, (x * 7.0).sin() * 10.0 + x * x))
            .collect();
        let m = fit_log(&pts).unwrap();
        let (mut r1, mut rl) = (0.0, 0.0);
        for &(x, y) in &pts {
            let r = y - m.predict_raw(x);
            r1 += r;
            rl += r * x.ln();
        }
        assert!(r1.abs() < 1e-8 && rl.abs() < 1e-8, "{r1} {rl}");
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(fit_log(&[(1.0, 5.0)]).is_err());
        assert!(fit_log(&[(1.0, 5.0), (1.0, 6.0)]).is_err());
        assert!(fit_log(&[(0.0, 5.0), (1.0, 6.0)]).is_err());
    }

    #[test]
    fn cannot_track_uniform_curve() {
        // Uniform truth over 3 GB of data: linear in cache size until full.
        let k = keyspace_from_gb(3.0).unwrap().key_count as f64;
        let pts: Vec<(f64, f64)> = grid()
            .into_iter()
            .map(|c| (c, (100.0 * gb_to_objects(c) as f64 / k).min(100.0)))
            .collect();
        let m = fit_log(&pts).unwrap();
        let worst = pts
            .iter()
            .map(|&(x, y)| (m.predict_raw(x) - y).abs())
            .fold(0.0, f64::max);
        assert!(worst > 10.0, "{worst}");
    }
}
