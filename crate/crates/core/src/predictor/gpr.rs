//! Gaussian-process regression with a constant times RBF kernel.
//!
//! `k(x, x') = cv * exp(-|x - x'|^2 / (2 ls^2))` on standardised features,
//! zero prior mean, and `noise` added to the kernel diagonal. Only the
//! posterior mean is served, so the model keeps the training inputs and
//! `alpha = (K + noise I)^-1 y`.

use serde::{Deserialize, Serialize};

use super::{FeatureVector, SizeTransform, Standardizer, TrainingSet};
use crate::error::{Error, Result};
use crate::workload::Family;

pub const DEFAULT_NOISE: f64 = 1e-6;
/// Inputs are log data size and log cache-to-data ratio, as for the network.
pub const SIZE_TRANSFORM: SizeTransform = SizeTransform::LogRatio;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprConfig {
    pub cv: f64,
    pub ls: f64,
    pub noise: f64,
}

impl Default for GprConfig {
    /// The sweep optimum shared by the Gaussian, exponential and Zipf sets.
    fn default() -> Self {
        Self {
            cv: 1000.0,
            ls: 1.0,
            noise: DEFAULT_NOISE,
        }
    }
}

impl GprConfig {
    /// Best (cv, ls) of the per-family sweep.
    pub fn best(family: Family) -> Self {
        match family {
            Family::Uniform => Self {
                cv: 1.0,
                ls: 10.0,
                noise: DEFAULT_NOISE,
            },
            _ => Self::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cv > 0.0 && self.ls > 0.0 && self.noise >= 0.0) || !self.cv.is_finite() || !self.ls.is_finite() {
            return Err(Error::invalid(format!(
                "gpr needs cv > 0, ls > 0, noise >= 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GprModel {
    pub config: GprConfig,
    pub standardizer: Standardizer,
    pub inputs: Vec<[f64; 3]>,
    pub alpha: Vec<f64>,
}

#[inline]
fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// In-place lower Cholesky factor of a dense row-major `n x n` matrix.
/// The strict upper triangle is left untouched.
pub fn cholesky(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let row_j = &a[j * n..j * n + j];
        let d = a[j * n + j] - row_j.iter().map(|v| v * v).sum::<f64>();
        if !(d > 0.0) {
            return Err(Error::Numeric(format!(
                "kernel matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        let (lo, hi) = a.split_at_mut((j + 1) * n);
        let row_j = &lo[j * n..j * n + j];
        for row_i in hi.chunks_exact_mut(n) {
            let dot: f64 = row_i[..j].iter().zip(row_j).map(|(x, y)| x * y).sum();
            row_i[j] = (row_i[j] - dot) / ljj;
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` given the lower factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&y[..i]).map(|(a, c)| a * c).sum();
        y[i] = (y[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = 0.0;
        for k in i + 1..n {
            s += l[k * n + i] * y[k];
        }
        y[i] = (y[i] - s) / l[i * n + i];
    }
    y
}

pub fn train_gpr(set: &TrainingSet, config: &GprConfig) -> Result<GprModel> {
    config.validate()?;
    if set.is_empty() {
        return Err(Error::Training("gpr needs at least one training row".into()));
    }
    let standardizer = set.standardizer(SIZE_TRANSFORM);
    let inputs: Vec<[f64; 3]> = set.rows.iter().map(|(x, _)| standardizer.apply(x)).collect();
    let n = inputs.len();
    let scale = -1.0 / (2.0 * config.ls * config.ls);
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = config.cv * (scale * sq_dist(&inputs[i], &inputs[j])).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += config.noise;
    }
    cholesky(&mut k, n)?;
    let alpha = cholesky_solve(&k, n, &set.targets());
    Ok(GprModel {
        config: *config,
        standardizer,
        inputs,
        alpha,
    })
}

impl GprModel {
    pub fn predict_raw(&self, x: &FeatureVector) -> f64 {
        let z = self.standardizer.apply(x);
        let scale = -1.0 / (2.0 * self.config.ls * self.config.ls);
        self.inputs
            .iter()
            .zip(&self.alpha)
            .map(|(xi, a)| a * self.config.cv * (scale * sq_dist(xi, &z)).exp())
            .sum()
    }
}
