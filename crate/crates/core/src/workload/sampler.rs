use std::sync::Arc;

use super::{DistributionSpec, Family, KeySpace};
use crate::rng::{self, SimRng};

/// Exponential draws at or beyond this point are rejected; the rest of
/// `[0, X_MAX_EXPONENTIAL)` is stretched over the key space.
pub const X_MAX_EXPONENTIAL: f64 = 10.0;
/// Folded-normal draws at or beyond this point are rejected.
pub const X_MAX_GAUSSIAN: f64 = 4.0;

/// Draws key indices for one (distribution, key space) pair.
///
/// Every non-uniform family puts its mass on low key indices:
///
/// * uniform: `floor(u * K)`
/// * zipf: rank `r` in `1..=K` with `P(r) ~ r^-rho`, by binary search over the
///   cumulative table, key `r - 1`
/// * exponential: `x = -ln(u) / lambda`, rejected if `x >= 10`, key `floor(x / 10 * K)`
/// * gaussian: `x = |sigma * z|`, rejected if `x >= 4`, key `floor(x / 4 * K)`
#[derive(Debug, Clone)]
pub struct KeySampler {
    spec: DistributionSpec,
    key_count: u32,
    zipf_cdf: Option<Arc<[f64]>>,
}

impl KeySampler {
    pub fn new(spec: DistributionSpec, keyspace: KeySpace) -> Self {
        let zipf_cdf = (spec.family == Family::Zipf).then(|| zipf_cdf(keyspace.key_count as usize, spec.param));
        Self {
            spec,
            key_count: keyspace.key_count,
            zipf_cdf,
        }
    }

    pub fn spec(&self) -> DistributionSpec {
        self.spec
    }

    pub fn key_count(&self) -> u32 {
        self.key_count
    }

    #[inline]
    pub fn sample(&self, rng: &mut SimRng) -> u32 {
        let k = self.key_count as f64;
        let key = match self.spec.family {
            Family::Uniform => (rng::unit_f64(rng) * k) as u64,
            Family::Zipf => {
                let cdf = self.zipf_cdf.as_deref().expect("zipf table");
                let u = rng::unit_f64(rng);
                cdf.partition_point(|&c| c <= u) as u64
            }
            Family::Exponential => loop {
                let x = -rng::unit_f64_open0(rng).ln() / self.spec.param;
                if x < X_MAX_EXPONENTIAL {
                    break (x / X_MAX_EXPONENTIAL * k) as u64;
                }
            },
            Family::Gaussian => loop {
                let x = (self.spec.param * rng::standard_normal(rng)).abs();
                if x < X_MAX_GAUSSIAN {
                    break (x / X_MAX_GAUSSIAN * k) as u64;
                }
            },
        };
        key.min(self.key_count as u64 - 1) as u32
    }

    pub fn sample_n(&self, rng: &mut SimRng, n: usize) -> Vec<u32> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// One-off draw. Builds the Zipf table on every call; hot loops should hold a
/// [`KeySampler`] instead.
pub fn sample_key(spec: DistributionSpec, keyspace: KeySpace, rng: &mut SimRng) -> u32 {
    KeySampler::new(spec, keyspace).sample(rng)
}

fn zipf_cdf(n: usize, rho: f64) -> Arc<[f64]> {
    let mut cdf = Vec::with_capacity(n);
    let mut sum = 0.0;
    for r in 1..=n {
        sum += (r as f64).powf(-rho);
        cdf.push(sum);
    }
    for c in &mut cdf {
        *c /= sum;
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf.into()
}
