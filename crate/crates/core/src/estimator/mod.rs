//! Access-pattern estimation: compares a tenant's sampled keys against
//! synthetic samples from every candidate distribution on the parameter grid
//! and keeps the closest match by KS p-value.

mod ks;
mod study;

pub use ks::{kolmogorov_q, ks_pvalue, ks_statistic};
pub use study::{accuracy_study, AccuracyRow, ACCURACY_CSV_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rng::{derive_seed, rng_from_seed};
use crate::workload::{DistributionSpec, Family, KeySampler, KeySpace};

/// Smallest sample the estimator accepts.
pub const MIN_SAMPLES: usize = 30;

/// Inclusive parameter range scanned with a fixed step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl ParamRange {
    pub const fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    /// Grid points, rounded to 1e-9 so decimal steps land on exact values.
    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.max < self.min {
            return Vec::new();
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|i| ((self.min + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub gaussian: ParamRange,
    pub exponential: ParamRange,
    pub zipf: ParamRange,
    /// Lower bound on the synthetic sample size; the actual size is
    /// `max(samples, synthetic_sample_size)`.
    pub synthetic_sample_size: usize,
    /// Best p-values below this fall back to uniform.
    pub p_threshold: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            gaussian: ParamRange::new(0.5, 2.0, 0.1),
            exponential: ParamRange::new(0.5, 2.0, 0.1),
            zipf: ParamRange::new(0.5, 3.0, 0.1),
            synthetic_sample_size: 10_000,
            p_threshold: 0.001,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("gaussian", self.gaussian),
            ("exponential", self.exponential),
            ("zipf", self.zipf),
        ] {
            if !(r.step > 0.0 && r.min > 0.0 && r.max >= r.min) {
                return Err(Error::invalid(format!("bad {name} grid {r:?}")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_threshold) {
            return Err(Error::invalid("p_threshold must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn params(&self, family: Family) -> Vec<f64> {
        match family {
            Family::Uniform => vec![0.0],
            Family::Gaussian => self.gaussian.values(),
            Family::Exponential => self.exponential.values(),
            Family::Zipf => self.zipf.values(),
        }
    }

    /// Every candidate in evaluation order: uniform, then each family's grid.
    pub fn candidates(&self) -> Vec<DistributionSpec> {
        Family::ALL
            .into_iter()
            .flat_map(|f| {
                self.params(f)
                    .into_iter()
                    .map(move |p| DistributionSpec { family: f, param: p })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub spec: DistributionSpec,
    /// Highest p-value over all candidates.
    pub p_value: f64,
    pub candidates_evaluated: usize,
    /// True when no candidate cleared the threshold and uniform was assumed.
    pub fallback: bool,
}

/// Rank used to break exact p-value ties: the candidate needing more cache
/// wins (uniform, then gaussian, exponential, zipf; within a family the least
/// skewed parameter).
fn demand_rank(spec: &DistributionSpec) -> (u8, i64) {
    let p = (spec.param * 1e6).round() as i64;
    let within = if spec.family.skew_increases_with_param() { p } else { -p };
    (spec.family.code(), within)
}

/// Pre-built samplers for one key space and grid, reusable across calls.
#[derive(Debug, Clone)]
pub struct Estimator {
    keyspace: KeySpace,
    grid: GridConfig,
    samplers: Vec<KeySampler>,
    exec: Exec,
}

impl Estimator {
    pub fn new(keyspace: KeySpace, grid: GridConfig) -> Result<Self> {
        grid.validate()?;
        let samplers = grid
            .candidates()
            .into_iter()
            .map(|spec| KeySampler::new(spec, keyspace))
            .collect();
        Ok(Self {
            keyspace,
            grid,
            samplers,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn keyspace(&self) -> KeySpace {
        self.keyspace
    }

    pub fn grid(&self) -> &GridConfig {
        &self.grid
    }

    /// p-value of every candidate, in [`GridConfig::candidates`] order.
    /// Candidate `i` draws its synthetic sample from `derive_seed(seed, i)`,
    /// so the outcome does not depend on scheduling.
    pub fn candidate_pvalues(&self, samples: &[u32], seed: u64) -> Result<Vec<(DistributionSpec, f64)>> {
        if samples.len() < MIN_SAMPLES {
            return Err(Error::invalid(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|&&k| k >= self.keyspace.key_count) {
            return Err(Error::invalid(format!("sample key {bad} outside the key space")));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let synth_n = sorted.len().max(self.grid.synthetic_sample_size);
        let idx: Vec<usize> = (0..self.samplers.len()).collect();
        par::map(self.exec, &idx, |&i| {
            let sampler = &self.samplers[i];
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let mut synth = sampler.sample_n(&mut rng, synth_n);
            synth.sort_unstable();
            let d = ks_statistic(&sorted, &synth)?;
            Ok((sampler.spec(), ks_pvalue(d, sorted.len(), synth_n)?))
        })
        .into_iter()
        .collect()
    }

    pub fn estimate(&self, samples: &[u32], seed: u64) -> Result<EstimationResult> {
        let scored = self.candidate_pvalues(samples, seed)?;
        let (best, p) = scored
            .iter()
            .copied()
            .min_by(|(sa, pa), (sb, pb)| pb.total_cmp(pa).then_with(|| demand_rank(sa).cmp(&demand_rank(sb))))
            .expect("grid has candidates");
        let fallback = p < self.grid.p_threshold;
        Ok(EstimationResult {
            spec: if fallback { DistributionSpec::uniform() } else { best },
            p_value: p,
            candidates_evaluated: scored.len(),
            fallback,
        })
    }
}

/// One-shot estimation; see [`Estimator::estimate`].
pub fn estimate(samples: &[u32], keyspace: KeySpace, grid: &GridConfig, seed: u64) -> Result<EstimationResult> {
    Estimator::new(keyspace, *grid)?.estimate(samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::workload::keyspace_from_gb;

    #[test]
    fn grid_sizes() {
        let g = GridConfig::default();
        assert_eq!(g.params(Family::Gaussian).len(), 16);
        assert_eq!(g.params(Family::Exponential).len(), 16);
        assert_eq!(g.params(Family::Zipf).len(), 26);
        assert_eq!(g.candidates().len(), 59);
        assert_eq!(g.params(Family::Zipf)[6], 1.1);
        assert_eq!(*g.params(Family::Zipf).last().unwrap(), 3.0);
    }

    #[test]
    fn tie_break_prefers_cache_hungry() {
        let u = DistributionSpec::uniform();
        let g1 = DistributionSpec::gaussian(1.0).unwrap();
        let g2 = DistributionSpec::gaussian(2.0).unwrap();
        let e = DistributionSpec::exponential(0.5).unwrap();
        let z1 = DistributionSpec::zipf(0.5).unwrap();
        let z2 = DistributionSpec::zipf(1.0).unwrap();
        let mut v = vec![z2, e, g1, z1, u, g2];
        v.sort_by_key(demand_rank);
        assert_eq!(v, vec![u, g2, g1, e, z1, z2]);
    }

    #[test]
    fn too_few_samples() {
        let ks = keyspace_from_gb(1.0).unwrap();
        let r = estimate(&[1; 10], ks, &GridConfig::default(), 0);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn recovers_zipf_one() {
        let ks = keyspace_from_gb(3.0).unwrap();
        let est = Estimator::new(ks, GridConfig::default()).unwrap();
        let s = KeySampler::new(DistributionSpec::zipf(1.0).unwrap(), ks);
        let mut hits = 0;
        for t in 0..20u64 {
            let mut rng = rng_from_seed(1000 + t);
            let r = est.estimate(&s.sample_n(&mut rng, 1000), t).unwrap();
            if r.spec.family == Family::Zipf && (r.spec.param - 1.0).abs() <= 0.1 + 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}/20");
    }

    #[test]
    fn two_point_mass_falls_back_to_uniform() {
        let ks = keyspace_from_gb(3.0).unwrap();
        let mut samples = vec![0u32; 500];
        samples.extend(std::iter::repeat_n(ks.key_count - 1, 500));
        let r = estimate(&samples, ks, &GridConfig::default(), 3).unwrap();
        assert!(r.fallback);
        assert_eq!(r.spec.family, Family::Uniform);
    }

    #[test]
    fn reported_p_is_max_and_parallel_matches_sequential() {
        let ks = keyspace_from_gb(2.0).unwrap();
        let s = KeySampler::new(DistributionSpec::exponential(1.3).unwrap(), ks);
        let samples = s.sample_n(&mut rng_from_seed(4), 800);
        let par = Estimator::new(ks, GridConfig::default()).unwrap();
        let seq = par.clone().with_exec(Exec::Sequential);
        let scored = par.candidate_pvalues(&samples, 8).unwrap();
        let max = scored.iter().map(|x| x.1).fold(0.0, f64::max);
        let r = par.estimate(&samples, 8).unwrap();
        assert_eq!(r.p_value, max);
        assert_eq!(r.candidates_evaluated, 59);
        assert_eq!(r, seq.estimate(&samples, 8).unwrap());
        assert!((0.0..=1.0).contains(&r.p_value));
    }
}
