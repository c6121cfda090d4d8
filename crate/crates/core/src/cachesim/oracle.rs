//! Ground-truth hit rates from direct simulation.

use super::{CacheConfig, LruCache};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::workload::{generate_trace, DistributionSpec, KeySpace};

pub const DEFAULT_ORACLE_QUERIES: usize = 500_000;
/// Hit rates are measured over the second half of a cold-start run.
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.5;

fn warmup_len(n_queries: usize, warmup_fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::invalid(format!(
            "warmup fraction must lie in [0, 1), got {warmup_fraction}"
        )));
    }
    if n_queries == 0 {
        return Err(Error::invalid("need at least one query"));
    }
    let w = (n_queries as f64 * warmup_fraction).floor() as usize;
    if w >= n_queries {
        return Err(Error::invalid("warm-up leaves no measured queries"));
    }
    Ok(w)
}

fn measured_hit_rate(keys: &[u32], key_count: u32, capacity_gb: f64, warmup: usize) -> Result<f64> {
    let mut cache = LruCache::with_key_hint(CacheConfig::pooled(capacity_gb)?, key_count)?;
    for &k in &keys[..warmup] {
        cache.access(k);
    }
    let hits = keys[warmup..].iter().filter(|&&k| cache.access(k).is_hit()).count();
    Ok(100.0 * hits as f64 / (keys.len() - warmup) as f64)
}

/// Post-warm-up hit rate (percent) of a fresh LRU fed a fresh trace.
pub fn steady_hit_rate(
    spec: DistributionSpec,
    keyspace: KeySpace,
    capacity_gb: f64,
    n_queries: usize,
    warmup_fraction: f64,
    seed: u64,
) -> Result<f64> {
    let warmup = warmup_len(n_queries, warmup_fraction)?;
    CacheConfig::pooled(capacity_gb)?;
    let trace = generate_trace(spec, keyspace, n_queries, seed)?;
    measured_hit_rate(&trace.keys, keyspace.key_count, capacity_gb, warmup)
}

/// [`steady_hit_rate`] at several capacities. The trace is generated once and
/// replayed into one independent cache per capacity, which gives the same
/// numbers as separate calls with the same seed.
pub fn hit_rate_curve(
    spec: DistributionSpec,
    keyspace: KeySpace,
    capacities_gb: &[f64],
    n_queries: usize,
    warmup_fraction: f64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<f64>> {
    let warmup = warmup_len(n_queries, warmup_fraction)?;
    for &c in capacities_gb {
        CacheConfig::pooled(c)?;
    }
    let trace = generate_trace(spec, keyspace, n_queries, seed)?;
    par::map(exec, capacities_gb, |&c| {
        measured_hit_rate(&trace.keys, keyspace.key_count, c, warmup)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::keyspace_from_gb;

    #[test]
    fn uniform_matches_slots_over_keys() {
        let ks = keyspace_from_gb(3.0).unwrap();
        let h = steady_hit_rate(DistributionSpec::uniform(), ks, 2.7, 500_000, 0.5, 17).unwrap();
        assert!((h - 90.0).abs() <= 2.0, "h = {h}");
    }

    #[test]
    fn cache_covering_data_is_near_perfect() {
        let ks = keyspace_from_gb(1.0).unwrap();
        for spec in [DistributionSpec::uniform(), DistributionSpec::zipf(0.5).unwrap()] {
            let h = steady_hit_rate(spec, ks, 1.0, 500_000, 0.5, 2).unwrap();
            assert!(h >= 99.0, "{spec}: {h}");
        }
    }

    #[test]
    fn skew_beats_uniform_at_small_cache() {
        let ks = keyspace_from_gb(3.0).unwrap();
        let z = steady_hit_rate(DistributionSpec::zipf(2.0).unwrap(), ks, 0.1, 200_000, 0.5, 1).unwrap();
        let u = steady_hit_rate(DistributionSpec::uniform(), ks, 0.1, 200_000, 0.5, 1).unwrap();
        assert!(z > u, "{z} vs {u}");
    }

    #[test]
    fn curve_agrees_with_pointwise_and_is_monotone() {
        let ks = keyspace_from_gb(2.0).unwrap();
        let spec = DistributionSpec::exponential(1.2).unwrap();
        let caps: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
        let curve = hit_rate_curve(spec, ks, &caps, 100_000, 0.5, 5, Exec::Parallel).unwrap();
        let seq = hit_rate_curve(spec, ks, &caps, 100_000, 0.5, 5, Exec::Sequential).unwrap();
        assert_eq!(curve, seq);
        for w in curve.windows(2) {
            assert!(w[1] >= w[0], "{curve:?}");
        }
        let single = steady_hit_rate(spec, ks, caps[7], 100_000, 0.5, 5).unwrap();
        assert_eq!(single, curve[7]);
    }

    #[test]
    fn rejects_bad_warmup() {
        let ks = keyspace_from_gb(1.0).unwrap();
        assert!(steady_hit_rate(DistributionSpec::uniform(), ks, 1.0, 100, 1.0, 0).is_err());
        assert!(steady_hit_rate(DistributionSpec::uniform(), ks, 0.0, 100, 0.5, 0).is_err());
    }
}
