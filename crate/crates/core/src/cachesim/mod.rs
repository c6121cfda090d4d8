//! Deterministic LRU cache tier with hit/miss accounting and a two-point
//! response-time model.
//!
//! The cache stands in for a cluster of cache nodes: all nodes are pooled
//! into one LRU of the aggregate capacity, and `node_count` only matters for
//! reporting per-node sizes.

mod oracle;
mod stats;

pub use oracle::{hit_rate_curve, steady_hit_rate, DEFAULT_ORACLE_QUERIES, DEFAULT_WARMUP_FRACTION};
pub use stats::{run_trace, RunStats, StatsRecorder, WindowStat, RUN_STATS_CSV_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::workload::gb_to_objects;

/// Window length (queries) for reporting series.
pub const DEFAULT_WINDOW: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub capacity_gb: f64,
    pub node_count: u32,
    pub slots: usize,
}

impl CacheConfig {
    pub fn new(capacity_gb: f64, node_count: u32) -> Result<Self> {
        if !(capacity_gb.is_finite() && capacity_gb > 0.0) {
            return Err(Error::invalid(format!(
                "cache capacity must be positive, got {capacity_gb} GB"
            )));
        }
        if node_count == 0 {
            return Err(Error::invalid("node_count must be at least 1"));
        }
        let slots = gb_to_objects(capacity_gb) as usize;
        if slots == 0 {
            return Err(Error::invalid(format!("{capacity_gb} GB holds no 100 KB object")));
        }
        Ok(Self {
            capacity_gb,
            node_count,
            slots,
        })
    }

    /// Single-node pool.
    pub fn pooled(capacity_gb: f64) -> Result<Self> {
        Self::new(capacity_gb, 1)
    }

    /// `node_count` nodes of `per_node_gb` each, pooled.
    pub fn from_nodes(per_node_gb: f64, node_count: u32) -> Result<Self> {
        Self::new(per_node_gb * node_count as f64, node_count)
    }

    pub fn per_node_gb(&self) -> f64 {
        self.capacity_gb / self.node_count as f64
    }
}

/// Expected response time as a mix of a cache hit and a backend fetch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub hit_ms: f64,
    pub miss_ms: f64,
}

impl Default for LatencyModel {
    /// Solved from two measured (hit rate, response time) operating points:
    /// 10.2% -> 4.58 ms and 91.8% -> 1.77 ms.
    fn default() -> Self {
        Self {
            hit_ms: 1.49,
            miss_ms: 4.93,
        }
    }
}

impl LatencyModel {
    pub fn new(hit_ms: f64, miss_ms: f64) -> Result<Self> {
        if !(hit_ms > 0.0 && hit_ms < miss_ms && miss_ms.is_finite()) {
            return Err(Error::invalid(format!(
                "latency model needs 0 < hit_ms < miss_ms, got {hit_ms} / {miss_ms}"
            )));
        }
        Ok(Self { hit_ms, miss_ms })
    }

    /// Solves `h1*t_h + (1-h1)*t_m = r1` and `h2*t_h + (1-h2)*t_m = r2`
    /// for the hit and miss times; rates are fractions.
    pub fn from_operating_points((h1, r1): (f64, f64), (h2, r2): (f64, f64)) -> Result<Self> {
        let det = h1 * (1.0 - h2) - h2 * (1.0 - h1);
        if det.abs() < 1e-12 {
            return Err(Error::invalid("operating points share a hit rate"));
        }
        let hit = (r1 * (1.0 - h2) - r2 * (1.0 - h1)) / det;
        let miss = (h1 * r2 - h2 * r1) / det;
        Self::new(hit, miss)
    }

    /// Mean latency at hit fraction `rate` in `[0, 1]`.
    pub fn mean_ms(&self, rate: f64) -> f64 {
        rate * self.hit_ms + (1.0 - rate) * self.miss_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Hit,
    Miss,
}

impl Access {
    pub fn is_hit(self) -> bool {
        self == Access::Hit
    }
}

const NIL: u32 = u32::MAX;

/// LRU over dense `u32` keys. Recency is an intrusive doubly linked list
/// threaded through per-key arrays, so every access is O(1) with no hashing.
#[derive(Debug, Clone)]
pub struct LruCache {
    config: CacheConfig,
    prev: Vec<u32>,
    next: Vec<u32>,
    resident: Vec<bool>,
    head: u32,
    tail: u32,
    len: usize,
}

impl LruCache {
    pub fn new(config: CacheConfig) -> Result<Self> {
        if config.slots == 0 {
            return Err(Error::invalid("cache must have at least one slot"));
        }
        Ok(Self {
            config,
            prev: Vec::new(),
            next: Vec::new(),
            resident: Vec::new(),
            head: NIL,
            tail: NIL,
            len: 0,
        })
    }

    /// Pre-sizes the per-key arrays for keys `0..key_count`.
    pub fn with_key_hint(config: CacheConfig, key_count: u32) -> Result<Self> {
        let mut c = Self::new(config)?;
        c.ensure_key(key_count.saturating_sub(1));
        Ok(c)
    }

    pub fn config(&self) -> CacheConfig {
        self.config
    }

    pub fn capacity_gb(&self) -> f64 {
        self.config.capacity_gb
    }

    pub fn slots(&self) -> usize {
        self.config.slots
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, key: u32) -> bool {
        self.resident.get(key as usize).copied().unwrap_or(false)
    }

    fn ensure_key(&mut self, key: u32) {
        let need = key as usize + 1;
        if self.resident.len() < need {
            self.prev.resize(need, NIL);
            self.next.resize(need, NIL);
            self.resident.resize(need, false);
        }
    }

    #[inline]
    fn unlink(&mut self, key: u32) {
        let (p, n) = (self.prev[key as usize], self.next[key as usize]);
        if p == NIL {
            self.head = n;
        } else {
            self.next[p as usize] = n;
        }
        if n == NIL {
            self.tail = p;
        } else {
            self.prev[n as usize] = p;
        }
    }

    #[inline]
    fn push_front(&mut self, key: u32) {
        self.prev[key as usize] = NIL;
        self.next[key as usize] = self.head;
        if self.head != NIL {
            self.prev[self.head as usize] = key;
        } else {
            self.tail = key;
        }
        self.head = key;
    }

    fn evict_lru(&mut self) {
        let victim = self.tail;
        debug_assert_ne!(victim, NIL);
        self.unlink(victim);
        self.resident[victim as usize] = false;
        self.len -= 1;
    }

    #[inline]
    pub fn access(&mut self, key: u32) -> Access {
        debug_assert_ne!(key, NIL);
        if self.contains(key) {
            if self.head != key {
                self.unlink(key);
                self.push_front(key);
            }
            return Access::Hit;
        }
        self.ensure_key(key);
        if self.len == self.config.slots {
            self.evict_lru();
        }
        self.push_front(key);
        self.resident[key as usize] = true;
        self.len += 1;
        Access::Miss
    }

    /// Changes capacity; shrinking evicts from the LRU end.
    pub fn resize(&mut self, new_capacity_gb: f64) -> Result<()> {
        let config = CacheConfig::new(new_capacity_gb, self.config.node_count)?;
        self.config = config;
        while self.len > self.config.slots {
            self.evict_lru();
        }
        Ok(())
    }

    /// Resident keys from most to least recently used.
    pub fn keys_mru(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.len);
        let mut k = self.head;
        while k != NIL {
            out.push(k);
            k = self.next[k as usize];
        }
        out
    }
}

pub fn new_cache(config: CacheConfig) -> Result<LruCache> {
    LruCache::new(config)
}
