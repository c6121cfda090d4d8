use std::fmt::Write as _;

use super::{Access, LatencyModel, LruCache};
use crate::error::{Error, Result};
use crate::workload::Trace;

pub const RUN_STATS_CSV_HEADER: &str =
    "query_index,window_hit_rate_pct,cum_hit_rate_pct,window_mean_latency_ms,cache_gb,phase_id";

/// One closed reporting window. `query_index` counts queries processed up to
/// and including the window's last query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStat {
    pub query_index: usize,
    pub window_hit_rate_pct: f64,
    pub cum_hit_rate_pct: f64,
    pub window_mean_latency_ms: f64,
    pub cache_gb: f64,
    pub phase_id: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunStats {
    pub hits: u64,
    pub misses: u64,
    pub windows: Vec<WindowStat>,
}

impl RunStats {
    pub fn queries(&self) -> u64 {
        self.hits + self.misses
    }

    pub fn cum_hit_rate_pct(&self) -> f64 {
        pct(self.hits, self.queries())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.windows.len() + 1));
        s.push_str(RUN_STATS_CSV_HEADER);
        s.push('\n');
        for w in &self.windows {
            let _ = writeln!(
                s,
                "{},{:.4},{:.4},{:.4},{:.2},{}",
                w.query_index,
                w.window_hit_rate_pct,
                w.cum_hit_rate_pct,
                w.window_mean_latency_ms,
                w.cache_gb,
                w.phase_id
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<RunStats> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == RUN_STATS_CSV_HEADER => {}
            Some(h) => return Err(Error::format(format!("unexpected run-stats header `{h}`"))),
            None => return Err(Error::format("empty run-stats csv")),
        }
        let mut windows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::format(format!("run-stats row {} is malformed: `{line}`", i + 1));
            if f.len() != 6 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            windows.push(WindowStat {
                query_index: f[0].trim().parse().map_err(|_| bad())?,
                window_hit_rate_pct: num(f[1])?,
                cum_hit_rate_pct: num(f[2])?,
                window_mean_latency_ms: num(f[3])?,
                cache_gb: num(f[4])?,
                phase_id: f[5].trim().parse().map_err(|_| bad())?,
            });
        }
        // Totals are not stored; reconstruct from the last cumulative rate.
        let (hits, misses) = match windows.last() {
            Some(w) => {
                let h = (w.cum_hit_rate_pct / 100.0 * w.query_index as f64).round() as u64;
                (h, w.query_index as u64 - h)
            }
            None => (0, 0),
        };
        Ok(RunStats { hits, misses, windows })
    }
}

pub(crate) fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Accumulates accesses into fixed-size windows.
#[derive(Debug, Clone)]
pub struct StatsRecorder {
    window: usize,
    latency: LatencyModel,
    win_hits: u64,
    win_len: usize,
    stats: RunStats,
}

impl StatsRecorder {
    pub fn new(window: usize, latency: LatencyModel) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("window must be at least 1 query"));
        }
        Ok(Self {
            window,
            latency,
            win_hits: 0,
            win_len: 0,
            stats: RunStats::default(),
        })
    }

    #[inline]
    pub fn record(&mut self, access: Access, cache_gb: f64, phase_id: usize) {
        if access.is_hit() {
            self.stats.hits += 1;
            self.win_hits += 1;
        } else {
            self.stats.misses += 1;
        }
        self.win_len += 1;
        if self.win_len == self.window {
            self.close_window(cache_gb, phase_id);
        }
    }

    fn close_window(&mut self, cache_gb: f64, phase_id: usize) {
        let rate = self.win_hits as f64 / self.win_len as f64;
        let q = self.stats.queries();
        self.stats.windows.push(WindowStat {
            query_index: q as usize,
            window_hit_rate_pct: 100.0 * rate,
            cum_hit_rate_pct: pct(self.stats.hits, q),
            window_mean_latency_ms: self.latency.mean_ms(rate),
            cache_gb,
            phase_id,
        });
        self.win_hits = 0;
        self.win_len = 0;
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    /// Closes any partial trailing window.
    pub fn finish(mut self, cache_gb: f64, phase_id: usize) -> RunStats {
        if self.win_len > 0 {
            self.close_window(cache_gb, phase_id);
        }
        self.stats
    }
}

/// Replays `trace` through `cache` in order.
pub fn run_trace(cache: &mut LruCache, trace: &Trace, latency: LatencyModel, window: usize) -> Result<RunStats> {
    let mut rec = StatsRecorder::new(window, latency)?;
    let gb = cache.capacity_gb();
    let mut phase = 0usize;
    for (i, &key) in trace.keys.iter().enumerate() {
        while phase + 1 < trace.phases.len() && trace.phases[phase + 1].start <= i {
            phase += 1;
        }
        let a = cache.access(key);
        rec.record(a, gb, phase);
    }
    Ok(rec.finish(gb, phase))
}
