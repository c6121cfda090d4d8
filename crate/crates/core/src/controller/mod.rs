//! Resizing rules and the shared-pool budget.
//!
//! Given a predicted hit-rate curve H(c, d) for a tenant's estimated
//! distribution d, [`decide`] applies three rules with safety margins
//! δ₁, δ₂ around the required hit rate H_req:
//!
//! 1. H(current) < H_req − δ₁: grow to the smallest grid size with
//!    H ≥ H_req + δ₁, or raise an [`DecisionKind::AdminAlert`] if none.
//! 2. H(current) > H_req + δ₂: shrink to the smallest grid size with
//!    H ≥ H_req + δ₂.
//! 3. Otherwise hold.
//!
//! [`PoolState`] then commits decisions against a fixed total so that the
//! sum of allocations never exceeds the pool.

mod pool;

pub use pool::{ApplyOutcome, PoolState};

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cachesim::{hit_rate_curve, DEFAULT_ORACLE_QUERIES, DEFAULT_WARMUP_FRACTION};
use crate::error::{Error, Result};
use crate::estimator::{EstimationResult, Estimator};
use crate::par::{self, Exec};
use crate::predictor::{FeatureVector, HitRateModel, HitRatePredictor};
use crate::workload::{keyspace_from_gb, DistributionSpec, Family};

pub const DECISION_LOG_HEADER: &str =
    "query_index,tenant_id,est_family,est_param,p_value,old_gb,new_gb,predicted_hit_pct,decision_kind";

/// Largest parameter drift between two estimates of the same family that is
/// still treated as the same access pattern.
pub const PATTERN_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenantState {
    pub tenant_id: String,
    pub data_gb: f64,
    pub required_hit_pct: f64,
    pub current_alloc_gb: f64,
    pub delta1_pct: f64,
    pub delta2_pct: f64,
    pub last_estimate: Option<EstimationResult>,
    /// Estimate behind the most recent non-hold decision.
    pub decided_on: Option<DistributionSpec>,
    pub window_hits: u64,
    pub window_queries: u64,
}

impl TenantState {
    pub fn new(
        tenant_id: impl Into<String>,
        data_gb: f64,
        required_hit_pct: f64,
        current_alloc_gb: f64,
        delta1_pct: f64,
        delta2_pct: f64,
    ) -> Result<Self> {
        if !(data_gb > 0.0 && data_gb.is_finite()) {
            return Err(Error::invalid(format!("data size must be positive, got {data_gb} GB")));
        }
        if !(required_hit_pct > 0.0 && required_hit_pct <= 100.0) {
            return Err(Error::invalid(format!(
                "required hit rate must lie in (0, 100], got {required_hit_pct}"
            )));
        }
        if !(current_alloc_gb >= 0.0 && current_alloc_gb.is_finite()) {
            return Err(Error::invalid("allocation must be non-negative"));
        }
        if !(delta1_pct >= 0.0 && delta2_pct >= 0.0) {
            return Err(Error::invalid("safety margins must be non-negative"));
        }
        Ok(Self {
            tenant_id: tenant_id.into(),
            data_gb,
            required_hit_pct,
            current_alloc_gb,
            delta1_pct,
            delta2_pct,
            last_estimate: None,
            decided_on: None,
            window_hits: 0,
            window_queries: 0,
        })
    }

    pub fn record_window(&mut self, hits: u64, queries: u64) {
        self.window_hits = hits;
        self.window_queries = queries;
    }

    pub fn window_hit_pct(&self) -> Option<f64> {
        (self.window_queries > 0).then(|| 100.0 * self.window_hits as f64 / self.window_queries as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionKind {
    Grow,
    Shrink,
    Hold,
    AdminAlert,
}

impl DecisionKind {
    pub fn name(self) -> &'static str {
        match self {
            DecisionKind::Grow => "grow",
            DecisionKind::Shrink => "shrink",
            DecisionKind::Hold => "hold",
            DecisionKind::AdminAlert => "admin_alert",
        }
    }

    pub fn is_resize(self) -> bool {
        matches!(self, DecisionKind::Grow | DecisionKind::Shrink)
    }
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecisionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grow" => Ok(DecisionKind::Grow),
            "shrink" => Ok(DecisionKind::Shrink),
            "hold" => Ok(DecisionKind::Hold),
            "admin_alert" => Ok(DecisionKind::AdminAlert),
            other => Err(Error::format(format!("unknown decision kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResizeDecision {
    pub kind: DecisionKind,
    pub current_gb: f64,
    pub target_alloc_gb: f64,
    /// Predicted hit rate at the target (at the current size for holds and
    /// alerts).
    pub predicted_hit_pct: f64,
}

impl ResizeDecision {
    fn hold(current_gb: f64, predicted_hit_pct: f64) -> Self {
        Self {
            kind: DecisionKind::Hold,
            current_gb,
            target_alloc_gb: current_gb,
            predicted_hit_pct,
        }
    }
}

/// Cache sizes considered by [`decide`]: `step, 2 step, ..., max_gb`,
/// rounded to the micro-GB to keep decimal steps exact.
pub fn size_grid(step_gb: f64, max_gb: f64) -> Result<Vec<f64>> {
    if !(step_gb > 0.0 && step_gb.is_finite()) {
        return Err(Error::invalid(format!("grid step must be positive, got {step_gb}")));
    }
    if !(max_gb >= step_gb) {
        return Err(Error::invalid(format!(
            "max size {max_gb} GB is below one step of {step_gb} GB"
        )));
    }
    let n = (max_gb / step_gb + 1e-9).floor() as usize;
    Ok((1..=n).map(|i| (i as f64 * step_gb * 1e6).round() / 1e6).collect())
}

/// Applies the resizing rules to the predicted curve of `d`.
///
/// The grid is scanned exhaustively from the smallest size, so curves need
/// not be monotone. Growth only considers sizes above the current one.
pub fn decide<P: HitRatePredictor + ?Sized>(
    model: &P,
    d: DistributionSpec,
    tenant: &TenantState,
    grid_step_gb: f64,
    max_gb: f64,
) -> Result<ResizeDecision> {
    if let Some(f) = model.family() {
        if f != d.family {
            return Err(Error::invalid(format!(
                "{f} model cannot score a {} workload",
                d.family
            )));
        }
    }
    let grid = size_grid(grid_step_gb, max_gb)?;
    let feats: Vec<FeatureVector> = grid
        .iter()
        .map(|&c| FeatureVector::new(tenant.data_gb, c, d.param))
        .collect::<Result<_>>()?;
    let curve = model.predict_hits(&feats)?;
    let current = tenant.current_alloc_gb;
    let h_now = if current > 0.0 {
        model.predict_hit(&FeatureVector::new(tenant.data_gb, current, d.param)?)?
    } else {
        0.0
    };
    let req = tenant.required_hit_pct;
    let (lo, hi) = (req - tenant.delta1_pct, req + tenant.delta2_pct);

    if h_now < lo {
        let want = req + tenant.delta1_pct;
        let pick = grid.iter().zip(&curve).find(|(&c, &h)| c > current + 1e-9 && h >= want);
        return Ok(match pick {
            Some((&c, &h)) => ResizeDecision {
                kind: DecisionKind::Grow,
                current_gb: current,
                target_alloc_gb: c,
                predicted_hit_pct: h,
            },
            None => ResizeDecision {
                kind: DecisionKind::AdminAlert,
                current_gb: current,
                target_alloc_gb: current,
                predicted_hit_pct: h_now,
            },
        });
    }
    if h_now > hi {
        if let Some((&c, &h)) = grid.iter().zip(&curve).find(|(_, &h)| h >= hi) {
            if c < current - 1e-9 {
                return Ok(ResizeDecision {
                    kind: DecisionKind::Shrink,
                    current_gb: current,
                    target_alloc_gb: c,
                    predicted_hit_pct: h,
                });
            }
        }
    }
    Ok(ResizeDecision::hold(current, h_now))
}

/// One model per family, possibly of different kinds.
#[derive(Default)]
pub struct ModelSet {
    models: BTreeMap<Family, Box<dyn HitRatePredictor + Send + Sync>>,
}

impl fmt::Debug for ModelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.models.keys()).finish()
    }
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, family: Family, model: impl HitRatePredictor + Send + Sync + 'static) {
        self.models.insert(family, Box::new(model));
    }

    pub fn from_models(models: impl IntoIterator<Item = HitRateModel>) -> Self {
        let mut set = Self::new();
        for m in models {
            set.insert(m.family, m);
        }
        set
    }

    pub fn get(&self, family: Family) -> Result<&(dyn HitRatePredictor + Send + Sync)> {
        self.models
            .get(&family)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::State(format!("no model loaded for the {family} family")))
    }

    pub fn families(&self) -> Vec<Family> {
        self.models.keys().copied().collect()
    }

    pub fn missing(&self) -> Vec<Family> {
        Family::ALL
            .into_iter()
            .filter(|f| !self.models.contains_key(f))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptions {
    pub grid_step_gb: f64,
    pub max_gb: f64,
    /// Re-decide only when the estimate departs from the one behind the last
    /// resize (family change or parameter drift above
    /// [`PATTERN_TOLERANCE`]).
    pub only_on_pattern_change: bool,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            grid_step_gb: 0.1,
            max_gb: 4.0,
            only_on_pattern_change: true,
        }
    }
}

pub fn same_pattern(a: &DistributionSpec, b: &DistributionSpec) -> bool {
    a.family == b.family && (a.param - b.param).abs() <= PATTERN_TOLERANCE + 1e-9
}

/// Everything a control step produced, in decision-log form.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub query_index: usize,
    pub tenant_id: String,
    pub estimate: Option<EstimationResult>,
    pub old_gb: f64,
    pub new_gb: f64,
    pub predicted_hit_pct: f64,
    pub kind: DecisionKind,
    /// Budget shortfall when a grow could not be covered by the pool.
    pub shortfall_gb: Option<f64>,
}

impl DecisionRecord {
    pub fn csv_line(&self) -> String {
        let (fam, param, p) = match &self.estimate {
            Some(e) => (e.spec.family.name(), e.spec.param, e.p_value),
            None => ("none", 0.0, 0.0),
        };
        format!(
            "{},{},{},{:.1},{:.6e},{:.2},{:.2},{:.4},{}",
            self.query_index,
            self.tenant_id,
            fam,
            param,
            p,
            self.old_gb,
            self.new_gb,
            self.predicted_hit_pct,
            self.kind
        )
    }
}

pub fn decision_log_csv(records: &[DecisionRecord]) -> String {
    let mut s = String::from(DECISION_LOG_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(s, "{}", r.csv_line());
    }
    s
}

/// Parsed decision-log row (the estimate is reduced to its logged fields).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionLogRow {
    pub query_index: usize,
    pub tenant_id: String,
    pub est_family: String,
    pub est_param: f64,
    pub p_value: f64,
    pub old_gb: f64,
    pub new_gb: f64,
    pub predicted_hit_pct: f64,
    pub kind: DecisionKind,
}

pub fn parse_decision_log(text: &str) -> Result<Vec<DecisionLogRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(DECISION_LOG_HEADER) {
        return Err(Error::format("decision log header mismatch"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::format(format!("decision log row {} is malformed: `{line}`", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(DecisionLogRow {
                query_index: f[0].parse().map_err(|_| bad())?,
                tenant_id: f[1].to_string(),
                est_family: f[2].to_string(),
                est_param: num(f[3])?,
                p_value: num(f[4])?,
                old_gb: num(f[5])?,
                new_gb: num(f[6])?,
                predicted_hit_pct: num(f[7])?,
                kind: f[8].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Estimate and decision for one tenant, before the pool commit.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub estimate: Option<EstimationResult>,
    pub decision: ResizeDecision,
}

/// Estimates the tenant's distribution and decides, without touching the
/// pool. An empty sample holds with the previous estimate.
pub fn propose(
    tenant: &TenantState,
    recent_samples: &[u32],
    models: &ModelSet,
    estimator: &Estimator,
    seed: u64,
    opts: &ControlOptions,
) -> Result<Proposal> {
    if recent_samples.is_empty() {
        let h = match (tenant.last_estimate, tenant.current_alloc_gb > 0.0) {
            (Some(e), true) => models.get(e.spec.family)?.predict_hit(&FeatureVector::new(
                tenant.data_gb,
                tenant.current_alloc_gb,
                e.spec.param,
            )?)?,
            _ => 0.0,
        };
        return Ok(Proposal {
            estimate: tenant.last_estimate,
            decision: ResizeDecision::hold(tenant.current_alloc_gb, h),
        });
    }
    let est = estimator.estimate(recent_samples, seed)?;
    let model = models.get(est.spec.family)?;
    if opts.only_on_pattern_change {
        if let Some(prev) = &tenant.decided_on {
            if same_pattern(prev, &est.spec) {
                let h = if tenant.current_alloc_gb > 0.0 {
                    model.predict_hit(&FeatureVector::new(
                        tenant.data_gb,
                        tenant.current_alloc_gb,
                        prev.param,
                    )?)?
                } else {
                    0.0
                };
                return Ok(Proposal {
                    estimate: Some(est),
                    decision: ResizeDecision::hold(tenant.current_alloc_gb, h),
                });
            }
        }
    }
    let decision = decide(model, est.spec, tenant, opts.grid_step_gb, opts.max_gb)?;
    Ok(Proposal {
        estimate: Some(est),
        decision,
    })
}

/// Commits a proposal through the pool and updates the tenant.
pub fn commit(
    tenant: &mut TenantState,
    proposal: &Proposal,
    pool: &mut PoolState,
    query_index: usize,
) -> Result<DecisionRecord> {
    let d = proposal.decision;
    let old = pool.allocation_gb(&tenant.tenant_id)?;
    let outcome = pool.apply(&tenant.tenant_id, &d)?;
    tenant.last_estimate = proposal.estimate;
    let (kind, new_gb, shortfall) = match outcome {
        ApplyOutcome::Committed => (d.kind, pool.allocation_gb(&tenant.tenant_id)?, None),
        ApplyOutcome::AdminAlert { shortfall_gb } => (DecisionKind::AdminAlert, old, Some(shortfall_gb)),
    };
    tenant.current_alloc_gb = new_gb;
    if d.kind != DecisionKind::Hold {
        tenant.decided_on = proposal.estimate.map(|e| e.spec);
    }
    Ok(DecisionRecord {
        query_index,
        tenant_id: tenant.tenant_id.clone(),
        estimate: proposal.estimate,
        old_gb: old,
        new_gb,
        predicted_hit_pct: d.predicted_hit_pct,
        kind,
        shortfall_gb: shortfall,
    })
}

/// Estimate, decide and apply for a single tenant.
#[allow(clippy::too_many_arguments)]
pub fn control_step(
    tenant: &mut TenantState,
    recent_samples: &[u32],
    pool: &mut PoolState,
    models: &ModelSet,
    estimator: &Estimator,
    seed: u64,
    opts: &ControlOptions,
    query_index: usize,
) -> Result<DecisionRecord> {
    let proposal = propose(tenant, recent_samples, models, estimator, seed, opts)?;
    commit(tenant, &proposal, pool, query_index)
}

/// Control step over several tenants: proposals are computed concurrently,
/// commits happen in tenant-id order.
#[allow(clippy::too_many_arguments)]
pub fn control_round(
    tenants: &mut [TenantState],
    samples: &[Vec<u32>],
    estimators: &[Estimator],
    pool: &mut PoolState,
    models: &ModelSet,
    seed: u64,
    opts: &ControlOptions,
    query_index: usize,
    exec: Exec,
) -> Result<Vec<DecisionRecord>> {
    if samples.len() != tenants.len() || estimators.len() != tenants.len() {
        return Err(Error::invalid("one sample set and estimator per tenant is required"));
    }
    let proposals = par::map_range(exec, tenants.len(), |i| {
        propose(
            &tenants[i],
            &samples[i],
            models,
            &estimators[i],
            crate::rng::derive_seed(seed, i as u64),
            opts,
        )
    });
    let mut order: Vec<usize> = (0..tenants.len()).collect();
    order.sort_by(|&a, &b| tenants[a].tenant_id.cmp(&tenants[b].tenant_id));
    let mut proposals: Vec<Option<Result<Proposal>>> = proposals.into_iter().map(Some).collect();
    let mut records = Vec::with_capacity(tenants.len());
    for i in order {
        let p = proposals[i].take().expect("each proposal is used once")?;
        records.push(commit(&mut tenants[i], &p, pool, query_index)?);
    }
    Ok(records)
}

/// Result of the brute-force allocation search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleAlloc {
    pub cache_gb: f64,
    pub hit_pct: f64,
    /// False when no grid size reached the requirement; `cache_gb` is then
    /// the largest size tried.
    pub satisfied: bool,
}

/// Smallest grid size whose simulated steady hit rate meets `required_pct`.
/// The sweep covers `step ..= data size` (rounded up to a step), where only
/// cold misses remain.
pub fn optimal_alloc_oracle(
    spec: DistributionSpec,
    data_gb: f64,
    required_pct: f64,
    grid_step_gb: f64,
    seed: u64,
) -> Result<OracleAlloc> {
    optimal_alloc_oracle_with(
        spec,
        data_gb,
        required_pct,
        grid_step_gb,
        DEFAULT_ORACLE_QUERIES,
        seed,
        Exec::default(),
    )
}

pub fn optimal_alloc_oracle_with(
    spec: DistributionSpec,
    data_gb: f64,
    required_pct: f64,
    grid_step_gb: f64,
    n_queries: usize,
    seed: u64,
    exec: Exec,
) -> Result<OracleAlloc> {
    let top = (data_gb / grid_step_gb - 1e-9).ceil().max(1.0) * grid_step_gb;
    let grid = size_grid(grid_step_gb, top + 1e-9)?;
    let ks = keyspace_from_gb(data_gb)?;
    let hits = hit_rate_curve(spec, ks, &grid, n_queries, DEFAULT_WARMUP_FRACTION, seed, exec)?;
    Ok(match grid.iter().zip(&hits).find(|(_, &h)| h >= required_pct) {
        Some((&c, &h)) => OracleAlloc {
            cache_gb: c,
            hit_pct: h,
            satisfied: true,
        },
        None => OracleAlloc {
            cache_gb: *grid.last().unwrap(),
            hit_pct: *hits.last().unwrap(),
            satisfied: false,
        },
    })
}

#[cfg(test)]
mod tests;
