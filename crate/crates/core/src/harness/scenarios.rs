//! Seeded simulations of the resize experiments, plus the training and
//! accuracy pipelines, each writing plain CSV outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{distribution_label, ScenarioConfig, ScenarioKind, TenantSpec};
use crate::cachesim::{hit_rate_curve, CacheConfig, LruCache, RunStats, StatsRecorder, DEFAULT_WARMUP_FRACTION};
use crate::controller::{
    control_step, decision_log_csv, DecisionKind, DecisionRecord, ModelSet, PoolState, TenantState,
};
use crate::error::{Error, Result};
use crate::estimator::{accuracy_study, AccuracyRow, Estimator};
use crate::par::{self, Exec};
use crate::predictor::{
    build_training_set, eval_report_csv, evaluate, load_model, train_model, DataGrid, EvalRow, FeatureVector,
    HitRateModel, ModelKind, SimulatorOracle, TrainOptions, TrainingSet,
};
use crate::rng::derive_seed;
use crate::workload::{concat_phases, generate_trace, keyspace_from_gb, DistributionSpec, Family, Trace};

pub const SUMMARY_CSV_HEADER: &str =
    "initial_gb,initial_hit_pct,initial_latency_ms,estimated,new_gb,measured_hit_pct,measured_latency_ms";
pub const PHASES_CSV_HEADER: &str =
    "phase_id,distribution,start_query,end_query,estimated,end_alloc_gb,mean_hit_pct,resizes";
pub const RATIO_CSV_HEADER: &str = "ratio,tenant_id,alloc_gb,predicted_hit_pct,measured_hit_pct";

pub const SCENARIO_FILE: &str = "scenario.json";
pub const RUN_STATS_FILE: &str = "run_stats.csv";
pub const DECISIONS_FILE: &str = "decisions.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PHASES_FILE: &str = "phases.csv";
pub const RATIO_FILE: &str = "ratio.csv";
pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const EVAL_FILE: &str = "eval.csv";

pub(crate) fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Seed for the training (`split = 0`) or testing (`split = 1`) data of a
/// family.
pub fn dataset_seed(seed: u64, family: Family, split: u64) -> u64 {
    derive_seed(seed, 100 * (split + 1) + family.code() as u64)
}

pub fn model_file_name(family: Family, kind: ModelKind) -> String {
    format!("{}-{}.model", family.name(), kind.name())
}

/// Loads one model per family from `dir`; every family must be present since
/// the estimator can report any of them.
pub fn load_model_set(dir: &Path, kind: ModelKind) -> Result<ModelSet> {
    let missing: Vec<Family> = Family::ALL
        .into_iter()
        .filter(|&f| !dir.join(model_file_name(f, kind)).is_file())
        .collect();
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|f| f.name()).collect();
        return Err(Error::State(format!(
            "missing {kind} model file(s) in {} for famil{}: {}",
            dir.display(),
            if missing.len() == 1 { "y" } else { "ies" },
            names.join(", ")
        )));
    }
    let mut models = Vec::with_capacity(Family::ALL.len());
    for f in Family::ALL {
        let path = dir.join(model_file_name(f, kind));
        let m = load_model(&path)?;
        if m.family != f || m.kind() != Some(kind) {
            return Err(Error::format(format!(
                "{} holds a {} model for {}, expected {kind} for {f}",
                path.display(),
                m.kind().map_or("untrained", |k| k.name()),
                m.family
            )));
        }
        models.push(m);
    }
    Ok(ModelSet::from_models(models))
}

fn tenant_state(t: &TenantSpec) -> Result<TenantState> {
    TenantState::new(
        t.id.clone(),
        t.data_gb,
        t.required_hit_pct,
        t.initial_gb,
        t.delta1_pct,
        t.delta2_pct,
    )
}

fn pct(hits: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * hits as f64 / n as f64
    }
}

/// Hit-rate percentage over `range` of a per-query hit record.
pub fn range_hit_pct(hits: &[bool], range: std::ops::Range<usize>) -> f64 {
    let r = range.start.min(hits.len())..range.end.min(hits.len());
    pct(hits[r.clone()].iter().filter(|&&h| h).count(), r.len())
}

/// A single tenant replayed through its own LRU while the controller runs at
/// chosen query indices.
#[derive(Debug, Clone)]
pub struct TenantRun {
    pub trace: Trace,
    pub stats: RunStats,
    pub decisions: Vec<DecisionRecord>,
    pub hits: Vec<bool>,
}

impl TenantRun {
    pub fn resizes(&self) -> impl Iterator<Item = &DecisionRecord> {
        self.decisions.iter().filter(|d| d.kind.is_resize())
    }

    pub fn alerts(&self) -> usize {
        self.decisions
            .iter()
            .filter(|d| d.kind == DecisionKind::AdminAlert)
            .count()
    }
}

fn run_tenant(
    cfg: &ScenarioConfig,
    models: &ModelSet,
    trace: Trace,
    control_at: impl Fn(usize) -> bool,
) -> Result<TenantRun> {
    let spec = &cfg.tenants[0];
    let ks = trace.keyspace;
    let estimator = Estimator::new(ks, cfg.estimator)?;
    let opts = cfg.control_options();
    let mut tenant = tenant_state(spec)?;
    let mut pool = PoolState::new(cfg.pool_gb)?;
    pool.add_tenant(&spec.id, spec.initial_gb)?;
    let mut cache = LruCache::with_key_hint(CacheConfig::new(spec.initial_gb, cfg.node_count)?, ks.key_count)?;
    let mut rec = StatsRecorder::new(cfg.report_window, cfg.latency)?;
    let mut decisions = Vec::new();
    let mut hits = Vec::with_capacity(trace.len());
    let control_seed = derive_seed(cfg.seed, 1);
    let mut phase = 0;
    for (i, &key) in trace.keys.iter().enumerate() {
        if i > 0 && control_at(i) {
            let recent = &trace.keys[i.saturating_sub(cfg.estimate_samples)..i];
            let d = control_step(
                &mut tenant,
                recent,
                &mut pool,
                models,
                &estimator,
                derive_seed(control_seed, i as u64),
                &opts,
                i,
            )?;
            if d.new_gb != cache.capacity_gb() {
                cache.resize(d.new_gb)?;
            }
            decisions.push(d);
        }
        phase = trace.phase_at(i);
        let a = cache.access(key);
        hits.push(a.is_hit());
        rec.record(a, cache.capacity_gb(), phase);
    }
    let stats = rec.finish(cache.capacity_gb(), phase);
    Ok(TenantRun {
        trace,
        stats,
        decisions,
        hits,
    })
}

/// Before/after row in the layout of the resize tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResizeSummary {
    pub initial_gb: f64,
    pub initial_hit_pct: f64,
    pub initial_latency_ms: f64,
    pub estimated: Option<DistributionSpec>,
    pub new_gb: f64,
    pub measured_hit_pct: f64,
    pub measured_latency_ms: f64,
}

impl ResizeSummary {
    pub fn to_csv(&self) -> String {
        let est = self
            .estimated
            .map_or_else(|| "none".to_string(), |s| distribution_label(&s));
        format!(
            "{SUMMARY_CSV_HEADER}\n{:.2},{:.4},{:.4},{est},{:.2},{:.4},{:.4}\n",
            self.initial_gb,
            self.initial_hit_pct,
            self.initial_latency_ms,
            self.new_gb,
            self.measured_hit_pct,
            self.measured_latency_ms
        )
    }
}

#[derive(Debug, Clone)]
pub struct SingleResizeOutcome {
    pub run: TenantRun,
    pub resize_at: usize,
    pub summary: ResizeSummary,
}

/// One tenant, one control step at the trace midpoint. "Before" metrics skip
/// the cold start; "after" metrics skip the refill after the resize.
pub fn single_resize(cfg: &ScenarioConfig, models: &ModelSet) -> Result<SingleResizeOutcome> {
    let t = cfg
        .tenants
        .first()
        .ok_or_else(|| Error::invalid("single_resize needs a tenant"))?;
    let n = cfg.trace_length;
    if n < 2 {
        return Err(Error::invalid("single_resize needs at least two queries"));
    }
    let ks = keyspace_from_gb(t.data_gb)?;
    let trace = generate_trace(t.distribution, ks, n, derive_seed(cfg.seed, 0))?;
    let resize_at = n / 2;
    let run = run_tenant(cfg, models, trace, |i| i == resize_at)?;
    let d = &run.decisions[0];
    let before = range_hit_pct(&run.hits, cfg.warmup_exclusion.min(resize_at / 2)..resize_at);
    let after_start = (resize_at + cfg.warmup_exclusion).min(resize_at + (n - resize_at) / 2);
    let after = range_hit_pct(&run.hits, after_start..n);
    let summary = ResizeSummary {
        initial_gb: t.initial_gb,
        initial_hit_pct: before,
        initial_latency_ms: cfg.latency.mean_ms(before / 100.0),
        estimated: d.estimate.map(|e| e.spec),
        new_gb: d.new_gb,
        measured_hit_pct: after,
        measured_latency_ms: cfg.latency.mean_ms(after / 100.0),
    };
    Ok(SingleResizeOutcome {
        run,
        resize_at,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub phase_id: usize,
    pub distribution: DistributionSpec,
    pub start_query: usize,
    pub end_query: usize,
    pub estimated: Option<DistributionSpec>,
    pub end_alloc_gb: f64,
    pub mean_hit_pct: f64,
    pub resizes: usize,
}

pub fn phases_csv(rows: &[PhaseRow]) -> String {
    let mut s = String::from(PHASES_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let est = r
            .estimated
            .map_or_else(|| "none".to_string(), |e| distribution_label(&e));
        let _ = writeln!(
            s,
            "{},{},{},{},{est},{:.2},{:.4},{}",
            r.phase_id,
            distribution_label(&r.distribution),
            r.start_query,
            r.end_query,
            r.end_alloc_gb,
            r.mean_hit_pct,
            r.resizes
        );
    }
    s
}

#[derive(Debug, Clone)]
pub struct MultiPhaseOutcome {
    pub run: TenantRun,
    pub phases: Vec<PhaseRow>,
}

/// One tenant whose access pattern changes between phases; the controller
/// runs every `control_every` queries.
pub fn multi_phase(cfg: &ScenarioConfig, models: &ModelSet) -> Result<MultiPhaseOutcome> {
    let t = cfg
        .tenants
        .first()
        .ok_or_else(|| Error::invalid("multi_phase needs a tenant"))?;
    let ks = keyspace_from_gb(t.data_gb)?;
    let phases = cfg.workload_phases()?;
    let mut trace = concat_phases(&phases, ks, derive_seed(cfg.seed, 0))?;
    trace.tenant_id = t.id.clone();
    let every = cfg.control_every;
    let run = run_tenant(cfg, models, trace, |i| i % every == 0)?;

    let n = run.trace.len();
    let rows = run
        .trace
        .phases
        .iter()
        .enumerate()
        .map(|(id, mark)| {
            let end = run.trace.phases.get(id + 1).map_or(n, |m| m.start);
            let in_phase = |d: &&DecisionRecord| d.query_index > mark.start && d.query_index <= end;
            let last = run.decisions.iter().rfind(in_phase);
            let alloc = run
                .decisions
                .iter()
                .rfind(|d| d.query_index <= end)
                .map_or(t.initial_gb, |d| d.new_gb);
            PhaseRow {
                phase_id: id,
                distribution: mark.spec,
                start_query: mark.start,
                end_query: end,
                estimated: last.and_then(|d| d.estimate).map(|e| e.spec),
                end_alloc_gb: alloc,
                mean_hit_pct: range_hit_pct(&run.hits, mark.start..end),
                resizes: run
                    .decisions
                    .iter()
                    .filter(in_phase)
                    .filter(|d| d.kind.is_resize())
                    .count(),
            }
        })
        .collect();
    Ok(MultiPhaseOutcome { run, phases: rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    /// Tenant 1's share of the pool, in tenths.
    pub share: u32,
    pub tenant_id: String,
    pub alloc_gb: f64,
    pub predicted_hit_pct: f64,
    pub measured_hit_pct: f64,
}

pub fn ratio_csv(rows: &[RatioRow]) -> String {
    let mut s = String::from(RATIO_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{}:{},{},{:.2},{:.4},{:.4}",
            r.share,
            10 - r.share,
            r.tenant_id,
            r.alloc_gb,
            r.predicted_hit_pct,
            r.measured_hit_pct
        );
    }
    s
}

/// Two tenants split a fixed pool at each configured ratio. Each tenant's
/// pattern is estimated once from its trace; the model's prediction at the
/// tenant's share is compared with the simulated hit rate.
pub fn two_tenant_ratio(cfg: &ScenarioConfig, models: &ModelSet, exec: Exec) -> Result<Vec<RatioRow>> {
    let tenants = &cfg.tenants[..2.min(cfg.tenants.len())];
    if tenants.len() < 2 {
        return Err(Error::invalid("two_tenant_ratio needs two tenants"));
    }
    // Commit each split through the pool so it honours the budget.
    let mut splits = Vec::with_capacity(cfg.ratios.len());
    for &share in &cfg.ratios {
        let mut pool = PoolState::new(cfg.pool_gb)?;
        let first = cfg.pool_gb * share as f64 / 10.0;
        pool.add_tenant(&tenants[0].id, first)?;
        pool.add_tenant(&tenants[1].id, pool.free_gb())?;
        splits.push([pool.allocation_gb(&tenants[0].id)?, pool.allocation_gb(&tenants[1].id)?]);
    }

    let per_tenant = par::map_range(exec, 2, |k| -> Result<(Vec<f64>, Vec<f64>)> {
        let t = &tenants[k];
        let ks = keyspace_from_gb(t.data_gb)?;
        let seed = derive_seed(cfg.seed, k as u64);
        let n = cfg.trace_length;
        let allocs: Vec<f64> = splits.iter().map(|s| s[k]).collect();
        let measured = hit_rate_curve(
            t.distribution,
            ks,
            &allocs,
            n,
            DEFAULT_WARMUP_FRACTION,
            seed,
            Exec::Sequential,
        )?;
        let head = generate_trace(t.distribution, ks, cfg.estimate_samples.min(n), seed)?;
        let est = Estimator::new(ks, cfg.estimator)?
            .with_exec(Exec::Sequential)
            .estimate(&head.keys, derive_seed(seed, 1))?;
        let model = models.get(est.spec.family)?;
        let predicted = allocs
            .iter()
            .map(|&c| model.predict_hit(&FeatureVector::new(t.data_gb, c, est.spec.param)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok((predicted, measured))
    });
    let per_tenant: Vec<(Vec<f64>, Vec<f64>)> = per_tenant.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(2 * cfg.ratios.len());
    for (r, &share) in cfg.ratios.iter().enumerate() {
        for (k, t) in tenants.iter().enumerate() {
            rows.push(RatioRow {
                share,
                tenant_id: t.id.clone(),
                alloc_gb: splits[r][k],
                predicted_hit_pct: per_tenant[k].0[r],
                measured_hit_pct: per_tenant[k].1[r],
            });
        }
    }
    Ok(rows)
}

pub fn run_accuracy_study(cfg: &ScenarioConfig, exec: Exec) -> Result<Vec<AccuracyRow>> {
    let ks = keyspace_from_gb(cfg.accuracy.data_gb)?;
    accuracy_study(
        &cfg.accuracy.sample_counts,
        cfg.accuracy.trials,
        cfg.seed,
        ks,
        &cfg.estimator,
        exec,
    )
}

pub fn train_options(cfg: &ScenarioConfig, family: Family) -> TrainOptions {
    let mut opts = TrainOptions::for_family(family);
    if let Some(fcn) = cfg.training.fcn {
        opts.fcn = fcn;
    }
    if let Some(gpr) = cfg.training.gpr {
        opts.gpr = gpr;
    }
    opts
}

/// Simulator-labelled training and testing data for one family.
pub fn family_datasets(cfg: &ScenarioConfig, family: Family, exec: Exec) -> Result<(TrainingSet, TrainingSet)> {
    let oracle = SimulatorOracle {
        exec,
        ..SimulatorOracle::with_queries(cfg.training.queries_per_point)
    };
    let train = build_training_set(&DataGrid::training(family), &oracle, dataset_seed(cfg.seed, family, 0))?;
    let test = build_training_set(&DataGrid::testing(family), &oracle, dataset_seed(cfg.seed, family, 1))?;
    Ok((train, test))
}

#[derive(Debug, Clone)]
pub struct FamilyResult {
    pub train: TrainingSet,
    pub test: TrainingSet,
    pub models: Vec<HitRateModel>,
    pub eval: Vec<EvalRow>,
}

/// Builds data, trains every configured model kind and scores it on the
/// testing grid, for each configured family.
pub fn train_eval(cfg: &ScenarioConfig, exec: Exec) -> Result<Vec<FamilyResult>> {
    let kinds = cfg.training.model_kinds()?;
    cfg.training
        .families
        .iter()
        .map(|&family| {
            let (train, test) = family_datasets(cfg, family, exec)?;
            let opts = train_options(cfg, family);
            let mut models = Vec::with_capacity(kinds.len());
            let mut eval = Vec::with_capacity(kinds.len());
            for &kind in &kinds {
                let m = train_model(kind, &train, &opts)?;
                eval.push(EvalRow {
                    family,
                    model_kind: kind.name().to_string(),
                    mse: evaluate(&m, &test)?,
                });
                models.push(m);
            }
            Ok(FamilyResult {
                train,
                test,
                models,
                eval,
            })
        })
        .collect()
}

/// What a run produced, for the CLI.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// AdminAlert events raised during the run.
    pub alerts: usize,
}

/// Runs the configured scenario and writes its outputs to `out`. Models are
/// loaded from the configured directory unless `models` is given.
pub fn run_scenario(cfg: &ScenarioConfig, models: Option<&ModelSet>, out: &Path, exec: Exec) -> Result<RunReport> {
    cfg.validate()?;
    let loaded;
    let models = match (models, cfg.scenario.needs_models()) {
        (Some(m), _) => Some(m),
        (None, true) => {
            loaded = load_model_set(&cfg.models_dir, cfg.model_kind()?)?;
            Some(&loaded)
        }
        (None, false) => None,
    };
    let mut files = Vec::new();
    let mut put = |dir: &Path, name: &str, body: Vec<u8>| -> Result<()> {
        files.push(write_file(dir, name, body)?);
        Ok(())
    };
    put(out, SCENARIO_FILE, cfg.to_json().into_bytes())?;
    let models = || models.ok_or_else(|| Error::State("no models loaded".into()));
    let mut alerts = 0;
    match cfg.scenario {
        ScenarioKind::SingleResize => {
            let o = single_resize(cfg, models()?)?;
            put(out, RUN_STATS_FILE, o.run.stats.to_csv().into_bytes())?;
            put(out, DECISIONS_FILE, decision_log_csv(&o.run.decisions).into_bytes())?;
            put(out, SUMMARY_FILE, o.summary.to_csv().into_bytes())?;
            alerts = o.run.alerts();
        }
        ScenarioKind::MultiPhase => {
            let o = multi_phase(cfg, models()?)?;
            put(out, RUN_STATS_FILE, o.run.stats.to_csv().into_bytes())?;
            put(out, DECISIONS_FILE, decision_log_csv(&o.run.decisions).into_bytes())?;
            put(out, PHASES_FILE, phases_csv(&o.phases).into_bytes())?;
            alerts = o.run.alerts();
        }
        ScenarioKind::TwoTenantRatio => {
            let rows = two_tenant_ratio(cfg, models()?, exec)?;
            put(out, RATIO_FILE, ratio_csv(&rows).into_bytes())?;
        }
        ScenarioKind::AccuracyStudy => {
            let rows = run_accuracy_study(cfg, exec)?;
            put(out, ACCURACY_FILE, AccuracyRow::to_csv(&rows).into_bytes())?;
        }
        ScenarioKind::TrainEval => {
            let results = train_eval(cfg, exec)?;
            let data = out.join("data");
            let model_dir = out.join("models");
            for r in &results {
                let f = r.train.family.name();
                put(&data, &format!("{f}-train.csv"), r.train.to_csv().into_bytes())?;
                put(&data, &format!("{f}-test.csv"), r.test.to_csv().into_bytes())?;
                for m in &r.models {
                    let kind = m.kind().expect("trained model has a kind");
                    put(&model_dir, &model_file_name(m.family, kind), m.to_bytes()?)?;
                }
            }
            let rows: Vec<EvalRow> = results.into_iter().flat_map(|r| r.eval).collect();
            put(out, EVAL_FILE, eval_report_csv(&rows).into_bytes())?;
        }
    }
    Ok(RunReport { files, alerts })
}
