//! Scenario configuration: one JSON document per run.
//!
//! Fields missing from a file take the defaults of the file's scenario kind,
//! so `{"scenario": "multi_phase"}` alone is a complete configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::cachesim::{LatencyModel, DEFAULT_ORACLE_QUERIES, DEFAULT_WINDOW};
use crate::controller::ControlOptions;
use crate::error::{Error, Result};
use crate::estimator::GridConfig;
use crate::predictor::{FcnConfig, GprConfig, ModelKind};
use crate::workload::{DistributionSpec, Family};

/// Label accepted wherever a distribution is parsed: a Zipf trace standing
/// in for a YCSB workload.
pub const YCSB_LIKE: &str = "ycsb-like";
const YCSB_RHO: f64 = 1.0;

/// Parses `uniform`, `zipf:0.7`, `gaussian:1.3`, ... or `ycsb-like`.
pub fn parse_distribution(s: &str) -> Result<DistributionSpec> {
    if s.trim().eq_ignore_ascii_case(YCSB_LIKE) {
        return DistributionSpec::zipf(YCSB_RHO);
    }
    s.parse()
}

/// Inverse of [`parse_distribution`].
pub fn distribution_label(spec: &DistributionSpec) -> String {
    match spec.family {
        Family::Uniform => "uniform".to_string(),
        f => format!("{}:{}", f.name(), spec.param),
    }
}

mod dist_str {
    use super::*;

    pub fn serialize<S: Serializer>(spec: &DistributionSpec, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&distribution_label(spec))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DistributionSpec, D::Error> {
        let s = String::deserialize(d)?;
        parse_distribution(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleResize,
    MultiPhase,
    TwoTenantRatio,
    AccuracyStudy,
    TrainEval,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::SingleResize,
        ScenarioKind::MultiPhase,
        ScenarioKind::TwoTenantRatio,
        ScenarioKind::AccuracyStudy,
        ScenarioKind::TrainEval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::SingleResize => "single_resize",
            ScenarioKind::MultiPhase => "multi_phase",
            ScenarioKind::TwoTenantRatio => "two_tenant_ratio",
            ScenarioKind::AccuracyStudy => "accuracy_study",
            ScenarioKind::TrainEval => "train_eval",
        }
    }

    /// Whether the scenario drives the controller and needs trained models.
    pub fn needs_models(self) -> bool {
        matches!(
            self,
            ScenarioKind::SingleResize | ScenarioKind::MultiPhase | ScenarioKind::TwoTenantRatio
        )
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('-', "_");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TenantSpec {
    pub id: String,
    pub data_gb: f64,
    #[serde(with = "dist_str")]
    pub distribution: DistributionSpec,
    pub required_hit_pct: f64,
    pub delta1_pct: f64,
    pub delta2_pct: f64,
    pub initial_gb: f64,
}

impl Default for TenantSpec {
    fn default() -> Self {
        Self {
            id: "tenant-0".to_string(),
            data_gb: 3.0,
            distribution: DistributionSpec::uniform(),
            required_hit_pct: 80.0,
            delta1_pct: 5.0,
            delta2_pct: 5.0,
            initial_gb: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    #[serde(with = "dist_str")]
    pub distribution: DistributionSpec,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracyConfig {
    pub sample_counts: Vec<usize>,
    pub trials: usize,
    pub data_gb: f64,
}

impl Default for AccuracyConfig {
    fn default() -> Self {
        Self {
            sample_counts: vec![100, 200, 300, 500, 1000, 2000],
            trials: 100,
            data_gb: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub families: Vec<Family>,
    pub kinds: Vec<String>,
    pub queries_per_point: usize,
    /// Replace the per-family tuned configurations when set.
    pub fcn: Option<FcnConfig>,
    pub gpr: Option<GprConfig>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            kinds: ModelKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            queries_per_point: DEFAULT_ORACLE_QUERIES,
            fcn: None,
            gpr: None,
        }
    }
}

impl TrainingConfig {
    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        self.kinds.iter().map(|k| k.parse()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub tenants: Vec<TenantSpec>,
    /// Queries per tenant (single-resize, ratio sweep and `gen-trace`).
    pub trace_length: usize,
    /// Multi-phase workload; total length overrides `trace_length`.
    pub phases: Vec<PhaseSpec>,
    pub control_every: usize,
    /// Most recent keys handed to the estimator at each control step.
    pub estimate_samples: usize,
    pub report_window: usize,
    /// Queries after a resize excluded from "after" measurements.
    pub warmup_exclusion: usize,
    pub pool_gb: f64,
    pub node_count: u32,
    pub grid_step_gb: f64,
    pub max_gb: f64,
    pub only_on_pattern_change: bool,
    pub models_dir: PathBuf,
    pub model_kind: String,
    /// Tenant-1 shares (in tenths of the pool) for the ratio sweep.
    pub ratios: Vec<u32>,
    pub accuracy: AccuracyConfig,
    pub training: TrainingConfig,
    pub latency: LatencyModel,
    pub estimator: GridConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::defaults(ScenarioKind::SingleResize)
    }
}

impl ScenarioConfig {
    /// Defaults of each scenario kind.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let base = Self {
            scenario: kind,
            seed: 42,
            tenants: vec![TenantSpec::default()],
            trace_length: 1_000_000,
            phases: Vec::new(),
            control_every: 10_000,
            estimate_samples: 10_000,
            report_window: DEFAULT_WINDOW,
            warmup_exclusion: 50_000,
            pool_gb: 18.0,
            node_count: 3,
            grid_step_gb: 0.1,
            max_gb: 4.0,
            only_on_pattern_change: true,
            models_dir: PathBuf::from("models"),
            model_kind: ModelKind::Fcn.name().to_string(),
            ratios: (1..=9).collect(),
            accuracy: AccuracyConfig::default(),
            training: TrainingConfig::default(),
            latency: LatencyModel::default(),
            estimator: GridConfig::default(),
        };
        match kind {
            ScenarioKind::MultiPhase => {
                let phase = |spec: DistributionSpec| PhaseSpec {
                    distribution: spec,
                    length: 250_000,
                };
                Self {
                    tenants: vec![TenantSpec {
                        delta1_pct: 0.0,
                        delta2_pct: 0.0,
                        ..TenantSpec::default()
                    }],
                    phases: vec![
                        phase(DistributionSpec::exponential(0.9).expect("valid")),
                        phase(DistributionSpec::zipf(1.1).expect("valid")),
                        phase(DistributionSpec::uniform()),
                        phase(DistributionSpec::gaussian(1.3).expect("valid")),
                    ],
                    report_window: 2_500,
                    ..base
                }
            }
            ScenarioKind::TwoTenantRatio => Self {
                tenants: vec![
                    TenantSpec {
                        id: "tenant-1".to_string(),
                        ..TenantSpec::default()
                    },
                    TenantSpec {
                        id: "tenant-2".to_string(),
                        ..TenantSpec::default()
                    },
                ],
                trace_length: 500_000,
                pool_gb: 3.0,
                ..base
            },
            _ => base,
        }
    }

    /// Parses a JSON document over the defaults of its `scenario` kind.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value =
            serde_json::from_str(text).map_err(|e| Error::format(format!("config is not valid JSON: {e}")))?;
        let Value::Object(_) = &user else {
            return Err(Error::format("config must be a JSON object"));
        };
        let kind = match user.get("scenario") {
            None => ScenarioKind::SingleResize,
            Some(Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::format(format!("`scenario` must be a string, got {other}"))),
        };
        let mut merged = serde_json::to_value(Self::defaults(kind)).expect("defaults serialize");
        merge(&mut merged, user);
        let cfg: Self = serde_json::from_value(merged).map_err(|e| Error::format(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(m) => Error::format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        self.model_kind.parse()
    }

    pub fn control_options(&self) -> ControlOptions {
        ControlOptions {
            grid_step_gb: self.grid_step_gb,
            max_gb: self.max_gb,
            only_on_pattern_change: self.only_on_pattern_change,
        }
    }

    /// The workload as `(distribution, length)` phases: the configured
    /// phases, or the first tenant's distribution for `trace_length`.
    pub fn workload_phases(&self) -> Result<Vec<(DistributionSpec, usize)>> {
        if !self.phases.is_empty() {
            return Ok(self.phases.iter().map(|p| (p.distribution, p.length)).collect());
        }
        let t = self
            .tenants
            .first()
            .ok_or_else(|| Error::invalid("no tenant configured"))?;
        Ok(vec![(t.distribution, self.trace_length)])
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        if self.trace_length == 0 {
            return Err(Error::invalid("trace_length must be at least 1"));
        }
        if self.phases.iter().any(|p| p.length == 0) {
            return Err(Error::invalid("every phase needs at least one query"));
        }
        positive(self.pool_gb, "pool_gb")?;
        positive(self.grid_step_gb, "grid_step_gb")?;
        positive(self.max_gb, "max_gb")?;
        if self.node_count == 0 {
            return Err(Error::invalid("node_count must be at least 1"));
        }
        for (v, what) in [
            (self.control_every, "control_every"),
            (self.estimate_samples, "estimate_samples"),
            (self.report_window, "report_window"),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("{what} must be at least 1")));
            }
        }
        for t in &self.tenants {
            positive(t.data_gb, "tenant data_gb")?;
            if !(t.required_hit_pct > 0.0 && t.required_hit_pct <= 100.0) {
                return Err(Error::invalid(format!(
                    "tenant `{}` required_hit_pct must lie in (0, 100]",
                    t.id
                )));
            }
            if !(t.delta1_pct >= 0.0 && t.delta2_pct >= 0.0 && t.initial_gb >= 0.0) {
                return Err(Error::invalid(format!(
                    "tenant `{}` has a negative margin or allocation",
                    t.id
                )));
            }
        }
        let needs_tenants = match self.scenario {
            ScenarioKind::TwoTenantRatio => 2,
            ScenarioKind::SingleResize | ScenarioKind::MultiPhase => 1,
            _ => 0,
        };
        if self.tenants.len() < needs_tenants {
            return Err(Error::invalid(format!(
                "{} needs {needs_tenants} tenant(s), {} configured",
                self.scenario,
                self.tenants.len()
            )));
        }
        if let Some(&r) = self.ratios.iter().find(|&&r| r == 0 || r >= 10) {
            return Err(Error::invalid(format!("ratio share {r} must lie in 1..=9")));
        }
        self.model_kind()?;
        self.training.model_kinds()?;
        self.estimator.validate()
    }
}

/// Overlays `patch` onto `base`, recursing into objects and replacing
/// everything else.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_defaults_fill_missing_fields() {
        let c = ScenarioConfig::from_json(r#"{"scenario": "multi_phase", "seed": 7}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.phases.len(), 4);
        assert_eq!(c.report_window, 2_500);
        assert_eq!(c.tenants[0].delta1_pct, 0.0);
        let c = ScenarioConfig::from_json("{}").unwrap();
        assert_eq!(c.scenario, ScenarioKind::SingleResize);
        assert_eq!(c.tenants[0].delta1_pct, 5.0);
    }

    #[test]
    fn nested_objects_merge_field_by_field() {
        let c = ScenarioConfig::from_json(r#"{"scenario": "accuracy_study", "accuracy": {"trials": 5}}"#).unwrap();
        assert_eq!(c.accuracy.trials, 5);
        assert_eq!(c.accuracy.sample_counts.len(), 6);
    }

    #[test]
    fn json_round_trip() {
        for kind in ScenarioKind::ALL {
            let c = ScenarioConfig::defaults(kind);
            assert_eq!(ScenarioConfig::from_json(&c.to_json()).unwrap(), c);
        }
    }

    #[test]
    fn distribution_strings() {
        let t: TenantSpec = serde_json::from_str(r#"{"distribution": "zipf:0.7"}"#).unwrap();
        assert_eq!(t.distribution, DistributionSpec::zipf(0.7).unwrap());
        assert_eq!(
            parse_distribution("ycsb-like").unwrap(),
            DistributionSpec::zipf(1.0).unwrap()
        );
        assert!(serde_json::from_str::<TenantSpec>(r#"{"distribution": "pareto:1"}"#).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(ScenarioConfig::from_json("[1]"), Err(Error::Format(_))));
        assert!(matches!(
            ScenarioConfig::from_json(r#"{"bogus": 1}"#),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_json(r#"{"trace_length": 0}"#),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_json(r#"{"pool_gb": 0}"#),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_json(r#"{"scenario": "two_tenant_ratio", "tenants": [{}]}"#),
            Err(Error::InvalidArgument(_))
        ));
        assert!(ScenarioConfig::from_json(r#"{"scenario": "nope"}"#).is_err());
    }
}
