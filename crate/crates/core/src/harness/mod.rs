//! Scenario runner and CLI: builds training data, trains and scores models,
//! and replays the resize experiments as seeded simulations with CSV output.

pub mod cli;
mod config;
mod report;
mod scenarios;

pub use config::{
    distribution_label, parse_distribution, AccuracyConfig, PhaseSpec, ScenarioConfig, ScenarioKind, TenantSpec,
    TrainingConfig, YCSB_LIKE,
};
pub use report::{report, Report, PLOT_HIT_RATE_FILE, PLOT_LATENCY_FILE, PLOT_RATIO_FILE};
pub use scenarios::{
    dataset_seed, family_datasets, load_model_set, model_file_name, multi_phase, phases_csv, range_hit_pct, ratio_csv,
    run_accuracy_study, run_scenario, single_resize, train_eval, train_options, two_tenant_ratio, FamilyResult,
    MultiPhaseOutcome, PhaseRow, RatioRow, ResizeSummary, RunReport, SingleResizeOutcome, TenantRun, ACCURACY_FILE,
    DECISIONS_FILE, EVAL_FILE, PHASES_CSV_HEADER, PHASES_FILE, RATIO_CSV_HEADER, RATIO_FILE, RUN_STATS_FILE,
    SCENARIO_FILE, SUMMARY_CSV_HEADER, SUMMARY_FILE,
};
