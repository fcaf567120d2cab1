//! Battery cycle-aging analysis and degradation cost model benchmarking.
//!
//! The pipeline: ingest cycle-summary CSVs ([`ingest`]), clean them
//! ([`preprocess`]), calibrate the linear and DOD-based degradation cost
//! models and a measured benchmark ([`models`]), mine cycles out of dispatch
//! schedules ([`cycles`]), and compare the models per scenario with CSV and
//! SVG outputs ([`report`], [`emit`], [`svg`]).
//!
//! Everything is deterministic: no randomness, no timestamps, identical
//! inputs give byte-identical outputs.

pub mod config;
pub mod cycles;
pub mod emit;
pub mod ingest;
pub mod meta;
pub mod models;
pub mod preprocess;
pub mod report;
pub mod svg;

pub use config::{load_run_config, ConfigError, RunConfig};
pub use cycles::{extract_cycles, soc_from_power, CycleError, ExtractedCycles, SocProfile};
pub use ingest::{
    load_dataset, load_manifest, parse_cycle_csv, parse_schedule_csv, CapacitySeries, ColumnMap,
    IngestError, Manifest,
};
pub use meta::{parse_test_name, AgingTestMeta, Chemistry, SocWindow};
pub use models::{
    benchmark_fade, calibrate_dod_table, calibrate_linear, dod_cost, linear_cost,
    model_fade_per_cycle, BenchmarkModel, DodCostTable, EconParams, LinearParams, ModelError,
    ScenarioKey, Schedule, ThroughputConvention,
};
pub use preprocess::{
    clean_series, compute_deltas, drop_idle_cycles, flag_rpt_spikes, truncate_at_eol,
    CleanCapacitySeries, CleanParams, DegradationSeries, PreprocessError,
};
pub use report::{
    compare_models, group_scenarios, ratio_report, summarize_dataset, GroupField, ReportError,
    ScenarioReport,
};

/// Any error the pipeline can produce.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cycle(#[from] CycleError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

pub type Result<T> = std::result::Result<T, Error>;
