//! Scenario grouping and model comparison reports.
//!
//! Tests are partitioned into scenarios by a chosen subset of metadata
//! fields, each scenario's benchmark is computed from its pooled deltas,
//! and both heuristic models are evaluated at the scenario's DOD. Every
//! report row echoes the configuration that produced it so a figure can be
//! reproduced from its own file.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ingest::CapacitySeries;
use crate::meta::{AgingTestMeta, Chemistry};
use crate::models::{
    benchmark_fade, cycle_throughput_kwh, model_fade_per_cycle, CycleDescriptor, DodCostTable,
    EconParams, FadeModel, LinearParams, ModelError, ScenarioKey, ThroughputConvention,
};
use crate::preprocess::{CleanCapacitySeries, DegradationSeries};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("test '{test}': missing or non-finite metadata field '{field}'")]
    MissingMetadata { test: String, field: &'static str },
    #[error("scenarios are not comparable: {0}")]
    IncomparableScenarios(String),
    #[error("scenario '{scenario}': DOD is not resolvable ({reason})")]
    AmbiguousDod { scenario: String, reason: String },
    #[error("nothing to plot")]
    EmptyPlot,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Metadata fields a scenario partition can key on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupField {
    Chemistry,
    Temperature,
    ChargeRate,
    DischargeRate,
    Dod,
}

impl GroupField {
    pub const ALL: [GroupField; 5] = [
        GroupField::Chemistry,
        GroupField::Temperature,
        GroupField::ChargeRate,
        GroupField::DischargeRate,
        GroupField::Dod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupField::Chemistry => "chemistry",
            GroupField::Temperature => "temperature",
            GroupField::ChargeRate => "charge-rate",
            GroupField::DischargeRate => "discharge-rate",
            GroupField::Dod => "dod",
        }
    }
}

impl std::fmt::Display for GroupField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GroupField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "chemistry" | "chem" => Ok(GroupField::Chemistry),
            "temperature" | "temp" => Ok(GroupField::Temperature),
            "charge-rate" => Ok(GroupField::ChargeRate),
            "discharge-rate" => Ok(GroupField::DischargeRate),
            "dod" => Ok(GroupField::Dod),
            other => Err(format!(
                "unknown group field '{other}' (expected chemistry, temperature, charge-rate, discharge-rate or dod)"
            )),
        }
    }
}

/// Anything carrying test metadata can be grouped into scenarios.
pub trait HasMeta {
    fn meta(&self) -> &AgingTestMeta;
}

impl HasMeta for CapacitySeries {
    fn meta(&self) -> &AgingTestMeta {
        &self.meta
    }
}

impl HasMeta for CleanCapacitySeries {
    fn meta(&self) -> &AgingTestMeta {
        &self.meta
    }
}

impl HasMeta for DegradationSeries {
    fn meta(&self) -> &AgingTestMeta {
        &self.meta
    }
}

fn scenario_key_for(meta: &AgingTestMeta, fields: &[GroupField]) -> ScenarioKey {
    let mut key = ScenarioKey {
        chemistry: None,
        ambient_temp_c: None,
        charge_rate_c: None,
        discharge_rate_c: None,
        dod_percent: None,
    };
    for f in fields {
        match f {
            GroupField::Chemistry => key.chemistry = Some(meta.chemistry),
            GroupField::Temperature => key.ambient_temp_c = Some(meta.ambient_temp_c),
            GroupField::ChargeRate => key.charge_rate_c = Some(meta.charge_rate_c),
            GroupField::DischargeRate => key.discharge_rate_c = Some(meta.discharge_rate_c),
            GroupField::Dod => key.dod_percent = Some(meta.dod_percent()),
        }
    }
    key
}

/// Partition a dataset into scenarios keyed on the given fields.
///
/// Every item lands in exactly one group; keys come out in sorted order.
pub fn group_scenarios<'a, T: HasMeta>(
    items: &'a [T],
    fields: &[GroupField],
) -> Result<BTreeMap<ScenarioKey, Vec<&'a T>>, ReportError> {
    let mut groups: BTreeMap<ScenarioKey, Vec<&'a T>> = BTreeMap::new();
    for item in items {
        let meta = item.meta();
        for f in fields {
            let (name, value): (&'static str, f64) = match f {
                GroupField::Chemistry => ("chemistry", 0.0),
                GroupField::Temperature => ("ambient_temp_c", meta.ambient_temp_c),
                GroupField::ChargeRate => ("charge_rate_c", meta.charge_rate_c),
                GroupField::DischargeRate => ("discharge_rate_c", meta.discharge_rate_c),
                GroupField::Dod => ("dod_percent", meta.dod_percent()),
            };
            if !value.is_finite() {
                return Err(ReportError::MissingMetadata {
                    test: meta.test_id.clone(),
                    field: name,
                });
            }
        }
        groups
            .entry(scenario_key_for(meta, fields))
            .or_default()
            .push(item);
    }
    Ok(groups)
}

/// Configuration echoed into every report row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEcho {
    pub throughput_convention: ThroughputConvention,
    /// Which aging tests (or explicit table) calibrated the DOD model.
    pub calibration_source: String,
    /// Idle threshold policy, e.g. `0.05*nominal` or a literal Ah value.
    pub idle_eps_spec: String,
    pub spike_window: usize,
    pub spike_k: f64,
    pub eol_fraction: f64,
}

/// One model's prediction against the benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelComparison {
    pub fade_ah_per_cycle: f64,
    pub cost_per_cycle: f64,
    pub abs_err_ah: f64,
    /// `(model - benchmark) / benchmark`; `None` when the benchmark is zero.
    pub rel_err: Option<f64>,
}

/// Three-way comparison for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub key: ScenarioKey,
    pub n_tests: usize,
    pub benchmark_fade_ah_per_cycle: f64,
    pub benchmark_cost_per_cycle: f64,
    pub linear: ModelComparison,
    pub dod: ModelComparison,
    pub echo: ConfigEcho,
}

fn compare_against(benchmark: f64, fade: f64, value_per_ah: f64) -> ModelComparison {
    ModelComparison {
        fade_ah_per_cycle: fade,
        cost_per_cycle: fade * value_per_ah,
        abs_err_ah: fade - benchmark,
        rel_err: if benchmark != 0.0 {
            Some((fade - benchmark) / benchmark)
        } else {
            None
        },
    }
}

/// The DOD at which the scenario's models are evaluated: the grouped key
/// value when present, otherwise the (unique) DOD of the member tests.
fn scenario_dod(key: &ScenarioKey, series: &[&DegradationSeries]) -> Result<f64, ReportError> {
    if let Some(dod) = key.dod_percent {
        return Ok(dod);
    }
    let mut dods: Vec<f64> = series.iter().map(|s| s.meta.dod_percent()).collect();
    dods.sort_by(f64::total_cmp);
    dods.dedup_by(|a, b| a == b);
    match dods.as_slice() {
        [one] => Ok(*one),
        _ => Err(ReportError::AmbiguousDod {
            scenario: key.label(),
            reason: format!("member tests span DODs {dods:?}"),
        }),
    }
}

/// Evaluate both heuristic models against the benchmark for one scenario.
pub fn compare_models(
    key: &ScenarioKey,
    series: &[&DegradationSeries],
    linear: &LinearParams,
    table: &DodCostTable,
    econ: &EconParams,
    echo: &ConfigEcho,
) -> Result<ScenarioReport, ReportError> {
    let benchmark = benchmark_fade(key, series)?;
    let dod = scenario_dod(key, series)?;
    let cycle = CycleDescriptor {
        dod_percent: dod,
        throughput_kwh: cycle_throughput_kwh(dod, econ.e_bess_kwh, echo.throughput_convention),
    };
    let linear_fade = model_fade_per_cycle(
        &FadeModel::Linear {
            params: linear,
            econ,
        },
        &cycle,
    )?;
    let dod_fade = model_fade_per_cycle(&FadeModel::DodTable(table), &cycle)?;

    let value = econ.value_per_ah();
    let bench = benchmark.mean_fade_ah_per_cycle;
    Ok(ScenarioReport {
        key: key.clone(),
        n_tests: series.len(),
        benchmark_fade_ah_per_cycle: bench,
        benchmark_cost_per_cycle: bench * value,
        linear: compare_against(bench, linear_fade, value),
        dod: compare_against(bench, dod_fade, value),
        echo: echo.clone(),
    })
}

/// Benchmark fade per temperature, as a ratio to the coldest scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub ambient_temp_c: f64,
    pub benchmark_fade_ah_per_cycle: f64,
    pub ratio_vs_coldest: f64,
}

/// Build the temperature ratio table from reports that differ only in
/// temperature.
pub fn ratio_report(reports: &[ScenarioReport]) -> Result<Vec<RatioRow>, ReportError> {
    if reports.len() < 2 {
        return Err(ReportError::IncomparableScenarios(format!(
            "need at least 2 temperature scenarios, got {}",
            reports.len()
        )));
    }
    let first = &reports[0].key;
    for r in reports {
        let k = &r.key;
        if k.ambient_temp_c.is_none() {
            return Err(ReportError::IncomparableScenarios(
                "scenario key lacks a temperature".to_string(),
            ));
        }
        if k.chemistry != first.chemistry
            || k.charge_rate_c != first.charge_rate_c
            || k.discharge_rate_c != first.discharge_rate_c
            || k.dod_percent != first.dod_percent
        {
            return Err(ReportError::IncomparableScenarios(format!(
                "'{}' and '{}' differ in more than temperature",
                first.label(),
                k.label()
            )));
        }
    }

    let mut rows: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| (r.key.ambient_temp_c.unwrap(), r.benchmark_fade_ah_per_cycle))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let coldest_fade = rows[0].1;
    if coldest_fade == 0.0 {
        return Err(ReportError::IncomparableScenarios(
            "coldest scenario has zero benchmark fade".to_string(),
        ));
    }
    Ok(rows
        .into_iter()
        .map(|(temp, fade)| RatioRow {
            ambient_temp_c: temp,
            benchmark_fade_ah_per_cycle: fade,
            ratio_vs_coldest: fade / coldest_fade,
        })
        .collect())
}

/// One cell of the dataset census.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensusRow {
    pub chemistry: Chemistry,
    pub discharge_rate_c: f64,
    pub count: usize,
}

/// Count tests by chemistry and discharge rate; zero cells are omitted.
pub fn summarize_dataset<T: HasMeta>(items: &[T]) -> Vec<CensusRow> {
    let mut cells: BTreeMap<(Chemistry, u64), usize> = BTreeMap::new();
    for item in items {
        let meta = item.meta();
        // total_cmp-compatible bit key keeps ordering deterministic.
        *cells
            .entry((meta.chemistry, sortable_bits(meta.discharge_rate_c)))
            .or_insert(0) += 1;
    }
    cells
        .into_iter()
        .map(|((chemistry, bits), count)| CensusRow {
            chemistry,
            discharge_rate_c: from_sortable_bits(bits),
            count,
        })
        .collect()
}

fn sortable_bits(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 0 {
        bits | (1 << 63)
    } else {
        !bits
    }
}

fn from_sortable_bits(bits: u64) -> f64 {
    if bits >> 63 == 1 {
        f64::from_bits(bits & !(1 << 63))
    } else {
        f64::from_bits(!bits)
    }
}
