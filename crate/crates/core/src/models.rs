//! The three degradation models and their calibration.
//!
//! Model 1 prices throughput linearly: a constant cost per kWh moved,
//! derived from capital cost spread over the rated lifetime energy. Model 2
//! prices each cycle by its depth of discharge through a calibrated lookup
//! table. The benchmark is not a model at all: it is the pooled mean of the
//! measured per-cycle fade under one scenario, and exists to gauge the other
//! two. Everything here converts into a common unit, Ah of fade per cycle,
//! so the three are directly comparable.
//!
//! Neither heuristic model takes ambient temperature or discharge rate as
//! input, so their predictions are identical across scenarios that differ
//! only in those fields; the comparison reports exist to quantify the error
//! that blindness causes.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meta::{AgingTestMeta, Chemistry};
use crate::preprocess::DegradationSeries;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid economic parameters: {0}")]
    InvalidEcon(String),
    #[error("empty calibration group at DOD {dod_percent}%")]
    EmptyGroup { dod_percent: f64 },
    #[error("empty DOD table")]
    EmptyTable,
    #[error("DOD {0}% out of range (0, 100]")]
    DodOutOfRange(f64),
    #[error("invalid DOD table: {0}")]
    InvalidTable(String),
    #[error("invalid schedule at step {step}: {reason}")]
    InvalidSchedule { step: usize, reason: String },
    #[error("no degradation series supplied")]
    EmptyInput,
    #[error("series '{test_id}' does not match scenario field {field}")]
    ScenarioMismatch {
        test_id: String,
        field: &'static str,
    },
}

/// Economic constants of the storage system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    /// Total investment cost, in currency units.
    pub c_bess: f64,
    /// Usable energy capacity, kWh.
    pub e_bess_kwh: f64,
    /// Predicted lifecycle count at rated conditions.
    pub cycle_life: u32,
    /// Capacity fraction lost at end of life (default 0.2, i.e. 80% EOL).
    #[serde(default = "default_fade_eol_fraction")]
    pub fade_eol_fraction: f64,
    /// Nominal cell capacity, Ah.
    pub nominal_capacity_ah: f64,
}

fn default_fade_eol_fraction() -> f64 {
    0.2
}

impl EconParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::InvalidEcon(m.to_string()));
        if !(self.c_bess > 0.0 && self.c_bess.is_finite()) {
            return fail("c_bess must be strictly positive");
        }
        if !(self.e_bess_kwh > 0.0 && self.e_bess_kwh.is_finite()) {
            return fail("e_bess_kwh must be strictly positive");
        }
        if self.cycle_life == 0 {
            return fail("cycle_life must be strictly positive");
        }
        if !(self.fade_eol_fraction > 0.0 && self.fade_eol_fraction < 1.0) {
            return fail("fade_eol_fraction must be in (0, 1)");
        }
        if !(self.nominal_capacity_ah > 0.0 && self.nominal_capacity_ah.is_finite()) {
            return fail("nominal_capacity_ah must be strictly positive");
        }
        Ok(())
    }

    /// Currency value of one Ah of fade: capital cost spread over the total
    /// capacity loss budget.
    pub fn value_per_ah(&self) -> f64 {
        self.c_bess / (self.fade_eol_fraction * self.nominal_capacity_ah)
    }
}

/// Calibrated linear model: constant cost per kWh of throughput.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub c_bd: f64,
}

/// `c_bd = c_bess / (cycle_life * e_bess)`.
pub fn calibrate_linear(econ: &EconParams) -> Result<LinearParams, ModelError> {
    econ.validate()?;
    Ok(LinearParams {
        c_bd: econ.c_bess / (econ.cycle_life as f64 * econ.e_bess_kwh),
    })
}

/// One dispatch interval. Charge and discharge are mutually exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    /// Period start time, hours.
    pub t_h: f64,
    pub duration_h: f64,
    pub p_charge_kw: f64,
    pub p_discharge_kw: f64,
}

/// A dispatch power profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub steps: Vec<ScheduleStep>,
}

impl Schedule {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, s) in self.steps.iter().enumerate() {
            let fail = |reason: &str| {
                Err(ModelError::InvalidSchedule {
                    step: i,
                    reason: reason.to_string(),
                })
            };
            if !(s.duration_h > 0.0 && s.duration_h.is_finite()) {
                return fail("duration_h must be strictly positive");
            }
            if !(s.p_charge_kw >= 0.0 && s.p_charge_kw.is_finite()) {
                return fail("p_charge_kw must be >= 0");
            }
            if !(s.p_discharge_kw >= 0.0 && s.p_discharge_kw.is_finite()) {
                return fail("p_discharge_kw must be >= 0");
            }
            if s.p_charge_kw > 0.0 && s.p_discharge_kw > 0.0 {
                return fail("charge and discharge cannot both be nonzero");
            }
        }
        Ok(())
    }
}

/// Linear degradation cost of a schedule:
/// `sum_t c_bd * (p_charge + p_discharge) * duration_h`.
///
/// The duration factor keeps the cost in currency at any time resolution;
/// with one-hour steps it reduces to a plain power sum.
pub fn linear_cost(params: &LinearParams, schedule: &Schedule) -> f64 {
    schedule
        .steps
        .iter()
        .map(|s| params.c_bd * (s.p_charge_kw + s.p_discharge_kw) * s.duration_h)
        .sum()
}

/// How per-cycle energy throughput is counted when converting between the
/// linear model and per-cycle fade.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThroughputConvention {
    /// Charge plus discharge: one full cycle moves `2 * E * dod` of energy.
    #[default]
    Sum,
    /// Discharge side only: one full cycle moves `E * dod`.
    DischargeOnly,
}

impl ThroughputConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            ThroughputConvention::Sum => "sum",
            ThroughputConvention::DischargeOnly => "discharge_only",
        }
    }
}

impl std::fmt::Display for ThroughputConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Energy moved by one full cycle at the given DOD under a convention, kWh.
pub fn cycle_throughput_kwh(dod_percent: f64, e_bess_kwh: f64, conv: ThroughputConvention) -> f64 {
    let one_way = e_bess_kwh * dod_percent / 100.0;
    match conv {
        ThroughputConvention::Sum => 2.0 * one_way,
        ThroughputConvention::DischargeOnly => one_way,
    }
}

/// One entry of the DOD-to-fade lookup table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DodEntry {
    pub dod_percent: f64,
    pub fade_ah_per_cycle: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Interpolation {
    #[default]
    LinearClamped,
}

/// Calibrated DOD model: physical fade per cycle as a function of DOD.
///
/// The table stores fade in Ah, not currency, so it stays comparable with
/// the benchmark; costs are derived through [`EconParams::value_per_ah`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DodCostTable {
    entries: Vec<DodEntry>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl DodCostTable {
    pub fn new(entries: Vec<DodEntry>) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        for e in &entries {
            if !(e.dod_percent > 0.0 && e.dod_percent <= 100.0) {
                return Err(ModelError::InvalidTable(format!(
                    "entry DOD {}% out of (0, 100]",
                    e.dod_percent
                )));
            }
            if !(e.fade_ah_per_cycle >= 0.0 && e.fade_ah_per_cycle.is_finite()) {
                return Err(ModelError::InvalidTable(
                    "fade must be finite and >= 0".to_string(),
                ));
            }
        }
        for pair in entries.windows(2) {
            if pair[1].dod_percent <= pair[0].dod_percent {
                return Err(ModelError::InvalidTable(
                    "DOD values must be strictly increasing".to_string(),
                ));
            }
        }
        Ok(Self {
            entries,
            interpolation: Interpolation::LinearClamped,
        })
    }

    pub fn entries(&self) -> &[DodEntry] {
        &self.entries
    }

    /// Fade per cycle at the given DOD: exact entry if present, linear
    /// interpolation between bracketing entries, clamped to the end values
    /// outside the table's range.
    pub fn lookup(&self, dod_percent: f64) -> Result<f64, ModelError> {
        if self.entries.is_empty() {
            return Err(ModelError::EmptyTable);
        }
        if !(dod_percent > 0.0 && dod_percent <= 100.0) {
            return Err(ModelError::DodOutOfRange(dod_percent));
        }
        let first = self.entries.first().unwrap();
        let last = self.entries.last().unwrap();
        if dod_percent <= first.dod_percent {
            return Ok(first.fade_ah_per_cycle);
        }
        if dod_percent >= last.dod_percent {
            return Ok(last.fade_ah_per_cycle);
        }
        let hi = self
            .entries
            .partition_point(|e| e.dod_percent <= dod_percent);
        let a = self.entries[hi - 1];
        let b = self.entries[hi];
        if a.dod_percent == dod_percent {
            return Ok(a.fade_ah_per_cycle);
        }
        let frac = (dod_percent - a.dod_percent) / (b.dod_percent - a.dod_percent);
        Ok(a.fade_ah_per_cycle + frac * (b.fade_ah_per_cycle - a.fade_ah_per_cycle))
    }
}

/// Calibrate the DOD table: one entry per group, fade = mean of all deltas
/// pooled across that group's series.
pub fn calibrate_dod_table(
    groups: &[(f64, Vec<&DegradationSeries>)],
) -> Result<DodCostTable, ModelError> {
    let mut entries = Vec::with_capacity(groups.len());
    for (dod, series) in groups {
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in series {
            for d in &s.deltas {
                sum += d.fade_ah;
                count += 1;
            }
        }
        if count == 0 {
            return Err(ModelError::EmptyGroup { dod_percent: *dod });
        }
        entries.push(DodEntry {
            dod_percent: *dod,
            fade_ah_per_cycle: sum / count as f64,
        });
    }
    entries.sort_by(|a, b| a.dod_percent.total_cmp(&b.dod_percent));
    DodCostTable::new(entries)
}

/// DOD-model degradation cost of a set of extracted cycles:
/// `sum over cycles of lookup(dod) * count * value_per_ah`.
///
/// Counts of 0.5 price half cycles.
pub fn dod_cost(
    table: &DodCostTable,
    cycles: &[(f64, f64)],
    econ: &EconParams,
) -> Result<f64, ModelError> {
    econ.validate()?;
    let value = econ.value_per_ah();
    let mut total = 0.0;
    for &(dod, count) in cycles {
        total += table.lookup(dod)? * count * value;
    }
    Ok(total)
}

/// Identity of one comparison scenario. `None` fields were not grouped on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioKey {
    pub chemistry: Option<Chemistry>,
    pub ambient_temp_c: Option<f64>,
    pub charge_rate_c: Option<f64>,
    pub discharge_rate_c: Option<f64>,
    pub dod_percent: Option<f64>,
}

impl ScenarioKey {
    /// Key carrying every field of the test's metadata.
    pub fn from_meta(meta: &AgingTestMeta) -> Self {
        Self {
            chemistry: Some(meta.chemistry),
            ambient_temp_c: Some(meta.ambient_temp_c),
            charge_rate_c: Some(meta.charge_rate_c),
            discharge_rate_c: Some(meta.discharge_rate_c),
            dod_percent: Some(meta.dod_percent()),
        }
    }

    /// Check one series against every populated key field.
    pub fn matches(&self, meta: &AgingTestMeta) -> Result<(), ModelError> {
        let mismatch = |field: &'static str| {
            Err(ModelError::ScenarioMismatch {
                test_id: meta.test_id.clone(),
                field,
            })
        };
        if let Some(c) = self.chemistry {
            if c != meta.chemistry {
                return mismatch("chemistry");
            }
        }
        if let Some(t) = self.ambient_temp_c {
            if t != meta.ambient_temp_c {
                return mismatch("ambient_temp_c");
            }
        }
        if let Some(r) = self.charge_rate_c {
            if r != meta.charge_rate_c {
                return mismatch("charge_rate_c");
            }
        }
        if let Some(r) = self.discharge_rate_c {
            if r != meta.discharge_rate_c {
                return mismatch("discharge_rate_c");
            }
        }
        if let Some(d) = self.dod_percent {
            if d != meta.dod_percent() {
                return mismatch("dod_percent");
            }
        }
        Ok(())
    }

    /// Short human-readable label, e.g. `LFP 25C 0.5C/1C DOD100`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(c) = self.chemistry {
            parts.push(c.to_string());
        }
        if let Some(t) = self.ambient_temp_c {
            parts.push(format!("{t}C"));
        }
        match (self.charge_rate_c, self.discharge_rate_c) {
            (Some(c), Some(d)) => parts.push(format!("{c}C/{d}C")),
            (Some(c), None) => parts.push(format!("chg {c}C")),
            (None, Some(d)) => parts.push(format!("dis {d}C")),
            (None, None) => {}
        }
        if let Some(d) = self.dod_percent {
            parts.push(format!("DOD{d}"));
        }
        if parts.is_empty() {
            "all".to_string()
        } else {
            parts.join(" ")
        }
    }
}

fn cmp_opt_f64(a: &Option<f64>, b: &Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(y),
    }
}

impl Eq for ScenarioKey {}

impl PartialOrd for ScenarioKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScenarioKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.chemistry
            .cmp(&other.chemistry)
            .then_with(|| cmp_opt_f64(&self.ambient_temp_c, &other.ambient_temp_c))
            .then_with(|| cmp_opt_f64(&self.charge_rate_c, &other.charge_rate_c))
            .then_with(|| cmp_opt_f64(&self.discharge_rate_c, &other.discharge_rate_c))
            .then_with(|| cmp_opt_f64(&self.dod_percent, &other.dod_percent))
    }
}

/// Measured degradation under one scenario: the yardstick the heuristic
/// models are compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkModel {
    pub key: ScenarioKey,
    /// Mean of all retained deltas pooled across replicates.
    pub mean_fade_ah_per_cycle: f64,
    /// Per-index mean over the replicates possessing that index.
    pub per_cycle_curve: Vec<(u32, f64)>,
    pub n_replicates: usize,
}

/// Pool every replicate's deltas under one scenario into a benchmark.
///
/// The pooled mean weights replicates by how many cycles they survived,
/// which is what a per-cycle average of the raw data does.
pub fn benchmark_fade(
    key: &ScenarioKey,
    series: &[&DegradationSeries],
) -> Result<BenchmarkModel, ModelError> {
    if series.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    for s in series {
        key.matches(&s.meta)?;
    }

    let mut sum = 0.0;
    let mut count = 0usize;
    let mut by_index: std::collections::BTreeMap<u32, (f64, usize)> =
        std::collections::BTreeMap::new();
    for s in series {
        for d in &s.deltas {
            sum += d.fade_ah;
            count += 1;
            let slot = by_index.entry(d.cycle_index).or_insert((0.0, 0));
            slot.0 += d.fade_ah;
            slot.1 += 1;
        }
    }
    if count == 0 {
        return Err(ModelError::EmptyInput);
    }

    Ok(BenchmarkModel {
        key: key.clone(),
        mean_fade_ah_per_cycle: sum / count as f64,
        per_cycle_curve: by_index
            .into_iter()
            .map(|(idx, (s, n))| (idx, s / n as f64))
            .collect(),
        n_replicates: series.len(),
    })
}

/// A single cycle to be priced as fade: its depth and the energy it moved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleDescriptor {
    pub dod_percent: f64,
    pub throughput_kwh: f64,
}

/// Which calibrated model to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum FadeModel<'a> {
    Linear {
        params: &'a LinearParams,
        econ: &'a EconParams,
    },
    DodTable(&'a DodCostTable),
}

/// Predicted fade for one cycle, in Ah, under either model.
///
/// The linear model's currency prediction is converted back to Ah through
/// the value of one Ah of fade; the DOD model reads its table directly.
pub fn model_fade_per_cycle(model: &FadeModel, cycle: &CycleDescriptor) -> Result<f64, ModelError> {
    match model {
        FadeModel::Linear { params, econ } => {
            econ.validate()?;
            let cost = params.c_bd * cycle.throughput_kwh;
            Ok(cost / econ.value_per_ah())
        }
        FadeModel::DodTable(table) => table.lookup(cycle.dod_percent),
    }
}
