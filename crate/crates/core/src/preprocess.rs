//! Cleaning of raw capacity series before model calibration.
//!
//! Three phenomena need handling before per-cycle fade is meaningful:
//! idle cycles (capacity drops to ~0 while the cell rests), reference
//! performance test cycles (a low-rate cycle shows up as a one-cycle
//! capacity spike), and the tail past end of life. Removals are recorded
//! in a ledger so retained + removed always partitions the input; nothing
//! is dropped silently. Deltas are never clamped: negative per-cycle fade
//! is real measurement scatter and must be averaged through.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CapacitySeries, CyclePoint};
use crate::meta::AgingTestMeta;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("series too short: {len} cycles, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("empty series")]
    EmptySeries,
    #[error("invalid cleaning parameters: {0}")]
    InvalidParams(String),
}

/// Why a cycle was removed during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemovalReason {
    /// Capacity below the idle threshold (cell resting, not cycling).
    Idle,
    /// Upward outlier from a low-rate reference performance test cycle.
    RptSpike,
    /// Past the end-of-life truncation point.
    PostEol,
}

impl RemovalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalReason::Idle => "IDLE",
            RemovalReason::RptSpike => "RPT_SPIKE",
            RemovalReason::PostEol => "POST_EOL",
        }
    }
}

impl std::fmt::Display for RemovalReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ledger entry for one removed cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedCycle {
    pub cycle_index: u32,
    pub reason: RemovalReason,
}

/// Capacity series after cleaning, with the removal ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanCapacitySeries {
    pub meta: AgingTestMeta,
    /// Retained cycles, sorted by cycle index.
    pub points: Vec<CyclePoint>,
    /// Removed cycles; retained + removed partition the ingested index set.
    pub removed: Vec<RemovedCycle>,
}

impl CleanCapacitySeries {
    pub fn capacities(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.capacity_ah)
    }

    /// Ledger sorted by cycle index, for audit export.
    pub fn removed_sorted(&self) -> Vec<RemovedCycle> {
        let mut v = self.removed.clone();
        v.sort_by_key(|r| r.cycle_index);
        v
    }
}

/// One per-cycle capacity delta; negative values are preserved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    /// Index of the earlier of the two cycles the delta spans.
    pub cycle_index: u32,
    pub fade_ah: f64,
}

/// Per-cycle capacity fade of one test: `capacity[i] - capacity[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSeries {
    pub meta: AgingTestMeta,
    pub deltas: Vec<DeltaPoint>,
}

impl DegradationSeries {
    pub fn fades(&self) -> impl Iterator<Item = f64> + '_ {
        self.deltas.iter().map(|d| d.fade_ah)
    }
}

/// Thresholds for the cleaning stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanParams {
    /// Cycles below this capacity are idle. Default 5% of nominal.
    pub idle_eps_ah: f64,
    /// Rolling window for spike detection; odd, at least 3.
    pub spike_window: usize,
    /// Spike threshold in rolling-MAD units.
    pub spike_k: f64,
    /// End of life as a fraction of initial retained capacity.
    pub eol_fraction: f64,
}

pub const DEFAULT_IDLE_EPS_NOMINAL_FRACTION: f64 = 0.05;
pub const DEFAULT_SPIKE_WINDOW: usize = 11;
pub const DEFAULT_SPIKE_K: f64 = 4.0;
pub const DEFAULT_EOL_FRACTION: f64 = 0.8;

impl CleanParams {
    /// Default parameters for a cell of the given nominal capacity.
    pub fn for_nominal(nominal_capacity_ah: f64) -> Self {
        Self {
            idle_eps_ah: DEFAULT_IDLE_EPS_NOMINAL_FRACTION * nominal_capacity_ah,
            spike_window: DEFAULT_SPIKE_WINDOW,
            spike_k: DEFAULT_SPIKE_K,
            eol_fraction: DEFAULT_EOL_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.idle_eps_ah >= 0.0 && self.idle_eps_ah.is_finite()) {
            return Err(PreprocessError::InvalidParams(
                "idle_eps_ah must be finite and >= 0".into(),
            ));
        }
        if self.spike_window < 3 || self.spike_window.is_multiple_of(2) {
            return Err(PreprocessError::InvalidParams(
                "spike_window must be an odd integer >= 3".into(),
            ));
        }
        if !(self.spike_k > 0.0 && self.spike_k.is_finite()) {
            return Err(PreprocessError::InvalidParams("spike_k must be > 0".into()));
        }
        if !(self.eol_fraction > 0.0 && self.eol_fraction <= 1.0) {
            return Err(PreprocessError::InvalidParams(
                "eol_fraction must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Remove idle cycles (capacity below the idle threshold).
pub fn drop_idle_cycles(
    series: &CapacitySeries,
    params: &CleanParams,
) -> Result<CleanCapacitySeries, PreprocessError> {
    params.validate()?;
    let mut points = Vec::with_capacity(series.points.len());
    let mut removed = Vec::new();
    for p in &series.points {
        if p.capacity_ah < params.idle_eps_ah {
            removed.push(RemovedCycle {
                cycle_index: p.cycle_index,
                reason: RemovalReason::Idle,
            });
        } else {
            points.push(*p);
        }
    }
    Ok(CleanCapacitySeries {
        meta: series.meta.clone(),
        points,
        removed,
    })
}

/// Flag and remove upward capacity spikes left by reference performance tests.
///
/// Cycle `i` is a spike iff `capacity[i] - rolling_median(i) > spike_k *
/// rolling_MAD(i)`, with the window centered at `i` and clipped at the series
/// boundaries. Detection is one pass over the input; removed cycles do not
/// trigger re-evaluation. The test is one-sided: RPT cycles only ever raise
/// apparent capacity. An empty series passes through untouched; a nonempty
/// series shorter than the window is an error.
pub fn flag_rpt_spikes(
    series: CleanCapacitySeries,
    params: &CleanParams,
) -> Result<CleanCapacitySeries, PreprocessError> {
    params.validate()?;
    let n = series.points.len();
    if n == 0 {
        // Nothing to evaluate; the emptiness is reported downstream.
        return Ok(series);
    }
    if n < params.spike_window {
        return Err(PreprocessError::SeriesTooShort {
            len: n,
            needed: params.spike_window,
        });
    }

    let caps: Vec<f64> = series.points.iter().map(|p| p.capacity_ah).collect();
    let half = (params.spike_window - 1) / 2;

    let mut points = Vec::with_capacity(n);
    let mut removed = series.removed;
    let mut window = Vec::with_capacity(params.spike_window);
    for (i, p) in series.points.iter().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        window.clear();
        window.extend_from_slice(&caps[lo..=hi]);
        let med = median_in_place(&mut window);
        for v in window.iter_mut() {
            *v = (*v - med).abs();
        }
        let mad = median_in_place(&mut window);
        if p.capacity_ah - med > params.spike_k * mad {
            removed.push(RemovedCycle {
                cycle_index: p.cycle_index,
                reason: RemovalReason::RptSpike,
            });
        } else {
            points.push(*p);
        }
    }

    Ok(CleanCapacitySeries {
        meta: series.meta,
        points,
        removed,
    })
}

/// Truncate at end of life: keep the prefix up to and including the first
/// cycle whose capacity falls below `eol_fraction` of the first retained
/// capacity. The dropped tail goes into the ledger.
pub fn truncate_at_eol(
    series: CleanCapacitySeries,
    params: &CleanParams,
) -> Result<CleanCapacitySeries, PreprocessError> {
    params.validate()?;
    let first = series
        .points
        .first()
        .ok_or(PreprocessError::EmptySeries)?
        .capacity_ah;
    let threshold = params.eol_fraction * first;

    let cut = series
        .points
        .iter()
        .position(|p| p.capacity_ah < threshold)
        .map(|i| i + 1) // inclusive of the first sub-threshold cycle
        .unwrap_or(series.points.len());

    let mut points = series.points;
    let mut removed = series.removed;
    for p in points.drain(cut..) {
        removed.push(RemovedCycle {
            cycle_index: p.cycle_index,
            reason: RemovalReason::PostEol,
        });
    }
    Ok(CleanCapacitySeries {
        meta: series.meta,
        points,
        removed,
    })
}

/// Per-cycle fade: `delta_i = capacity_i - capacity_{i+1}`, indexed by the
/// earlier cycle. Negative deltas are preserved.
pub fn compute_deltas(series: &CleanCapacitySeries) -> Result<DegradationSeries, PreprocessError> {
    if series.points.len() < 2 {
        return Err(PreprocessError::SeriesTooShort {
            len: series.points.len(),
            needed: 2,
        });
    }
    let deltas = series
        .points
        .windows(2)
        .map(|w| DeltaPoint {
            cycle_index: w[0].cycle_index,
            fade_ah: w[0].capacity_ah - w[1].capacity_ah,
        })
        .collect();
    Ok(DegradationSeries {
        meta: series.meta.clone(),
        deltas,
    })
}

/// Full cleaning pipeline: idle removal, spike removal, EOL truncation,
/// then per-cycle deltas. The final ledger is sorted by cycle index.
pub fn clean_series(
    series: &CapacitySeries,
    params: &CleanParams,
) -> Result<(CleanCapacitySeries, DegradationSeries), PreprocessError> {
    let stage = drop_idle_cycles(series, params)?;
    let stage = flag_rpt_spikes(stage, params)?;
    let mut clean = truncate_at_eol(stage, params)?;
    clean.removed.sort_by_key(|r| r.cycle_index);
    let deltas = compute_deltas(&clean)?;
    Ok((clean, deltas))
}

/// Median by sorting the scratch buffer; even lengths average the middle two.
fn median_in_place(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n.is_multiple_of(2) {
        (values[n / 2 - 1] + values[n / 2]) * 0.5
    } else {
        values[n / 2]
    }
}
