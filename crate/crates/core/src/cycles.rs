//! SOC trajectories from power schedules, and rainflow cycle extraction.
//!
//! The DOD model prices cycles, so arbitrary dispatch must first be turned
//! into cycles. Power integrates to an SOC trajectory; rainflow counting
//! over its turning points decomposes the trajectory into full cycles
//! (matched inner ranges, four-point rule) and half cycles (the residual).
//! The rule variant is fixed so results are reproducible bit for bit.

use thiserror::Error;

use crate::models::{EconParams, Schedule};

#[derive(Debug, Error)]
pub enum CycleError {
    #[error("SOC leaves [0, 1] at step {step}: {soc}")]
    SocOutOfBounds { step: usize, soc: f64 },
    #[error("degenerate SOC profile: fewer than 2 samples")]
    DegenerateProfile,
    #[error("invalid SOC integration input: {0}")]
    InvalidInput(String),
}

/// SOC at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocSample {
    pub t_h: f64,
    pub soc: f64,
}

/// SOC trajectory; one sample per schedule step boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SocProfile {
    pub samples: Vec<SocSample>,
}

impl SocProfile {
    pub fn socs(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.soc)
    }
}

/// Extracted cycles: one entry per full (1.0) or half (0.5) cycle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleCount {
    pub dod_percent: f64,
    pub count: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractedCycles {
    pub cycles: Vec<CycleCount>,
}

impl ExtractedCycles {
    /// As `(dod_percent, count)` pairs for pricing.
    pub fn as_price_input(&self) -> Vec<(f64, f64)> {
        self.cycles
            .iter()
            .map(|c| (c.dod_percent, c.count))
            .collect()
    }
}

/// Tolerance for SOC leaving [0, 1]; anything inside is clamped, anything
/// beyond is an error naming the first violating step.
pub const SOC_BOUNDS_TOLERANCE: f64 = 1e-9;

/// Split a round-trip efficiency symmetrically into charge and discharge
/// legs.
pub fn split_round_trip_efficiency(round_trip: f64) -> (f64, f64) {
    let leg = round_trip.sqrt();
    (leg, leg)
}

/// Integrate a power schedule into an SOC trajectory:
/// `soc_{t+1} = soc_t + (p_charge * eta_c - p_discharge / eta_d) * duration / E`.
pub fn soc_from_power(
    schedule: &Schedule,
    econ: &EconParams,
    soc0: f64,
    eta_charge: f64,
    eta_discharge: f64,
) -> Result<SocProfile, CycleError> {
    econ.validate()
        .map_err(|e| CycleError::InvalidInput(e.to_string()))?;
    schedule
        .validate()
        .map_err(|e| CycleError::InvalidInput(e.to_string()))?;
    if !(0.0..=1.0).contains(&soc0) {
        return Err(CycleError::InvalidInput(format!(
            "initial SOC {soc0} outside [0, 1]"
        )));
    }
    for (name, eta) in [("eta_charge", eta_charge), ("eta_discharge", eta_discharge)] {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(CycleError::InvalidInput(format!(
                "{name} must be in (0, 1], got {eta}"
            )));
        }
    }

    let t0 = schedule.steps.first().map(|s| s.t_h).unwrap_or(0.0);
    let mut samples = Vec::with_capacity(schedule.steps.len() + 1);
    samples.push(SocSample { t_h: t0, soc: soc0 });
    let mut soc = soc0;
    for (i, step) in schedule.steps.iter().enumerate() {
        let net_kw = step.p_charge_kw * eta_charge - step.p_discharge_kw / eta_discharge;
        soc += net_kw * step.duration_h / econ.e_bess_kwh;
        if !(-SOC_BOUNDS_TOLERANCE..=1.0 + SOC_BOUNDS_TOLERANCE).contains(&soc) {
            return Err(CycleError::SocOutOfBounds { step: i, soc });
        }
        soc = soc.clamp(0.0, 1.0);
        samples.push(SocSample {
            t_h: step.t_h + step.duration_h,
            soc,
        });
    }
    Ok(SocProfile { samples })
}

/// Rainflow-count an SOC profile into full and half cycles.
///
/// Turning points are extracted first (plateaus collapse to their earliest
/// sample). The four-point rule walks the sequence: whenever the inner range
/// of the last four points is no larger than both flanking ranges, that
/// inner pair is one full cycle and its two points drop out. Whatever
/// remains pairs off as half cycles.
pub fn extract_cycles(profile: &SocProfile) -> Result<ExtractedCycles, CycleError> {
    if profile.samples.len() < 2 {
        return Err(CycleError::DegenerateProfile);
    }
    let socs: Vec<f64> = profile.socs().collect();
    let tp = turning_points(&socs);
    Ok(rainflow(&tp))
}

/// Reduce a sample sequence to its turning points: endpoints plus every
/// local extremum. Equal consecutive samples keep the earliest one.
pub fn turning_points(values: &[f64]) -> Vec<f64> {
    let mut collapsed: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        if collapsed.last() != Some(&v) {
            collapsed.push(v);
        }
    }
    if collapsed.len() <= 2 {
        return collapsed;
    }
    let mut tp = Vec::with_capacity(collapsed.len());
    tp.push(collapsed[0]);
    for w in collapsed.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        if (b > a) != (c > b) {
            tp.push(b);
        }
    }
    tp.push(*collapsed.last().unwrap());
    tp
}

fn rainflow(turning: &[f64]) -> ExtractedCycles {
    let mut cycles = Vec::new();
    let mut buf: Vec<f64> = Vec::with_capacity(turning.len());
    for &p in turning {
        buf.push(p);
        while buf.len() >= 4 {
            let n = buf.len();
            let (a, b, c, d) = (buf[n - 4], buf[n - 3], buf[n - 2], buf[n - 1]);
            let r1 = (a - b).abs();
            let r2 = (b - c).abs();
            let r3 = (c - d).abs();
            if r2 <= r1 && r2 <= r3 {
                cycles.push(CycleCount {
                    dod_percent: r2 * 100.0,
                    count: 1.0,
                });
                buf.remove(n - 2);
                buf.remove(n - 3);
            } else {
                break;
            }
        }
    }
    // Residual: consecutive pairs count as half cycles.
    for w in buf.windows(2) {
        let range = (w[0] - w[1]).abs();
        if range > 0.0 {
            cycles.push(CycleCount {
                dod_percent: range * 100.0,
                count: 0.5,
            });
        }
    }
    ExtractedCycles { cycles }
}
