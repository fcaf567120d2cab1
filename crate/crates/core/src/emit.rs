//! CSV emission with a stable column order per artifact type.
//!
//! Headers are always present, real numbers carry 9 significant digits,
//! and identical inputs produce byte-identical output. Column orders are
//! documented in the README alongside each file type.

use crate::cycles::ExtractedCycles;
use crate::ingest::{CapacitySeries, ColumnMap};
use crate::preprocess::{CleanCapacitySeries, DegradationSeries, RemovedCycle};
use crate::report::{CensusRow, RatioRow, ScenarioReport};

/// Format with 9 significant digits, fixed notation where it fits and
/// scientific otherwise, trailing zeros trimmed (the classic `%.9g`).
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp_str) = sci.split_once('e').expect("exponent in {:.8e} output");
    let exp: i32 = exp_str.parse().expect("numeric exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn write_rows(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("flush in-memory CSV")).expect("CSV is UTF-8")
}

/// Series payload, re-emitted under the given column map so that parsing it
/// back with the same map reproduces the series.
pub fn emit_series_csv(series: &CapacitySeries, map: &ColumnMap) -> String {
    let mut header = vec![map.cycle_index.clone(), map.discharge_capacity.clone()];
    let extras: Vec<&String> = series.extra.keys().collect();
    for logical in &extras {
        header.push(
            map.extra
                .get(logical.as_str())
                .cloned()
                .unwrap_or_else(|| (*logical).clone()),
        );
    }
    let mut rows = vec![header];
    for (i, p) in series.points.iter().enumerate() {
        let mut row = vec![p.cycle_index.to_string(), fmt_f64(p.capacity_ah)];
        for logical in &extras {
            row.push(fmt_f64(series.extra[logical.as_str()][i]));
        }
        rows.push(row);
    }
    write_rows(rows)
}

/// Cleaned series: `cycle_index,discharge_capacity_ah`.
pub fn emit_clean_series_csv(series: &CleanCapacitySeries) -> String {
    let mut rows = vec![vec![
        "cycle_index".to_string(),
        "discharge_capacity_ah".to_string(),
    ]];
    for p in &series.points {
        rows.push(vec![p.cycle_index.to_string(), fmt_f64(p.capacity_ah)]);
    }
    write_rows(rows)
}

/// Removal ledger: `cycle_index,reason`, sorted by cycle index.
pub fn emit_removed_csv(removed: &[RemovedCycle]) -> String {
    let mut sorted = removed.to_vec();
    sorted.sort_by_key(|r| r.cycle_index);
    let mut rows = vec![vec!["cycle_index".to_string(), "reason".to_string()]];
    for r in sorted {
        rows.push(vec![r.cycle_index.to_string(), r.reason.to_string()]);
    }
    write_rows(rows)
}

/// Per-cycle deltas: `cycle_index,fade_ah`.
pub fn emit_deltas_csv(series: &DegradationSeries) -> String {
    let mut rows = vec![vec!["cycle_index".to_string(), "fade_ah".to_string()]];
    for d in &series.deltas {
        rows.push(vec![d.cycle_index.to_string(), fmt_f64(d.fade_ah)]);
    }
    write_rows(rows)
}

/// Extracted cycles: `dod_percent,count`.
pub fn emit_cycles_csv(cycles: &ExtractedCycles) -> String {
    let mut rows = vec![vec!["dod_percent".to_string(), "count".to_string()]];
    for c in &cycles.cycles {
        rows.push(vec![fmt_f64(c.dod_percent), fmt_f64(c.count)]);
    }
    write_rows(rows)
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub const SCENARIOS_CSV_HEADER: [&str; 22] = [
    "chemistry",
    "ambient_temp_c",
    "charge_rate_c",
    "discharge_rate_c",
    "dod_percent",
    "n_tests",
    "benchmark_fade_ah_per_cycle",
    "linear_fade_ah_per_cycle",
    "dod_fade_ah_per_cycle",
    "benchmark_cost_per_cycle",
    "linear_cost_per_cycle",
    "dod_cost_per_cycle",
    "linear_abs_err_ah",
    "linear_rel_err",
    "linear_rel_err_defined",
    "dod_abs_err_ah",
    "dod_rel_err",
    "dod_rel_err_defined",
    "throughput_convention",
    "calibration_source",
    "idle_eps",
    "spike_params",
];

/// Scenario comparison table, one row per scenario.
pub fn emit_scenarios_csv(reports: &[ScenarioReport]) -> String {
    let mut rows = vec![SCENARIOS_CSV_HEADER.iter().map(|s| s.to_string()).collect()];
    for r in reports {
        let rel = |m: &crate::report::ModelComparison| match m.rel_err {
            Some(v) => (fmt_f64(v), "true".to_string()),
            None => (String::new(), "false".to_string()),
        };
        let (lin_rel, lin_def) = rel(&r.linear);
        let (dod_rel, dod_def) = rel(&r.dod);
        rows.push(vec![
            r.key.chemistry.map(|c| c.to_string()).unwrap_or_default(),
            opt_f64(r.key.ambient_temp_c),
            opt_f64(r.key.charge_rate_c),
            opt_f64(r.key.discharge_rate_c),
            opt_f64(r.key.dod_percent),
            r.n_tests.to_string(),
            fmt_f64(r.benchmark_fade_ah_per_cycle),
            fmt_f64(r.linear.fade_ah_per_cycle),
            fmt_f64(r.dod.fade_ah_per_cycle),
            fmt_f64(r.benchmark_cost_per_cycle),
            fmt_f64(r.linear.cost_per_cycle),
            fmt_f64(r.dod.cost_per_cycle),
            fmt_f64(r.linear.abs_err_ah),
            lin_rel,
            lin_def,
            fmt_f64(r.dod.abs_err_ah),
            dod_rel,
            dod_def,
            r.echo.throughput_convention.to_string(),
            r.echo.calibration_source.clone(),
            r.echo.idle_eps_spec.clone(),
            format!(
                "window={} k={} eol={}",
                r.echo.spike_window,
                fmt_f64(r.echo.spike_k),
                fmt_f64(r.echo.eol_fraction)
            ),
        ]);
    }
    write_rows(rows)
}

/// Temperature ratio table: `ambient_temp_c,benchmark_fade_ah_per_cycle,ratio_vs_coldest`.
pub fn emit_ratios_csv(rows_in: &[RatioRow]) -> String {
    let mut rows = vec![vec![
        "ambient_temp_c".to_string(),
        "benchmark_fade_ah_per_cycle".to_string(),
        "ratio_vs_coldest".to_string(),
    ]];
    for r in rows_in {
        rows.push(vec![
            fmt_f64(r.ambient_temp_c),
            fmt_f64(r.benchmark_fade_ah_per_cycle),
            fmt_f64(r.ratio_vs_coldest),
        ]);
    }
    write_rows(rows)
}

/// Census table: `chemistry,discharge_rate_c,n_tests`.
pub fn emit_census_csv(rows_in: &[CensusRow]) -> String {
    let mut rows = vec![vec![
        "chemistry".to_string(),
        "discharge_rate_c".to_string(),
        "n_tests".to_string(),
    ]];
    for r in rows_in {
        rows.push(vec![
            r.chemistry.to_string(),
            fmt_f64(r.discharge_rate_c),
            r.count.to_string(),
        ]);
    }
    write_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_cycle_csv;
    use crate::meta::{AgingTestMeta, Chemistry, SocWindow};
    use std::collections::BTreeMap;

    #[test]
    fn fmt_nine_significant_digits() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(1.99), "1.99");
        assert_eq!(fmt_f64(25.0), "25");
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(-0.01), "-0.01");
        assert_eq!(fmt_f64(0.001234567891), "0.00123456789");
        assert_eq!(fmt_f64(123456789.4), "123456789");
        assert_eq!(fmt_f64(1234567894.0), "1.23456789e9");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_f64(0.0000123456789), "1.23456789e-5");
        assert_eq!(fmt_f64(2.0e-4), "0.0002");
    }

    #[test]
    fn series_round_trips_through_emit_and_parse() {
        let meta = AgingTestMeta {
            test_id: "t".into(),
            lab: "SNL".into(),
            form_factor: "18650".into(),
            chemistry: Chemistry::Lfp,
            ambient_temp_c: 25.0,
            soc_window: SocWindow::new(0.0, 100.0),
            charge_rate_c: 0.5,
            discharge_rate_c: 1.0,
            nominal_capacity_ah: 2.0,
            replicate_tag: String::new(),
        };
        let series = CapacitySeries {
            meta: meta.clone(),
            points: vec![
                crate::ingest::CyclePoint {
                    cycle_index: 1,
                    capacity_ah: 2.0,
                },
                crate::ingest::CyclePoint {
                    cycle_index: 2,
                    capacity_ah: 1.99,
                },
                crate::ingest::CyclePoint {
                    cycle_index: 3,
                    capacity_ah: 1.985,
                },
            ],
            extra: BTreeMap::new(),
        };
        let map = ColumnMap::default();
        let text = emit_series_csv(&series, &map);
        let parsed = parse_cycle_csv(text.as_bytes(), &map, meta).unwrap();
        assert_eq!(parsed, series);
    }

    #[test]
    fn empty_census_is_header_only() {
        let text = emit_census_csv(&[]);
        assert_eq!(text, "chemistry,discharge_rate_c,n_tests\n");
    }

    #[test]
    fn removed_ledger_sorted_by_index() {
        use crate::preprocess::{RemovalReason, RemovedCycle};
        let text = emit_removed_csv(&[
            RemovedCycle {
                cycle_index: 9,
                reason: RemovalReason::RptSpike,
            },
            RemovedCycle {
                cycle_index: 3,
                reason: RemovalReason::Idle,
            },
        ]);
        assert_eq!(text, "cycle_index,reason\n3,IDLE\n9,RPT_SPIKE\n");
    }

    #[test]
    fn quoted_fields_survive_csv_quoting() {
        // The default capacity column name contains a space and parentheses
        // but no comma; a map with a comma must be quoted properly.
        let meta = AgingTestMeta {
            test_id: "t".into(),
            lab: "SNL".into(),
            form_factor: "18650".into(),
            chemistry: Chemistry::Lfp,
            ambient_temp_c: 25.0,
            soc_window: SocWindow::new(0.0, 100.0),
            charge_rate_c: 0.5,
            discharge_rate_c: 1.0,
            nominal_capacity_ah: 2.0,
            replicate_tag: String::new(),
        };
        let series = CapacitySeries {
            meta: meta.clone(),
            points: vec![crate::ingest::CyclePoint {
                cycle_index: 1,
                capacity_ah: 2.0,
            }],
            extra: BTreeMap::new(),
        };
        let map = ColumnMap {
            cycle_index: "cycle, index".into(),
            discharge_capacity: "cap".into(),
            extra: BTreeMap::new(),
        };
        let text = emit_series_csv(&series, &map);
        assert!(text.starts_with("\"cycle, index\",cap\n"));
        let parsed = parse_cycle_csv(text.as_bytes(), &map, meta).unwrap();
        assert_eq!(parsed.points, series.points);
    }
}
