//! Cycle-summary CSV ingestion and manifest-driven dataset loading.
//!
//! Input files are header-bearing RFC-4180 CSVs, one row per cycle. Column
//! names default to Battery Archive cycle-data exports and are overridable
//! per manifest or per test. Metadata resolution order: per-test manifest
//! overrides win over the name grammar, which wins over manifest-wide
//! defaults; anything still missing is an error.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meta::{parse_test_name, AgingTestMeta, Chemistry, SocWindow};
use crate::models::{Schedule, ScheduleStep};

/// Default cycle-index column in Battery Archive cycle-data exports.
pub const DEFAULT_CYCLE_INDEX_COL: &str = "Cycle_Index";
/// Default discharge-capacity column in Battery Archive cycle-data exports.
pub const DEFAULT_DISCHARGE_CAPACITY_COL: &str = "Discharge_Capacity (Ah)";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column '{column}' in CSV header")]
    MissingColumn { column: String },
    #[error("malformed value '{value}' in column '{column}' at row {row}")]
    MalformedRow {
        row: usize,
        column: String,
        value: String,
    },
    #[error("duplicate cycle index {index}")]
    DuplicateCycleIndex { index: u32 },
    #[error("test name '{name}' does not match the LAB_FORM_CHEM_TEMPC_LO-HI_CHG-DISC grammar")]
    UnrecognizedName { name: String },
    #[error("cannot read '{path}'")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("in '{path}'")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
    #[error("test '{test}': missing metadata field '{field}'")]
    IncompleteMetadata { test: String, field: &'static str },
    #[error("test '{test}': {reason}")]
    InvalidMeta { test: String, reason: String },
    #[error("invalid column map: {0}")]
    InvalidColumnMap(String),
    #[error("manifest '{path}': {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("CSV read error")]
    Csv(#[from] csv::Error),
}

impl IngestError {
    fn in_file(self, path: &Path) -> IngestError {
        IngestError::InFile {
            path: path.to_path_buf(),
            source: Box::new(self),
        }
    }
}

/// Maps logical column roles onto CSV header names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub cycle_index: String,
    pub discharge_capacity: String,
    /// Extra numeric columns carried through ingestion, keyed by logical name.
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            cycle_index: DEFAULT_CYCLE_INDEX_COL.to_string(),
            discharge_capacity: DEFAULT_DISCHARGE_CAPACITY_COL.to_string(),
            extra: BTreeMap::new(),
        }
    }
}

impl ColumnMap {
    pub fn validate(&self) -> Result<(), IngestError> {
        let mut names: Vec<&str> = vec![&self.cycle_index, &self.discharge_capacity];
        names.extend(self.extra.values().map(String::as_str));
        if names.iter().any(|n| n.is_empty()) {
            return Err(IngestError::InvalidColumnMap(
                "column names must be non-empty".to_string(),
            ));
        }
        let unique: BTreeSet<&str> = names.iter().copied().collect();
        if unique.len() != names.len() {
            return Err(IngestError::InvalidColumnMap(
                "column names must be distinct".to_string(),
            ));
        }
        Ok(())
    }
}

/// One cycle's summary measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclePoint {
    pub cycle_index: u32,
    pub capacity_ah: f64,
}

/// Per-cycle discharge capacity of one aging test, as ingested.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySeries {
    pub meta: AgingTestMeta,
    /// Sorted by cycle index, no duplicates.
    pub points: Vec<CyclePoint>,
    /// Extra columns parallel to `points`, keyed by logical name.
    pub extra: BTreeMap<String, Vec<f64>>,
}

impl CapacitySeries {
    pub fn capacities(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.capacity_ah)
    }
}

/// Parse one cycle-summary CSV into a capacity series.
///
/// Rows are read in file order, validated cell by cell, then re-sorted by
/// cycle index. Zero-capacity rows are retained; cleaning is a separate
/// stage. Row numbers in errors are 1-based over data rows.
pub fn parse_cycle_csv<R: Read>(
    source: R,
    map: &ColumnMap,
    meta: AgingTestMeta,
) -> Result<CapacitySeries, IngestError> {
    map.validate()?;

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn {
                column: name.to_string(),
            })
    };
    let idx_col = col(&map.cycle_index)?;
    let cap_col = col(&map.discharge_capacity)?;
    let extra_cols: Vec<(&String, usize)> = map
        .extra
        .iter()
        .map(|(logical, header)| Ok((logical, col(header)?)))
        .collect::<Result<_, IngestError>>()?;

    struct Row {
        cycle_index: u32,
        capacity_ah: f64,
        extra: Vec<f64>,
    }

    let mut rows: Vec<Row> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let cell = |col_idx: usize| record.get(col_idx).unwrap_or("").trim();

        let malformed = |column: &str, value: &str| IngestError::MalformedRow {
            row: row_no,
            column: column.to_string(),
            value: value.to_string(),
        };

        let idx_raw = cell(idx_col);
        let cycle_index =
            parse_cycle_index(idx_raw).ok_or_else(|| malformed(&map.cycle_index, idx_raw))?;

        let cap_raw = cell(cap_col);
        let capacity_ah: f64 = cap_raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| malformed(&map.discharge_capacity, cap_raw))?;

        let mut extra = Vec::with_capacity(extra_cols.len());
        for (_, col_idx) in &extra_cols {
            let raw = cell(*col_idx);
            let v: f64 = raw
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| malformed(&headers[*col_idx], raw))?;
            extra.push(v);
        }
        rows.push(Row {
            cycle_index,
            capacity_ah,
            extra,
        });
    }

    rows.sort_by_key(|r| r.cycle_index);
    for pair in rows.windows(2) {
        if pair[0].cycle_index == pair[1].cycle_index {
            return Err(IngestError::DuplicateCycleIndex {
                index: pair[0].cycle_index,
            });
        }
    }

    let points = rows
        .iter()
        .map(|r| CyclePoint {
            cycle_index: r.cycle_index,
            capacity_ah: r.capacity_ah,
        })
        .collect();
    let mut extra = BTreeMap::new();
    for (k, (logical, _)) in extra_cols.iter().enumerate() {
        extra.insert(
            (*logical).clone(),
            rows.iter().map(|r| r.extra[k]).collect(),
        );
    }

    Ok(CapacitySeries {
        meta,
        points,
        extra,
    })
}

/// Cycle indices are written as integers or integral floats ("12", "12.0").
fn parse_cycle_index(raw: &str) -> Option<u32> {
    if let Ok(v) = raw.parse::<u32>() {
        return Some(v);
    }
    let f: f64 = raw.parse().ok()?;
    if f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f <= u32::MAX as f64 {
        Some(f as u32)
    } else {
        None
    }
}

/// Optional metadata fields, used for manifest overrides and defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaOverrides {
    pub test_id: Option<String>,
    pub lab: Option<String>,
    pub form_factor: Option<String>,
    pub chemistry: Option<Chemistry>,
    pub ambient_temp_c: Option<f64>,
    pub soc_low_pct: Option<f64>,
    pub soc_high_pct: Option<f64>,
    pub charge_rate_c: Option<f64>,
    pub discharge_rate_c: Option<f64>,
    pub nominal_capacity_ah: Option<f64>,
    pub replicate_tag: Option<String>,
}

/// Partial column map as written in manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapSpec {
    pub cycle_index: Option<String>,
    pub discharge_capacity: Option<String>,
    pub extra: Option<BTreeMap<String, String>>,
}

impl ColumnMapSpec {
    fn apply(&self, base: &ColumnMap) -> ColumnMap {
        ColumnMap {
            cycle_index: self
                .cycle_index
                .clone()
                .unwrap_or_else(|| base.cycle_index.clone()),
            discharge_capacity: self
                .discharge_capacity
                .clone()
                .unwrap_or_else(|| base.discharge_capacity.clone()),
            extra: self.extra.clone().unwrap_or_else(|| base.extra.clone()),
        }
    }
}

/// One dataset file plus its overrides.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// CSV path, relative to the manifest file.
    pub path: PathBuf,
    /// Grammar-conforming name to parse instead of the file stem.
    pub name: Option<String>,
    pub meta: Option<MetaOverrides>,
    pub columns: Option<ColumnMapSpec>,
}

/// Dataset manifest: which files to load and how to interpret them.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Manifest-wide column map overrides.
    pub columns: Option<ColumnMapSpec>,
    /// Metadata defaults filling gaps the name grammar leaves open.
    pub defaults: Option<MetaOverrides>,
    #[serde(default)]
    pub tests: Vec<ManifestEntry>,
}

pub fn load_manifest(path: &Path) -> Result<Manifest, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::FileUnreadable {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IngestError::Manifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Load every file listed in the manifest, in manifest order.
///
/// A file either yields a complete series or an error tagged with its path;
/// there are no partial results. Relative paths resolve against `root`.
pub fn load_dataset(root: &Path, manifest: &Manifest) -> Result<Vec<CapacitySeries>, IngestError> {
    let base_map = match &manifest.columns {
        Some(spec) => spec.apply(&ColumnMap::default()),
        None => ColumnMap::default(),
    };

    let mut out = Vec::with_capacity(manifest.tests.len());
    for entry in &manifest.tests {
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            root.join(&entry.path)
        };
        let map = match &entry.columns {
            Some(spec) => spec.apply(&base_map),
            None => base_map.clone(),
        };
        let meta = resolve_meta(entry, manifest.defaults.as_ref())?;
        let file = std::fs::File::open(&path).map_err(|source| IngestError::FileUnreadable {
            path: path.clone(),
            source,
        })?;
        let series = parse_cycle_csv(file, &map, meta).map_err(|e| e.in_file(&path))?;
        out.push(series);
    }
    Ok(out)
}

/// Resolve one entry's metadata: per-test overrides > name grammar > defaults.
pub fn resolve_meta(
    entry: &ManifestEntry,
    defaults: Option<&MetaOverrides>,
) -> Result<AgingTestMeta, IngestError> {
    let stem = entry
        .path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = entry.name.clone().unwrap_or_else(|| stem.clone());
    let parsed = parse_test_name(&name).ok();

    let overrides = entry.meta.clone().unwrap_or_default();
    let empty = MetaOverrides::default();
    let defaults = defaults.unwrap_or(&empty);

    let test_id = overrides
        .test_id
        .clone()
        .or_else(|| defaults.test_id.clone())
        .unwrap_or_else(|| name.clone());
    let missing = |field: &'static str| IngestError::IncompleteMetadata {
        test: test_id.clone(),
        field,
    };

    let chemistry = overrides
        .chemistry
        .or(parsed.as_ref().map(|p| p.chemistry))
        .or(defaults.chemistry)
        .ok_or_else(|| missing("chemistry"))?;
    let ambient_temp_c = overrides
        .ambient_temp_c
        .or(parsed.as_ref().map(|p| p.ambient_temp_c))
        .or(defaults.ambient_temp_c)
        .ok_or_else(|| missing("ambient_temp_c"))?;
    let soc_low = overrides
        .soc_low_pct
        .or(parsed.as_ref().map(|p| p.soc_window.low_pct))
        .or(defaults.soc_low_pct)
        .ok_or_else(|| missing("soc_low_pct"))?;
    let soc_high = overrides
        .soc_high_pct
        .or(parsed.as_ref().map(|p| p.soc_window.high_pct))
        .or(defaults.soc_high_pct)
        .ok_or_else(|| missing("soc_high_pct"))?;
    let charge_rate_c = overrides
        .charge_rate_c
        .or(parsed.as_ref().map(|p| p.charge_rate_c))
        .or(defaults.charge_rate_c)
        .ok_or_else(|| missing("charge_rate_c"))?;
    let discharge_rate_c = overrides
        .discharge_rate_c
        .or(parsed.as_ref().map(|p| p.discharge_rate_c))
        .or(defaults.discharge_rate_c)
        .ok_or_else(|| missing("discharge_rate_c"))?;
    let nominal_capacity_ah = overrides
        .nominal_capacity_ah
        .or(defaults.nominal_capacity_ah)
        .ok_or_else(|| missing("nominal_capacity_ah"))?;

    let lab = overrides
        .lab
        .clone()
        .or_else(|| parsed.as_ref().map(|p| p.lab.clone()))
        .or_else(|| defaults.lab.clone())
        .unwrap_or_default();
    let form_factor = overrides
        .form_factor
        .clone()
        .or_else(|| parsed.as_ref().map(|p| p.form_factor.clone()))
        .or_else(|| defaults.form_factor.clone())
        .unwrap_or_default();
    let replicate_tag = overrides
        .replicate_tag
        .clone()
        .or_else(|| defaults.replicate_tag.clone())
        .unwrap_or_default();

    let meta = AgingTestMeta {
        test_id,
        lab,
        form_factor,
        chemistry,
        ambient_temp_c,
        soc_window: SocWindow::new(soc_low, soc_high),
        charge_rate_c,
        discharge_rate_c,
        nominal_capacity_ah,
        replicate_tag,
    };
    meta.validate()?;
    Ok(meta)
}

/// Read a dispatch schedule from CSV with columns
/// `t,duration_h,p_charge_kw,p_discharge_kw`.
pub fn parse_schedule_csv<R: Read>(source: R) -> Result<Schedule, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn {
                column: name.to_string(),
            })
    };
    let t_col = col("t")?;
    let dur_col = col("duration_h")?;
    let chg_col = col("p_charge_kw")?;
    let dis_col = col("p_discharge_kw")?;

    let mut steps = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = i + 1;
        let num = |col_idx: usize, name: &str| -> Result<f64, IngestError> {
            let raw = record.get(col_idx).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::MalformedRow {
                    row: row_no,
                    column: name.to_string(),
                    value: raw.to_string(),
                })
        };
        steps.push(ScheduleStep {
            t_h: num(t_col, "t")?,
            duration_h: num(dur_col, "duration_h")?,
            p_charge_kw: num(chg_col, "p_charge_kw")?,
            p_discharge_kw: num(dis_col, "p_discharge_kw")?,
        });
    }
    Ok(Schedule { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_meta() -> AgingTestMeta {
        AgingTestMeta {
            test_id: "t".into(),
            lab: "SNL".into(),
            form_factor: "18650".into(),
            chemistry: Chemistry::Lfp,
            ambient_temp_c: 25.0,
            soc_window: SocWindow::new(0.0, 100.0),
            charge_rate_c: 0.5,
            discharge_rate_c: 1.0,
            nominal_capacity_ah: 2.0,
            replicate_tag: "a".into(),
        }
    }

    #[test]
    fn parses_rows_in_order() {
        let csv = "Cycle_Index,Discharge_Capacity (Ah)\n1,2.00\n2,1.99\n3,1.98\n";
        let s = parse_cycle_csv(csv.as_bytes(), &ColumnMap::default(), test_meta()).unwrap();
        assert_eq!(s.points.len(), 3);
        assert_eq!(s.points[0].cycle_index, 1);
        assert_eq!(s.points[0].capacity_ah, 2.00);
        assert_eq!(s.points[2].capacity_ah, 1.98);
    }

    #[test]
    fn sorts_out_of_order_rows() {
        let csv = "Cycle_Index,Discharge_Capacity (Ah)\n3,1.98\n1,2.00\n2,1.99\n";
        let s = parse_cycle_csv(csv.as_bytes(), &ColumnMap::default(), test_meta()).unwrap();
        let idx: Vec<u32> = s.points.iter().map(|p| p.cycle_index).collect();
        assert_eq!(idx, vec![1, 2, 3]);
    }

    #[test]
    fn reports_malformed_row_number() {
        let csv = "Cycle_Index,Discharge_Capacity (Ah)\n1,2.00\n2,n/a\n";
        let err = parse_cycle_csv(csv.as_bytes(), &ColumnMap::default(), test_meta()).unwrap_err();
        match err {
            IngestError::MalformedRow { row, value, .. } => {
                assert_eq!(row, 2);
                assert_eq!(value, "n/a");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_column() {
        let csv = "Cycle,Capacity\n1,2.0\n";
        let err = parse_cycle_csv(csv.as_bytes(), &ColumnMap::default(), test_meta()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn { column } if column == "Cycle_Index"));
    }

    #[test]
    fn rejects_duplicate_cycle_index() {
        let csv = "Cycle_Index,Discharge_Capacity (Ah)\n1,2.0\n1,1.99\n";
        let err = parse_cycle_csv(csv.as_bytes(), &ColumnMap::default(), test_meta()).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateCycleIndex { index: 1 }));
    }

    #[test]
    fn rejects_negative_capacity() {
        let csv = "Cycle_Index,Discharge_Capacity (Ah)\n1,-0.5\n";
        assert!(parse_cycle_csv(csv.as_bytes(), &ColumnMap::default(), test_meta()).is_err());
    }

    #[test]
    fn retains_zero_capacity_rows() {
        let csv = "Cycle_Index,Discharge_Capacity (Ah)\n1,2.0\n2,0.0\n";
        let s = parse_cycle_csv(csv.as_bytes(), &ColumnMap::default(), test_meta()).unwrap();
        assert_eq!(s.points[1].capacity_ah, 0.0);
    }

    #[test]
    fn carries_extra_columns_through_sort() {
        let mut map = ColumnMap::default();
        map.extra
            .insert("charge_capacity".into(), "Charge_Capacity (Ah)".into());
        let csv =
            "Cycle_Index,Discharge_Capacity (Ah),Charge_Capacity (Ah)\n2,1.99,2.01\n1,2.00,2.02\n";
        let s = parse_cycle_csv(csv.as_bytes(), &map, test_meta()).unwrap();
        assert_eq!(s.extra["charge_capacity"], vec![2.02, 2.01]);
    }

    #[test]
    fn accepts_float_formatted_cycle_index() {
        let csv = "Cycle_Index,Discharge_Capacity (Ah)\n1.0,2.0\n2.0,1.99\n";
        let s = parse_cycle_csv(csv.as_bytes(), &ColumnMap::default(), test_meta()).unwrap();
        assert_eq!(s.points[1].cycle_index, 2);
    }

    #[test]
    fn column_map_rejects_duplicates() {
        let map = ColumnMap {
            cycle_index: "A".into(),
            discharge_capacity: "A".into(),
            extra: BTreeMap::new(),
        };
        assert!(map.validate().is_err());
    }

    #[test]
    fn empty_manifest_loads_empty_dataset() {
        let manifest = Manifest::default();
        let out = load_dataset(Path::new("."), &manifest).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn missing_file_errors_with_path() {
        let manifest = Manifest {
            columns: None,
            defaults: Some(MetaOverrides {
                nominal_capacity_ah: Some(2.0),
                ..Default::default()
            }),
            tests: vec![ManifestEntry {
                path: PathBuf::from("SNL_18650_LFP_25C_0-100_0.5-1C.csv"),
                name: None,
                meta: None,
                columns: None,
            }],
        };
        let err = load_dataset(Path::new("/nonexistent-root"), &manifest).unwrap_err();
        match err {
            IngestError::FileUnreadable { path, .. } => {
                assert!(path.to_string_lossy().contains("SNL_18650_LFP"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn meta_resolution_order() {
        // Grammar supplies most fields, defaults fill nominal capacity,
        // per-test overrides beat the grammar.
        let entry = ManifestEntry {
            path: PathBuf::from("SNL_18650_LFP_25C_0-100_0.5-1C.csv"),
            name: None,
            meta: Some(MetaOverrides {
                ambient_temp_c: Some(35.0),
                replicate_tag: Some("b".into()),
                ..Default::default()
            }),
            columns: None,
        };
        let defaults = MetaOverrides {
            nominal_capacity_ah: Some(1.1),
            ambient_temp_c: Some(15.0), // must lose to both grammar and override
            ..Default::default()
        };
        let meta = resolve_meta(&entry, Some(&defaults)).unwrap();
        assert_eq!(meta.chemistry, Chemistry::Lfp);
        assert_eq!(meta.ambient_temp_c, 35.0);
        assert_eq!(meta.nominal_capacity_ah, 1.1);
        assert_eq!(meta.replicate_tag, "b");
        assert_eq!(meta.test_id, "SNL_18650_LFP_25C_0-100_0.5-1C");
    }

    #[test]
    fn ungrammatical_name_needs_full_sidecar() {
        let entry = ManifestEntry {
            path: PathBuf::from("cell01.csv"),
            name: None,
            meta: None,
            columns: None,
        };
        let err = resolve_meta(&entry, None).unwrap_err();
        assert!(matches!(err, IngestError::IncompleteMetadata { .. }));
    }

    #[test]
    fn parses_schedule_csv() {
        let csv = "t,duration_h,p_charge_kw,p_discharge_kw\n0,1,5,0\n1,1,0,5\n";
        let s = parse_schedule_csv(csv.as_bytes()).unwrap();
        assert_eq!(s.steps.len(), 2);
        assert_eq!(s.steps[0].p_charge_kw, 5.0);
        assert_eq!(s.steps[1].p_discharge_kw, 5.0);
    }
}
