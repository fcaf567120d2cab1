//! Shared pipeline steps behind the CLI subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use fadebench::config::RunConfig;
use fadebench::ingest::{load_dataset, load_manifest, CapacitySeries};
use fadebench::models::{calibrate_dod_table, calibrate_linear, DodCostTable, LinearParams};
use fadebench::preprocess::{clean_series, CleanCapacitySeries, DegradationSeries};
use fadebench::report::ConfigEcho;

/// Write `bytes` to `path` atomically: temp file in the same directory,
/// rename on success. Failed runs leave no partial outputs behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory '{}'", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in '{}'", dir.display()))?;
    std::io::Write::write_all(&mut tmp, bytes)
        .with_context(|| format!("writing '{}'", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("renaming temp file onto '{}'", path.display()))?;
    Ok(())
}

/// Test ids double as file names; keep them filesystem-safe.
pub fn sanitize_filename(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Load every series listed in the config's manifest.
pub fn load_raw(config: &RunConfig) -> Result<Vec<CapacitySeries>> {
    let manifest = load_manifest(&config.manifest)?;
    let root = config
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(load_dataset(&root, &manifest)?)
}

/// Load and clean the whole dataset. Cleaning parameters resolve per test
/// from the config (the idle threshold scales with nominal capacity).
pub fn load_cleaned(config: &RunConfig) -> Result<Vec<(CleanCapacitySeries, DegradationSeries)>> {
    let raw = load_raw(config)?;
    raw.iter()
        .map(|series| {
            let params = config.clean.resolve(series.meta.nominal_capacity_ah);
            clean_series(series, &params)
                .with_context(|| format!("cleaning test '{}'", series.meta.test_id))
        })
        .collect()
}

/// Calibrate both heuristic models from the config and cleaned dataset.
pub fn build_models(
    config: &RunConfig,
    deltas: &[DegradationSeries],
) -> Result<(LinearParams, DodCostTable)> {
    let linear = calibrate_linear(&config.econ)?;
    let table = match config.dod_model.explicit_table()? {
        Some(table) => table,
        None => {
            let spec = config
                .dod_model
                .calibration
                .as_ref()
                .expect("validated config has table or calibration");
            let mut groups = Vec::with_capacity(spec.groups.len());
            for group in &spec.groups {
                let mut members: Vec<&DegradationSeries> = Vec::new();
                for id in &group.tests {
                    let found: Vec<&DegradationSeries> =
                        deltas.iter().filter(|d| &d.meta.test_id == id).collect();
                    if found.is_empty() {
                        bail!("calibration test '{id}' not found in the dataset");
                    }
                    members.extend(found);
                }
                groups.push((group.dod_percent, members));
            }
            calibrate_dod_table(&groups)?
        }
    };
    Ok((linear, table))
}

/// Configuration echo attached to every report row.
pub fn config_echo(config: &RunConfig) -> ConfigEcho {
    let params = config.clean.resolve(1.0);
    ConfigEcho {
        throughput_convention: config.throughput_convention,
        calibration_source: config.dod_model.source_label(),
        idle_eps_spec: config.clean.idle_eps_spec(),
        spike_window: params.spike_window,
        spike_k: params.spike_k,
        eol_fraction: params.eol_fraction,
    }
}
