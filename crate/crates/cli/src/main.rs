//! Command-line front end for the fadebench pipeline.
//!
//! The config file is the single source of parameters; flags select actions
//! and override paths. Exit codes: 0 success, 1 domain error (single-line
//! `error: ...` on stderr), 2 usage error. The pipeline is deterministic:
//! running the same command twice produces byte-identical artifacts.

mod pipeline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use serde_json::json;

use fadebench::config::{load_run_config, RunConfig};
use fadebench::cycles::{extract_cycles, soc_from_power};
use fadebench::emit;
use fadebench::ingest::{parse_schedule_csv, ColumnMap};
use fadebench::models::{dod_cost, linear_cost};
use fadebench::report::{
    compare_models, group_scenarios, ratio_report, summarize_dataset, GroupField, ReportError,
    ScenarioReport,
};
use fadebench::svg::{self, BarGroup, PlotSpec, Trace};

use pipeline::{
    build_models, config_echo, load_cleaned, load_raw, sanitize_filename, write_atomic,
};

#[derive(Parser)]
#[command(
    name = "fadebench",
    version,
    about = "Battery cycle-aging analysis and degradation cost model benchmarking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the dataset and write normalized per-test series CSVs.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Clean the dataset; write cleaned series, removal ledgers and deltas.
    Clean {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Calibrate both models and export them as models.json.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare the models against the benchmark per scenario.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated scenario key fields:
        /// chemistry, temperature, charge-rate, discharge-rate, dod.
        #[arg(long, value_delimiter = ',', default_value = "temperature", value_parser = parse_group_field)]
        group_by: Vec<GroupField>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Price a dispatch schedule under both models.
    ScheduleCost {
        #[arg(long)]
        config: PathBuf,
        /// Schedule CSV with columns t,duration_h,p_charge_kw,p_discharge_kw.
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Count tests by chemistry and discharge rate.
    Census {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset manifest, when running without a config file.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Output path (default census.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG plots of the dataset or the scenario comparison.
    Plot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = PlotKind::Capacity)]
        kind: PlotKind,
        /// Scenario key fields for --kind bars.
        #[arg(long, value_delimiter = ',', default_value = "temperature", value_parser = parse_group_field)]
        group_by: Vec<GroupField>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum PlotKind {
    Capacity,
    Deltas,
    Bars,
}

fn parse_group_field(s: &str) -> Result<GroupField, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', "; "));
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { config, out_dir } => {
            let config = load_config(&config, out_dir)?;
            cmd_ingest(&config)
        }
        Command::Clean { config, out_dir } => {
            let config = load_config(&config, out_dir)?;
            cmd_clean(&config)
        }
        Command::Calibrate { config, out_dir } => {
            let config = load_config(&config, out_dir)?;
            cmd_calibrate(&config)
        }
        Command::Evaluate {
            config,
            group_by,
            out_dir,
        } => {
            let config = load_config(&config, out_dir)?;
            cmd_evaluate(&config, &group_by)
        }
        Command::ScheduleCost {
            config,
            schedule,
            out_dir,
        } => {
            let config = load_config(&config, out_dir)?;
            cmd_schedule_cost(&config, &schedule)
        }
        Command::Census {
            config,
            manifest,
            out,
        } => cmd_census(config, manifest, out),
        Command::Plot {
            config,
            kind,
            group_by,
            out_dir,
        } => {
            let config = load_config(&config, out_dir)?;
            cmd_plot(&config, kind, &group_by)
        }
    }
}

fn load_config(path: &Path, out_dir: Option<PathBuf>) -> Result<RunConfig> {
    let mut config = load_run_config(path)?;
    if let Some(dir) = out_dir {
        config.output_dir = dir;
    }
    Ok(config)
}

fn cmd_ingest(config: &RunConfig) -> Result<()> {
    let dataset = load_raw(config)?;
    let map = ColumnMap::default();
    for series in &dataset {
        let path = config
            .output_dir
            .join("ingested")
            .join(format!("{}.csv", sanitize_filename(&series.meta.test_id)));
        write_atomic(&path, emit::emit_series_csv(series, &map).as_bytes())?;
        println!("wrote {}", path.display());
    }
    println!("ingested {} tests", dataset.len());
    Ok(())
}

fn cmd_clean(config: &RunConfig) -> Result<()> {
    let cleaned = load_cleaned(config)?;
    for (clean, deltas) in &cleaned {
        let id = sanitize_filename(&clean.meta.test_id);
        let base = &config.output_dir;
        let capacity_path = base.join("cleaned").join(format!("{id}.csv"));
        write_atomic(
            &capacity_path,
            emit::emit_clean_series_csv(clean).as_bytes(),
        )?;
        let removed_path = base.join("removed").join(format!("{id}.csv"));
        write_atomic(
            &removed_path,
            emit::emit_removed_csv(&clean.removed).as_bytes(),
        )?;
        let deltas_path = base.join("deltas").join(format!("{id}.csv"));
        write_atomic(&deltas_path, emit::emit_deltas_csv(deltas).as_bytes())?;
        println!(
            "cleaned {}: {} retained, {} removed",
            clean.meta.test_id,
            clean.points.len(),
            clean.removed.len()
        );
    }
    Ok(())
}

fn cmd_calibrate(config: &RunConfig) -> Result<()> {
    let deltas: Vec<_> = load_cleaned(config)?.into_iter().map(|(_, d)| d).collect();
    let (linear, table) = build_models(config, &deltas)?;
    let out = json!({
        "linear": linear,
        "dod_table": table,
        "throughput_convention": config.throughput_convention,
        "calibration_source": config.dod_model.source_label(),
    });
    let path = config.output_dir.join("models.json");
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Shared by `evaluate` and `plot --kind bars`.
fn scenario_reports(config: &RunConfig, group_by: &[GroupField]) -> Result<Vec<ScenarioReport>> {
    let deltas: Vec<_> = load_cleaned(config)?.into_iter().map(|(_, d)| d).collect();
    let (linear, table) = build_models(config, &deltas)?;
    let echo = config_echo(config);
    let groups = group_scenarios(&deltas, group_by)?;
    let mut reports = Vec::with_capacity(groups.len());
    for (key, members) in groups {
        reports.push(compare_models(
            &key,
            &members,
            &linear,
            &table,
            &config.econ,
            &echo,
        )?);
    }
    Ok(reports)
}

fn bars_from_reports(reports: &[ScenarioReport]) -> Vec<BarGroup> {
    reports
        .iter()
        .map(|r| BarGroup {
            label: r.key.label(),
            model1: r.linear.fade_ah_per_cycle,
            model2: r.dod.fade_ah_per_cycle,
            benchmark: r.benchmark_fade_ah_per_cycle,
        })
        .collect()
}

fn cmd_evaluate(config: &RunConfig, group_by: &[GroupField]) -> Result<()> {
    let reports = scenario_reports(config, group_by)?;
    let base = &config.output_dir;

    let scenarios_path = base.join("scenarios.csv");
    write_atomic(
        &scenarios_path,
        emit::emit_scenarios_csv(&reports).as_bytes(),
    )?;
    println!("wrote {}", scenarios_path.display());

    if group_by.contains(&GroupField::Temperature) {
        // Ratios need scenarios that differ only in temperature; when they
        // don't (or there is a single one), emit a header-only table.
        let rows = match ratio_report(&reports) {
            Ok(rows) => rows,
            Err(ReportError::IncomparableScenarios(_)) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let ratios_path = base.join("ratios.csv");
        write_atomic(&ratios_path, emit::emit_ratios_csv(&rows).as_bytes())?;
        println!("wrote {}", ratios_path.display());
    }

    let spec = PlotSpec::ScenarioBars {
        title: "Degradation per cycle: models vs benchmark".into(),
        groups: bars_from_reports(&reports),
    };
    let svg_path = base.join("scenario_bars.svg");
    write_atomic(&svg_path, svg::render(&spec)?.as_bytes())?;
    println!("wrote {}", svg_path.display());
    Ok(())
}

fn cmd_schedule_cost(config: &RunConfig, schedule_path: &Path) -> Result<()> {
    let file = std::fs::File::open(schedule_path)
        .with_context(|| format!("opening schedule '{}'", schedule_path.display()))?;
    let schedule = parse_schedule_csv(file)?;
    schedule.validate()?;

    let deltas: Vec<_> = if config.dod_model.table.is_some() {
        Vec::new() // no calibration data needed
    } else {
        load_cleaned(config)?.into_iter().map(|(_, d)| d).collect()
    };
    let (linear, table) = build_models(config, &deltas)?;

    let eq2_cost = linear_cost(&linear, &schedule);

    let (eta_c, eta_d) = config.schedule.efficiencies();
    let profile = soc_from_power(&schedule, &config.econ, config.schedule.soc0, eta_c, eta_d)?;
    let cycles = extract_cycles(&profile)?;
    let eq3_cost = dod_cost(&table, &cycles.as_price_input(), &config.econ)?;

    let cycles_path = config.output_dir.join("extracted_cycles.csv");
    write_atomic(&cycles_path, emit::emit_cycles_csv(&cycles).as_bytes())?;

    println!("schedule_steps={}", schedule.steps.len());
    println!("extracted_cycles={}", cycles.cycles.len());
    println!("linear_cost={}", emit::fmt_f64(eq2_cost));
    println!("dod_cost={}", emit::fmt_f64(eq3_cost));
    println!("wrote {}", cycles_path.display());
    Ok(())
}

fn cmd_census(
    config: Option<PathBuf>,
    manifest: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let (dataset, default_out) = match (config, manifest) {
        (Some(config_path), _) => {
            let config = load_run_config(&config_path)?;
            let dataset = load_raw(&config)?;
            (dataset, config.output_dir.join("census.csv"))
        }
        (None, Some(manifest_path)) => {
            let manifest = fadebench::ingest::load_manifest(&manifest_path)?;
            let root = manifest_path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            let dataset = fadebench::ingest::load_dataset(&root, &manifest)?;
            (dataset, PathBuf::from("census.csv"))
        }
        (None, None) => {
            // Usage error, not a domain error.
            Cli::command()
                .error(
                    clap::error::ErrorKind::MissingRequiredArgument,
                    "census requires --config or --manifest",
                )
                .exit();
        }
    };
    let census = summarize_dataset(&dataset);
    let path = out.unwrap_or(default_out);
    write_atomic(&path, emit::emit_census_csv(&census).as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_plot(config: &RunConfig, kind: PlotKind, group_by: &[GroupField]) -> Result<()> {
    let (spec, filename) = match kind {
        PlotKind::Capacity => {
            let dataset = load_raw(config)?;
            let traces: Vec<Trace> = dataset
                .iter()
                .map(|s| Trace {
                    label: s.meta.test_id.clone(),
                    points: s
                        .points
                        .iter()
                        .map(|p| (p.cycle_index as f64, p.capacity_ah))
                        .collect(),
                })
                .collect();
            (
                PlotSpec::CapacityCurves {
                    title: "Battery capacity vs cycle number".into(),
                    traces,
                },
                "capacity.svg",
            )
        }
        PlotKind::Deltas => {
            let cleaned = load_cleaned(config)?;
            let traces: Vec<Trace> = cleaned
                .iter()
                .map(|(_, d)| Trace {
                    label: d.meta.test_id.clone(),
                    points: d
                        .deltas
                        .iter()
                        .map(|p| (p.cycle_index as f64, p.fade_ah))
                        .collect(),
                })
                .collect();
            (
                PlotSpec::DegradationDots {
                    title: "Per-cycle degradation".into(),
                    traces,
                },
                "degradation.svg",
            )
        }
        PlotKind::Bars => {
            let reports = scenario_reports(config, group_by)?;
            (
                PlotSpec::ScenarioBars {
                    title: "Degradation per cycle: models vs benchmark".into(),
                    groups: bars_from_reports(&reports),
                },
                "scenario_bars.svg",
            )
        }
    };
    let path = config.output_dir.join(filename);
    write_atomic(&path, svg::render(&spec)?.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}
