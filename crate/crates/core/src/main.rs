//! Command-line front end: validate bundles, derive shocks, run models,
//! and emit sensitivity reports.
//!
//! Exit codes: 0 on success, 1 on validation or domain errors (message on
//! stderr), 2 on usage errors. Stdout carries machine-parseable data (JSON
//! here, CSV in the report files); stderr carries diagnostics only.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use outage_io::ingest::{self, load_mrio_bundle_with_report, load_scenario};
use outage_io::models::{ImpactEngine, ImpactModel, RankedSector};
use outage_io::report::{
    self, compare_validation, emit_report, parameterization_dispersion, parse_grid_csv,
    run_grid, summary_stats, CellState, ReportFormats, SensitivityGrid, StatScope, SummaryStats,
};
use outage_io::shock::ShockMethod;

#[derive(Parser)]
#[command(
    name = "outage-io",
    version,
    about = "Static input-output modeling of power-outage demand shocks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a bundle and print productiveness and balance diagnostics.
    Validate {
        /// Bundle directory.
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Derive one parameterization's demand shock from a scenario.
    Shock {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = ["household", "kwh", "luminosity"])]
        method: String,
    },
    /// Run a single model on a single parameterization.
    Run {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = ["household", "kwh", "luminosity"])]
        method: String,
        #[arg(long, value_parser = ["leontief_ghosh", "critical_input", "inoperability"])]
        model: String,
    },
    /// Run the full parameterization-by-model grid and emit report files.
    Grid {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for grid.csv, stats.csv, dispersion.csv,
        /// rankings.csv and the optional comparison.svg.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated list drawn from: csv, svg.
        #[arg(long, default_value = "csv,svg")]
        formats: String,
        /// Sectors per cell in rankings.csv.
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
    /// Recompute statistics and reports from an existing grid.csv.
    Report {
        /// A grid.csv previously written by `grid`.
        #[arg(long)]
        grid: PathBuf,
        /// Optional scenario supplying external validation estimates.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv,svg")]
        formats: String,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// OUTAGE_IO_THREADS caps internal parallelism; 0 or unset means automatic.
fn configure_threads() {
    if let Ok(value) = std::env::var("OUTAGE_IO_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        } else {
            eprintln!("warning: ignoring non-numeric OUTAGE_IO_THREADS={value:?}");
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Validate { bundle } => cmd_validate(bundle),
        Command::Shock { scenario, method } => cmd_shock(scenario, &method),
        Command::Run {
            bundle,
            scenario,
            method,
            model,
        } => cmd_run(bundle, scenario, &method, &model),
        Command::Grid {
            bundle,
            scenario,
            out,
            formats,
            top_n,
        } => cmd_grid(bundle, scenario, out, &formats, top_n),
        Command::Report {
            grid,
            scenario,
            out,
            formats,
            top_n,
        } => cmd_report(grid, scenario, out, &formats, top_n),
    }
}

#[derive(Serialize)]
struct ValidateOutput {
    status: &'static str,
    sectors: usize,
    regions: usize,
    base_year: i32,
    currency_scale: String,
    matrix_source: &'static str,
    max_column_sum: f64,
    spectral_radius: f64,
    productive: bool,
    consistency_residual: f64,
    value_added_residual: f64,
    zero_output_sectors: Vec<usize>,
}

fn cmd_validate(bundle: PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let (table, report) = load_mrio_bundle_with_report(&bundle)?;
    let output = ValidateOutput {
        status: "ok",
        sectors: report.sectors,
        regions: report.regions,
        base_year: table.base_year(),
        currency_scale: table.currency_scale().to_string(),
        matrix_source: match report.matrix_source {
            ingest::MatrixSource::Coefficients => "coefficients",
            ingest::MatrixSource::Transactions => "transactions",
        },
        max_column_sum: report.productiveness.max_column_sum,
        spectral_radius: report.productiveness.spectral_radius,
        productive: report.productiveness.pass,
        consistency_residual: report.consistency_residual,
        value_added_residual: report.value_added_residual,
        zero_output_sectors: report.zero_output_sectors,
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}

fn cmd_shock(scenario: PathBuf, method: &str) -> Result<(), Box<dyn std::error::Error>> {
    let scenario = load_scenario(&scenario)?;
    let method = ShockMethod::parse(method).expect("clap validated the value");
    let shock = scenario.build_shock(method)?;
    println!("{}", serde_json::to_string_pretty(&shock)?);
    Ok(())
}

#[derive(Serialize)]
struct RunOutput {
    event_id: String,
    model: ImpactModel,
    method: ShockMethod,
    target: outage_io::shock::SectorRef,
    unit: String,
    direct: f64,
    upstream_indirect: f64,
    downstream_indirect: f64,
    total_indirect: f64,
    domestic_indirect: f64,
    global_indirect: f64,
    top_sectors: Vec<RankedSector>,
    assumptions: outage_io::shock::ShockAssumptions,
}

fn cmd_run(
    bundle: PathBuf,
    scenario: PathBuf,
    method: &str,
    model: &str,
) -> Result<(), Box<dyn std::error::Error>> {
    let table = ingest::load_mrio_bundle(&bundle)?;
    let scenario = load_scenario(&scenario)?;
    let method = ShockMethod::parse(method).expect("clap validated the value");
    let model = ImpactModel::parse(model).expect("clap validated the value");
    let shock = scenario.build_shock(method)?;
    let engine = ImpactEngine::new(&table)?;
    let result = engine.run(model, &shock)?;
    let output = RunOutput {
        event_id: shock.event_id.clone(),
        model,
        method,
        target: shock.target.clone(),
        unit: table.currency_scale().to_string(),
        direct: result.direct,
        upstream_indirect: result.upstream_indirect,
        downstream_indirect: result.downstream_indirect,
        total_indirect: result.total_indirect,
        domestic_indirect: result.domestic_indirect,
        global_indirect: result.global_indirect,
        top_sectors: result.sector_rankings.into_iter().take(10).collect(),
        assumptions: shock.assumptions,
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}

#[derive(Serialize)]
struct GridOutput {
    event_id: String,
    unit: String,
    cells_available: usize,
    files: Vec<String>,
    stats: Vec<SummaryStats>,
    dispersion: Vec<report::DispersionRow>,
    comparisons: Vec<report::ComparisonRow>,
}

fn cmd_grid(
    bundle: PathBuf,
    scenario_path: PathBuf,
    out: PathBuf,
    formats: &str,
    top_n: usize,
) -> Result<(), Box<dyn std::error::Error>> {
    let formats = ReportFormats::parse(formats)
        .ok_or_else(|| format!("unknown format list {formats:?} (expected csv,svg)"))?;
    let table = ingest::load_mrio_bundle(&bundle)?;
    let scenario = load_scenario(&scenario_path)?;
    let grid = run_grid(&table, &scenario)?;

    for method in SensitivityGrid::METHODS {
        for model in SensitivityGrid::MODELS {
            match grid.cell(method, model) {
                CellState::Unavailable { reason } => {
                    eprintln!("warning: {method}/{model} unavailable: {reason}");
                }
                CellState::Failed { error } => {
                    eprintln!("warning: {method}/{model} failed: {error}");
                }
                CellState::Available(_) => {}
            }
        }
    }
    if grid.available_count() == 0 {
        return Err("every grid cell failed or was unavailable".into());
    }

    let files = emit_report(&grid, &scenario.validation_estimates, top_n, &out, formats)?;
    print_grid_summary(&grid, &scenario.validation_estimates, files)?;
    Ok(())
}

fn cmd_report(
    grid_path: PathBuf,
    scenario: Option<PathBuf>,
    out: PathBuf,
    formats: &str,
    top_n: usize,
) -> Result<(), Box<dyn std::error::Error>> {
    let formats = ReportFormats::parse(formats)
        .ok_or_else(|| format!("unknown format list {formats:?} (expected csv,svg)"))?;
    let grid = parse_grid_csv(&grid_path)?;
    let estimates = match scenario {
        Some(path) => load_scenario(&path)?.validation_estimates,
        None => Vec::new(),
    };
    let files = emit_report(&grid, &estimates, top_n, &out, formats)?;
    print_grid_summary(&grid, &estimates, files)?;
    Ok(())
}

fn print_grid_summary(
    grid: &SensitivityGrid,
    estimates: &[ingest::ValidationEstimate],
    files: Vec<PathBuf>,
) -> Result<(), Box<dyn std::error::Error>> {
    let stats: Vec<SummaryStats> = StatScope::ALL
        .iter()
        .filter_map(|&scope| summary_stats(grid, scope).ok())
        .collect();
    let dispersion = parameterization_dispersion(grid).unwrap_or_default();
    let comparisons = compare_validation(grid, estimates);
    let output = GridOutput {
        event_id: grid.event_id.clone(),
        unit: grid.currency.clone(),
        cells_available: grid.available_count(),
        files: files
            .into_iter()
            .map(|p| p.display().to_string())
            .collect(),
        stats,
        dispersion,
        comparisons,
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}
