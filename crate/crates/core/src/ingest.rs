//! Loaders for economy bundles, scenario configurations, and outage series.
//!
//! A bundle is a directory of CSV files plus optional `meta.json`:
//!
//! * `sectors.csv` — `index,region,sector_name,gross_output`, indices dense
//!   `0..n-1` in file order;
//! * exactly one of `A.csv` (technical coefficients) or `T.csv`
//!   (transactions, converted on load) — optionally gzip-compressed as
//!   `A.csv.gz`/`T.csv.gz` — shaped `n` rows by `n` comma-separated values;
//! * `final_demand.csv`, `value_added.csv` — `index,value`, pre-summed over
//!   demand categories at export time;
//! * `meta.json` — base year, currency scale, tolerance overrides, and the
//!   demand categories the exporter summed.
//!
//! Validation is fail-fast: the first offending file, row, or column aborts
//! the load. Nothing is imputed or reordered; a table that does not balance
//! within tolerance is an error, not a warning, because every downstream
//! sensitivity number depends on it.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use flate2::read::GzDecoder;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mrio::{
    build_technical_coefficients, productiveness_check, MrioError, MrioTable,
    ProductivenessReport, RegionSector, Tolerances,
};
use crate::raster::{self, AreaOfInterest, RasterError};
use crate::shock::{
    self, DemandShock, IntegrationRule, OutageSeries, SectorRef, ShockConstants, ShockError,
    ShockMethod,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required file: {path}")]
    MissingFile { path: String },
    #[error("bundle provides both a coefficients and a transactions matrix; supply exactly one")]
    AmbiguousMatrixSource,
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("{path} row {row}: index {got} breaks the dense sequence (expected {expected})")]
    IndexGap {
        path: String,
        row: usize,
        expected: usize,
        got: String,
    },
    #[error("{path}: {detail}")]
    ShapeMismatch { path: String, detail: String },
    #[error("{path} row {row}: bad timestamp {value:?} (expected ISO-8601)")]
    BadTimestamp {
        path: String,
        row: usize,
        value: String,
    },
    #[error("{path} row {row}: customer count must be a nonnegative integer, got {value:?}")]
    NegativeCount {
        path: String,
        row: usize,
        value: String,
    },
    #[error("{path} row {row}: timestamps out of order")]
    Disorder { path: String, row: usize },
    #[error("{path}: no data rows")]
    EmptySeries { path: String },
    #[error("scenario field `{field}`: {message}")]
    SchemaViolation { field: String, message: String },
    #[error("scenario declares no parameterization block (household, kwh, or luminosity)")]
    MissingParameterization,
    #[error("scenario has no `{method}` block; that parameterization is unavailable")]
    MethodUnavailable { method: ShockMethod },
    #[error(transparent)]
    Mrio(#[from] MrioError),
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Bundle-level metadata and overrides.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BundleMeta {
    pub base_year: Option<i32>,
    pub currency_scale: Option<String>,
    pub consistency_tolerance: Option<f64>,
    pub identity_tolerance: Option<f64>,
    /// "gzip" when matrix files ship as `.csv.gz`.
    pub compression: Option<String>,
    /// Which demand categories the exporter summed into `final_demand.csv`.
    pub final_demand_categories: Option<Vec<String>>,
}

/// Validation diagnostics gathered while loading a bundle.
#[derive(Debug, Clone)]
pub struct BundleReport {
    pub sectors: usize,
    pub regions: usize,
    pub productiveness: ProductivenessReport,
    pub consistency_residual: f64,
    pub value_added_residual: f64,
    pub zero_output_sectors: Vec<usize>,
    pub matrix_source: MatrixSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixSource {
    Coefficients,
    Transactions,
}

/// Loads and validates a bundle directory into a table.
pub fn load_mrio_bundle(dir: impl AsRef<Path>) -> Result<MrioTable, IngestError> {
    load_mrio_bundle_with_report(dir).map(|(table, _)| table)
}

/// As [`load_mrio_bundle`], also returning the validation diagnostics.
pub fn load_mrio_bundle_with_report(
    dir: impl AsRef<Path>,
) -> Result<(MrioTable, BundleReport), IngestError> {
    let dir = dir.as_ref();
    let sectors_path = require_file(dir.join("sectors.csv"))?;
    let demand_path = require_file(dir.join("final_demand.csv"))?;
    let value_path = require_file(dir.join("value_added.csv"))?;

    let a_path = existing_variant(dir, "A.csv")?;
    let t_path = existing_variant(dir, "T.csv")?;
    let (matrix_path, source) = match (a_path, t_path) {
        (Some(_), Some(_)) => return Err(IngestError::AmbiguousMatrixSource),
        (Some(p), None) => (p, MatrixSource::Coefficients),
        (None, Some(p)) => (p, MatrixSource::Transactions),
        (None, None) => {
            return Err(IngestError::MissingFile {
                path: dir.join("A.csv (or T.csv)").display().to_string(),
            })
        }
    };

    let meta = load_meta(dir.join("meta.json"))?;
    let sectors = read_sectors(&sectors_path)?;
    let n = sectors.len();
    let gross_output = DVector::from_vec(sectors.iter().map(|s| s.gross_output).collect());
    let matrix = read_matrix(&matrix_path, n)?;
    let final_demand = read_indexed_vector(&demand_path, n)?;
    let value_added = read_indexed_vector(&value_path, n)?;

    let a = match source {
        MatrixSource::Coefficients => matrix,
        MatrixSource::Transactions => build_technical_coefficients(&matrix, &gross_output)?,
    };

    let tolerances = Tolerances {
        identity: meta
            .identity_tolerance
            .unwrap_or(crate::mrio::DEFAULT_IDENTITY_TOLERANCE),
        consistency: meta
            .consistency_tolerance
            .unwrap_or(crate::mrio::DEFAULT_CONSISTENCY_TOLERANCE),
    };
    let region_sectors = sectors
        .iter()
        .map(|s| RegionSector::new(s.region.clone(), s.sector_name.clone()))
        .collect();
    let productiveness = productiveness_check(&a)?;
    let table = MrioTable::new(
        region_sectors,
        a,
        final_demand,
        gross_output,
        value_added,
        meta.base_year.unwrap_or(2017),
        meta.currency_scale.clone().unwrap_or_else(|| "USD".into()),
        tolerances,
    )?;
    let consistency_residual = table.check_consistency()?;
    let regions = {
        let mut names: Vec<&str> = table.sectors().iter().map(|s| s.region.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names.len()
    };
    let report = BundleReport {
        sectors: table.len(),
        regions,
        productiveness,
        consistency_residual,
        value_added_residual: table.value_added_residual(),
        zero_output_sectors: table.zero_output_sectors().to_vec(),
        matrix_source: source,
    };
    Ok((table, report))
}

/// Writes a table back out as a bundle (coefficients form, uncompressed),
/// using shortest round-trip decimal formatting so reloads are bit-exact.
pub fn save_mrio_bundle(table: &MrioTable, dir: impl AsRef<Path>) -> Result<(), IngestError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| IngestError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let write = |name: &str, contents: String| -> Result<(), IngestError> {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
    };

    let mut sectors = String::from("index,region,sector_name,gross_output\n");
    for (i, rs) in table.sectors().iter().enumerate() {
        sectors.push_str(&format!(
            "{},{},{},{}\n",
            i,
            rs.region,
            rs.sector,
            table.gross_output()[i]
        ));
    }
    write("sectors.csv", sectors)?;

    let n = table.len();
    let mut matrix = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| format!("{}", table.coefficients()[(i, j)]))
            .collect();
        matrix.push_str(&row.join(","));
        matrix.push('\n');
    }
    write("A.csv", matrix)?;

    for (name, vector) in [
        ("final_demand.csv", table.final_demand()),
        ("value_added.csv", table.value_added()),
    ] {
        let mut out = String::from("index,value\n");
        for i in 0..n {
            out.push_str(&format!("{},{}\n", i, vector[i]));
        }
        write(name, out)?;
    }

    let meta = BundleMeta {
        base_year: Some(table.base_year()),
        currency_scale: Some(table.currency_scale().to_string()),
        consistency_tolerance: Some(table.tolerances().consistency),
        identity_tolerance: Some(table.tolerances().identity),
        compression: None,
        final_demand_categories: None,
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write("meta.json", meta_json)
}

fn require_file(path: PathBuf) -> Result<PathBuf, IngestError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(IngestError::MissingFile {
            path: path.display().to_string(),
        })
    }
}

/// Returns `name` or `name.gz` if present; both present is ambiguous.
fn existing_variant(dir: &Path, name: &str) -> Result<Option<PathBuf>, IngestError> {
    let plain = dir.join(name);
    let gz = dir.join(format!("{name}.gz"));
    match (plain.is_file(), gz.is_file()) {
        (true, true) => Err(IngestError::AmbiguousMatrixSource),
        (true, false) => Ok(Some(plain)),
        (false, true) => Ok(Some(gz)),
        (false, false) => Ok(None),
    }
}

fn load_meta(path: PathBuf) -> Result<BundleMeta, IngestError> {
    if !path.is_file() {
        return Ok(BundleMeta::default());
    }
    let text = fs::read_to_string(&path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IngestError::Malformed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>, IngestError> {
    let file = fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

struct SectorRow {
    region: String,
    sector_name: String,
    gross_output: f64,
}

fn read_sectors(path: &Path) -> Result<Vec<SectorRow>, IngestError> {
    let mut reader = csv_reader(path)?;
    expect_headers(
        path,
        &mut reader,
        &["index", "region", "sector_name", "gross_output"],
    )?;
    let mut rows = Vec::new();
    for (row_num, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(path, e))?;
        check_index(path, row_num, record.get(0).unwrap_or(""))?;
        let gross_output = parse_number(path, row_num, record.get(3).unwrap_or(""))?;
        rows.push(SectorRow {
            region: record.get(1).unwrap_or("").to_string(),
            sector_name: record.get(2).unwrap_or("").to_string(),
            gross_output,
        });
    }
    if rows.is_empty() {
        return Err(IngestError::ShapeMismatch {
            path: path.display().to_string(),
            detail: "no sector rows".to_string(),
        });
    }
    Ok(rows)
}

fn read_matrix(path: &Path, n: usize) -> Result<DMatrix<f64>, IngestError> {
    let reader = BufReader::new(open_maybe_gz(path)?);
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = 0usize;
        for token in line.split(',') {
            let value: f64 = token.trim().parse().map_err(|_| IngestError::Malformed {
                path: path.display().to_string(),
                detail: format!("row {rows}: non-numeric value {:?}", token.trim()),
            })?;
            values.push(value);
            cols += 1;
        }
        if cols != n {
            return Err(IngestError::ShapeMismatch {
                path: path.display().to_string(),
                detail: format!("row {rows} has {cols} columns, expected {n}"),
            });
        }
        rows += 1;
    }
    if rows != n {
        return Err(IngestError::ShapeMismatch {
            path: path.display().to_string(),
            detail: format!("{rows} rows, expected {n}"),
        });
    }
    Ok(DMatrix::from_row_slice(n, n, &values))
}

fn read_indexed_vector(path: &Path, n: usize) -> Result<DVector<f64>, IngestError> {
    let mut reader = csv_reader(path)?;
    expect_headers(path, &mut reader, &["index", "value"])?;
    let mut values = Vec::new();
    for (row_num, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(path, e))?;
        check_index(path, row_num, record.get(0).unwrap_or(""))?;
        values.push(parse_number(path, row_num, record.get(1).unwrap_or(""))?);
    }
    if values.len() != n {
        return Err(IngestError::ShapeMismatch {
            path: path.display().to_string(),
            detail: format!("{} rows, expected {n}", values.len()),
        });
    }
    Ok(DVector::from_vec(values))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<Box<dyn Read>>, IngestError> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open_maybe_gz(path)?))
}

fn expect_headers(
    path: &Path,
    reader: &mut csv::Reader<Box<dyn Read>>,
    expected: &[&str],
) -> Result<(), IngestError> {
    let headers = reader.headers().map_err(|e| malformed(path, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(IngestError::Malformed {
            path: path.display().to_string(),
            detail: format!("header {got:?}, expected {expected:?}"),
        });
    }
    Ok(())
}

fn check_index(path: &Path, row: usize, token: &str) -> Result<(), IngestError> {
    match token.parse::<usize>() {
        Ok(idx) if idx == row => Ok(()),
        _ => Err(IngestError::IndexGap {
            path: path.display().to_string(),
            row,
            expected: row,
            got: token.to_string(),
        }),
    }
}

fn parse_number(path: &Path, row: usize, token: &str) -> Result<f64, IngestError> {
    token.parse().map_err(|_| IngestError::Malformed {
        path: path.display().to_string(),
        detail: format!("row {row}: non-numeric value {token:?}"),
    })
}

fn malformed(path: &Path, err: impl std::fmt::Display) -> IngestError {
    IngestError::Malformed {
        path: path.display().to_string(),
        detail: err.to_string(),
    }
}

/// Parses a `timestamp,customers` CSV into an outage series.
///
/// Timestamps are ISO-8601 (seconds optional) and must already be in order;
/// disorder is an error, never silently sorted.
pub fn load_outage_series(path: impl AsRef<Path>) -> Result<OutageSeries, IngestError> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    expect_headers(path, &mut reader, &["timestamp", "customers"])?;
    let mut samples: Vec<(NaiveDateTime, u64)> = Vec::new();
    for (row_num, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(path, e))?;
        let ts_token = record.get(0).unwrap_or("");
        let ts = parse_timestamp(ts_token).ok_or_else(|| IngestError::BadTimestamp {
            path: path.display().to_string(),
            row: row_num,
            value: ts_token.to_string(),
        })?;
        let count_token = record.get(1).unwrap_or("");
        let count: i64 = count_token.parse().map_err(|_| IngestError::NegativeCount {
            path: path.display().to_string(),
            row: row_num,
            value: count_token.to_string(),
        })?;
        if count < 0 {
            return Err(IngestError::NegativeCount {
                path: path.display().to_string(),
                row: row_num,
                value: count_token.to_string(),
            });
        }
        if let Some((prev, _)) = samples.last() {
            if ts <= *prev {
                return Err(IngestError::Disorder {
                    path: path.display().to_string(),
                    row: row_num,
                });
            }
        }
        samples.push((ts, count as u64));
    }
    if samples.is_empty() {
        return Err(IngestError::EmptySeries {
            path: path.display().to_string(),
        });
    }
    Ok(OutageSeries::from_samples(samples)?)
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    None
}

/// One event's inputs: which parameterizations are available, the constants
/// they share, and external estimates to compare against.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub event_id: String,
    pub shocked_region: String,
    pub utilities_sector_id: String,
    pub household: Option<HouseholdParams>,
    pub kwh: Option<KwhParams>,
    pub luminosity: Option<LuminosityParams>,
    pub constants: ShockConstants,
    pub validation_estimates: Vec<ValidationEstimate>,
}

#[derive(Debug, Clone)]
pub struct HouseholdParams {
    pub series_path: Option<PathBuf>,
    pub total_consumer_hours: Option<f64>,
    pub window_start: Option<NaiveDateTime>,
    pub window_end: Option<NaiveDateTime>,
    pub integration: IntegrationRule,
}

#[derive(Debug, Clone)]
pub struct KwhParams {
    pub kwh_lost: f64,
}

#[derive(Debug, Clone)]
pub struct LuminosityParams {
    pub baseline_grid: PathBuf,
    pub event_grid: PathBuf,
    /// (min_lon, min_lat, max_lon, max_lat); full grid extent when absent.
    pub aoi: Option<[f64; 4]>,
    pub aoi_mask: Option<PathBuf>,
    pub duration_scaling: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationEstimate {
    pub label: String,
    /// Currency units.
    pub amount: f64,
}

// Raw serde mirror of the JSON document; semantic checks happen afterwards
// so violations carry field paths.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    event_id: String,
    shocked_region: String,
    utilities_sector_id: String,
    #[serde(default)]
    household: Option<RawHousehold>,
    #[serde(default)]
    kwh: Option<RawKwh>,
    #[serde(default)]
    luminosity: Option<RawLuminosity>,
    #[serde(default)]
    constants: RawConstants,
    #[serde(default)]
    validation_estimates: Vec<ValidationEstimate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHousehold {
    #[serde(default)]
    series_path: Option<String>,
    #[serde(default)]
    total_consumer_hours: Option<f64>,
    #[serde(default)]
    window_start: Option<String>,
    #[serde(default)]
    window_end: Option<String>,
    #[serde(default)]
    integration: Option<IntegrationRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKwh {
    kwh_lost: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLuminosity {
    baseline_grid: String,
    event_grid: String,
    #[serde(default)]
    aoi: Option<[f64; 4]>,
    #[serde(default)]
    aoi_mask: Option<String>,
    #[serde(default)]
    duration_scaling: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawConstants {
    final_utilities_demand: Option<f64>,
    population: Option<f64>,
    hours_per_year: Option<f64>,
    net_generation_kwh: Option<f64>,
    residential_share: Option<f64>,
    value_per_consumer_hour: Option<f64>,
}

impl RawConstants {
    fn merge_over_defaults(self) -> ShockConstants {
        let d = ShockConstants::default();
        ShockConstants {
            final_utilities_demand: self
                .final_utilities_demand
                .unwrap_or(d.final_utilities_demand),
            population: self.population.unwrap_or(d.population),
            hours_per_year: self.hours_per_year.unwrap_or(d.hours_per_year),
            net_generation_kwh: self.net_generation_kwh.unwrap_or(d.net_generation_kwh),
            residential_share: self.residential_share.unwrap_or(d.residential_share),
            value_per_consumer_hour: self.value_per_consumer_hour,
        }
    }
}

fn schema_violation(field: &str, message: impl Into<String>) -> IngestError {
    IngestError::SchemaViolation {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Loads and validates a scenario JSON document. Relative paths resolve
/// against the scenario file's directory and must exist at load time.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: RawScenario = serde_json::from_str(&text).map_err(|e| IngestError::Malformed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    if raw.household.is_none() && raw.kwh.is_none() && raw.luminosity.is_none() {
        return Err(IngestError::MissingParameterization);
    }

    let constants = raw.constants.merge_over_defaults();
    constants
        .validate()
        .map_err(|e| schema_violation("constants", e.to_string()))?;

    let resolve_existing = |field: &str, rel: &str| -> Result<PathBuf, IngestError> {
        let resolved = base_dir.join(rel);
        if resolved.is_file() {
            Ok(resolved)
        } else {
            Err(schema_violation(
                field,
                format!("referenced path {} does not exist", resolved.display()),
            ))
        }
    };

    let household = match raw.household {
        None => None,
        Some(h) => {
            let params = HouseholdParams {
                series_path: match (&h.series_path, h.total_consumer_hours) {
                    (Some(_), Some(_)) => {
                        return Err(schema_violation(
                            "household",
                            "give either series_path or total_consumer_hours, not both",
                        ))
                    }
                    (None, None) => {
                        return Err(schema_violation(
                            "household",
                            "one of series_path or total_consumer_hours is required",
                        ))
                    }
                    (Some(p), None) => Some(resolve_existing("household.series_path", p)?),
                    (None, Some(_)) => None,
                },
                total_consumer_hours: h.total_consumer_hours,
                window_start: parse_window(&h.window_start, "household.window_start")?,
                window_end: parse_window(&h.window_end, "household.window_end")?,
                integration: h.integration.unwrap_or_default(),
            };
            if let Some(hours) = params.total_consumer_hours {
                if hours < 0.0 {
                    return Err(schema_violation(
                        "household.total_consumer_hours",
                        "must be nonnegative",
                    ));
                }
            }
            Some(params)
        }
    };

    let kwh = match raw.kwh {
        None => None,
        Some(k) => {
            if k.kwh_lost < 0.0 {
                return Err(schema_violation("kwh.kwh_lost", "must be nonnegative"));
            }
            Some(KwhParams {
                kwh_lost: k.kwh_lost,
            })
        }
    };

    let luminosity = match raw.luminosity {
        None => None,
        Some(l) => {
            if l.aoi.is_some() && l.aoi_mask.is_some() {
                return Err(schema_violation(
                    "luminosity",
                    "give either aoi or aoi_mask, not both",
                ));
            }
            if let Some([min_lon, min_lat, max_lon, max_lat]) = l.aoi {
                if min_lon > max_lon || min_lat > max_lat {
                    return Err(schema_violation(
                        "luminosity.aoi",
                        "corners must be ordered",
                    ));
                }
            }
            if let Some(s) = l.duration_scaling {
                if s < 0.0 {
                    return Err(schema_violation(
                        "luminosity.duration_scaling",
                        "must be nonnegative",
                    ));
                }
            }
            Some(LuminosityParams {
                baseline_grid: resolve_existing("luminosity.baseline_grid", &l.baseline_grid)?,
                event_grid: resolve_existing("luminosity.event_grid", &l.event_grid)?,
                aoi: l.aoi,
                aoi_mask: l
                    .aoi_mask
                    .as_deref()
                    .map(|p| resolve_existing("luminosity.aoi_mask", p))
                    .transpose()?,
                duration_scaling: l.duration_scaling,
            })
        }
    };

    Ok(ScenarioConfig {
        event_id: raw.event_id,
        shocked_region: raw.shocked_region,
        utilities_sector_id: raw.utilities_sector_id,
        household,
        kwh,
        luminosity,
        constants,
        validation_estimates: raw.validation_estimates,
    })
}

fn parse_window(
    value: &Option<String>,
    field: &str,
) -> Result<Option<NaiveDateTime>, IngestError> {
    match value {
        None => Ok(None),
        Some(s) => parse_timestamp(s)
            .map(Some)
            .ok_or_else(|| schema_violation(field, format!("bad timestamp {s:?}"))),
    }
}

impl ScenarioConfig {
    pub fn target(&self) -> SectorRef {
        SectorRef::new(
            self.shocked_region.clone(),
            self.utilities_sector_id.clone(),
        )
    }

    pub fn methods_available(&self) -> Vec<ShockMethod> {
        let mut methods = Vec::new();
        if self.household.is_some() {
            methods.push(ShockMethod::Household);
        }
        if self.kwh.is_some() {
            methods.push(ShockMethod::Kwh);
        }
        if self.luminosity.is_some() {
            methods.push(ShockMethod::Luminosity);
        }
        methods
    }

    pub fn has_method(&self, method: ShockMethod) -> bool {
        match method {
            ShockMethod::Household => self.household.is_some(),
            ShockMethod::Kwh => self.kwh.is_some(),
            ShockMethod::Luminosity => self.luminosity.is_some(),
        }
    }

    /// Runs one parameterization pipeline end to end.
    pub fn build_shock(&self, method: ShockMethod) -> Result<DemandShock, IngestError> {
        match method {
            ShockMethod::Household => {
                let params = self
                    .household
                    .as_ref()
                    .ok_or(IngestError::MethodUnavailable { method })?;
                let hours = match (params.total_consumer_hours, &params.series_path) {
                    (Some(total), _) => total,
                    (None, Some(path)) => {
                        let mut series = load_outage_series(path)?;
                        let (mut start, mut end) = series.window();
                        if let Some(s) = params.window_start {
                            start = s;
                        }
                        if let Some(e) = params.window_end {
                            end = e;
                        }
                        series = series.with_window((start, end))?;
                        shock::integrate_consumer_hours_with(&series, params.integration)
                    }
                    (None, None) => unreachable!("validated at load"),
                };
                let rate = shock::derive_value_per_consumer_hour(&self.constants)?;
                Ok(shock::household_shock(
                    hours,
                    rate,
                    self.target(),
                    self.event_id.clone(),
                ))
            }
            ShockMethod::Kwh => {
                let params = self
                    .kwh
                    .as_ref()
                    .ok_or(IngestError::MethodUnavailable { method })?;
                Ok(shock::kwh_shock(
                    params.kwh_lost,
                    &self.constants,
                    self.target(),
                    self.event_id.clone(),
                )?)
            }
            ShockMethod::Luminosity => {
                let params = self
                    .luminosity
                    .as_ref()
                    .ok_or(IngestError::MethodUnavailable { method })?;
                let baseline = raster::load_grid(&params.baseline_grid)?;
                let event = raster::load_grid(&params.event_grid)?;
                let aoi = if let Some([min_lon, min_lat, max_lon, max_lat]) = params.aoi {
                    AreaOfInterest::rect(min_lon, min_lat, max_lon, max_lat)
                } else if let Some(mask_path) = &params.aoi_mask {
                    AreaOfInterest::Mask(raster::load_grid(mask_path)?)
                } else {
                    AreaOfInterest::full_extent(&baseline)
                };
                let pct = raster::percent_loss(&baseline, &event, &aoi)?;
                Ok(shock::luminosity_shock(
                    pct,
                    self.constants.final_utilities_demand,
                    params.duration_scaling,
                    self.target(),
                    self.event_id.clone(),
                ))
            }
        }
    }
}
