//! The model-by-parameterization sensitivity grid and its reports.
//!
//! A grid runs every available parameterization through all three models
//! against one table. Cells fail independently: a bad raster or an
//! over-sized shock marks its cell and leaves the rest of the grid intact.
//! Downstream come the summary statistics that make the sensitivity
//! argument, the per-model dispersion across parameterizations, comparisons
//! against external loss estimates, and CSV/SVG emission.
//!
//! Two scope conventions coexist deliberately. Domestic summaries are taken
//! over direct + domestic indirect totals, while global summaries are taken
//! over global indirect losses alone; only that pairing reproduces the
//! published summary tables this grid mirrors. Both scopes are computable
//! for either table, and the emitted stats.csv carries all four so nothing
//! is silently chosen.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ScenarioConfig, ValidationEstimate};
use crate::models::{ImpactEngine, ImpactModel, ModelError, RankedSector};
use crate::mrio::MrioTable;
use crate::shock::ShockMethod;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("need at least {needed} populated cells, got {got}")]
    InsufficientCells { needed: usize, got: usize },
    #[error("cannot write {path}: {source}")]
    IoFailure {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One populated grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellValues {
    pub direct: f64,
    pub domestic_indirect: f64,
    pub global_indirect: f64,
    /// Descending by indirect loss; empty when the cell was reconstructed
    /// from a CSV rather than a model run.
    pub rankings: Vec<RankedSector>,
}

#[derive(Debug, Clone)]
pub enum CellState {
    Available(CellValues),
    /// The scenario lacks this parameterization's inputs.
    Unavailable { reason: String },
    /// The model run errored; the rest of the grid is unaffected.
    Failed { error: String },
}

impl CellState {
    pub fn values(&self) -> Option<&CellValues> {
        match self {
            CellState::Available(v) => Some(v),
            _ => None,
        }
    }
}

/// The 3x3 (parameterization x model) result grid for one event.
#[derive(Debug, Clone)]
pub struct SensitivityGrid {
    pub event_id: String,
    pub currency: String,
    cells: Vec<CellState>,
}

impl SensitivityGrid {
    pub const METHODS: [ShockMethod; 3] = ShockMethod::ALL;
    pub const MODELS: [ImpactModel; 3] = ImpactModel::ALL;

    fn cell_index(method: ShockMethod, model: ImpactModel) -> usize {
        let mi = Self::METHODS.iter().position(|&m| m == method).unwrap();
        let mj = Self::MODELS.iter().position(|&m| m == model).unwrap();
        mi * Self::MODELS.len() + mj
    }

    /// Builds a grid from explicit cell values (e.g. transcribed published
    /// results or a re-parsed CSV); combinations not supplied are marked
    /// unavailable.
    pub fn from_cells(
        event_id: impl Into<String>,
        currency: impl Into<String>,
        cells: impl IntoIterator<Item = (ShockMethod, ImpactModel, CellValues)>,
    ) -> Self {
        let mut grid = SensitivityGrid {
            event_id: event_id.into(),
            currency: currency.into(),
            cells: (0..9)
                .map(|_| CellState::Unavailable {
                    reason: "not supplied".to_string(),
                })
                .collect(),
        };
        for (method, model, values) in cells {
            grid.cells[Self::cell_index(method, model)] = CellState::Available(values);
        }
        grid
    }

    pub fn cell(&self, method: ShockMethod, model: ImpactModel) -> &CellState {
        &self.cells[Self::cell_index(method, model)]
    }

    /// Populated cells in fixed method-major order.
    pub fn available(&self) -> impl Iterator<Item = (ShockMethod, ImpactModel, &CellValues)> {
        Self::METHODS.iter().flat_map(move |&method| {
            Self::MODELS.iter().filter_map(move |&model| {
                self.cell(method, model)
                    .values()
                    .map(|v| (method, model, v))
            })
        })
    }

    pub fn available_count(&self) -> usize {
        self.available().count()
    }

    /// Cells for one model across the parameterizations, in method order.
    pub fn model_column(&self, model: ImpactModel) -> Vec<(ShockMethod, &CellValues)> {
        Self::METHODS
            .iter()
            .filter_map(|&method| self.cell(method, model).values().map(|v| (method, v)))
            .collect()
    }
}

/// Runs every available parameterization through all three models.
///
/// Shocks are derived once per parameterization; the nine model runs then
/// execute in parallel against the shared table. Results land in fixed cell
/// positions, so output is deterministic regardless of scheduling.
pub fn run_grid(
    table: &MrioTable,
    scenario: &ScenarioConfig,
) -> Result<SensitivityGrid, ReportError> {
    let engine = ImpactEngine::new(table)?;
    let shocks: Vec<(ShockMethod, Result<crate::shock::DemandShock, String>)> =
        SensitivityGrid::METHODS
            .iter()
            .map(|&method| {
                if !scenario.has_method(method) {
                    return (method, Err(format!("scenario has no `{method}` block")));
                }
                match scenario.build_shock(method) {
                    Ok(shock) => (method, Ok(shock)),
                    Err(e) => (method, Err(e.to_string())),
                }
            })
            .collect();

    let tasks: Vec<(usize, ShockMethod, ImpactModel)> = SensitivityGrid::METHODS
        .iter()
        .flat_map(|&method| {
            SensitivityGrid::MODELS
                .iter()
                .map(move |&model| (SensitivityGrid::cell_index(method, model), method, model))
        })
        .collect();

    let mut cells: Vec<(usize, CellState)> = tasks
        .par_iter()
        .map(|&(idx, method, model)| {
            let shock_result = &shocks
                .iter()
                .find(|(m, _)| *m == method)
                .expect("every method has an entry")
                .1;
            let state = match shock_result {
                Err(reason) if !scenario.has_method(method) => CellState::Unavailable {
                    reason: reason.clone(),
                },
                Err(reason) => CellState::Failed {
                    error: reason.clone(),
                },
                Ok(shock) => match engine.run(model, shock) {
                    Ok(result) => CellState::Available(CellValues {
                        direct: result.direct,
                        domestic_indirect: result.domestic_indirect,
                        global_indirect: result.global_indirect,
                        rankings: result.sector_rankings,
                    }),
                    Err(e) => CellState::Failed {
                        error: e.to_string(),
                    },
                },
            };
            (idx, state)
        })
        .collect();
    cells.sort_by_key(|(idx, _)| *idx);

    Ok(SensitivityGrid {
        event_id: scenario.event_id.clone(),
        currency: table.currency_scale().to_string(),
        cells: cells.into_iter().map(|(_, state)| state).collect(),
    })
}

/// Which per-cell value a summary aggregates.
///
/// The published convention pairs `DomesticTotal` (direct + domestic
/// indirect) with `GlobalIndirect`; the other two scopes exist so reports
/// can print both readings side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatScope {
    DomesticTotal,
    DomesticIndirect,
    GlobalTotal,
    GlobalIndirect,
}

impl StatScope {
    pub const ALL: [StatScope; 4] = [
        StatScope::DomesticTotal,
        StatScope::DomesticIndirect,
        StatScope::GlobalTotal,
        StatScope::GlobalIndirect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatScope::DomesticTotal => "domestic_total",
            StatScope::DomesticIndirect => "domestic_indirect",
            StatScope::GlobalTotal => "global_total",
            StatScope::GlobalIndirect => "global_indirect",
        }
    }

    fn value(self, cell: &CellValues) -> f64 {
        match self {
            StatScope::DomesticTotal => cell.direct + cell.domestic_indirect,
            StatScope::DomesticIndirect => cell.domestic_indirect,
            StatScope::GlobalTotal => cell.direct + cell.global_indirect,
            StatScope::GlobalIndirect => cell.global_indirect,
        }
    }
}

/// Descriptive statistics over the grid's populated cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub scope: StatScope,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sample_std: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn summary_stats(
    grid: &SensitivityGrid,
    scope: StatScope,
) -> Result<SummaryStats, ReportError> {
    let values: Vec<f64> = grid
        .available()
        .map(|(_, _, cell)| scope.value(cell))
        .collect();
    if values.len() < 2 {
        return Err(ReportError::InsufficientCells {
            needed: 2,
            got: values.len(),
        });
    }
    let (mean, sample_std) = mean_and_sample_std(&values);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SummaryStats {
        scope,
        mean,
        sample_std,
        min,
        max,
        n: values.len(),
    })
}

fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// One model's spread across parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub model: ImpactModel,
    /// Sample std of global indirect losses across the parameterizations.
    pub std_across_methods: f64,
    /// Std over the mean of (global indirect + direct), as a fraction.
    pub pct_of_mean: f64,
    pub n: usize,
}

/// Holding the model constant, how much the parameterization choice alone
/// moves the estimate.
pub fn parameterization_dispersion(
    grid: &SensitivityGrid,
) -> Result<Vec<DispersionRow>, ReportError> {
    let mut rows = Vec::new();
    for model in SensitivityGrid::MODELS {
        let cells = grid.model_column(model);
        if cells.len() < 2 {
            return Err(ReportError::InsufficientCells {
                needed: 2,
                got: cells.len(),
            });
        }
        let globals: Vec<f64> = cells.iter().map(|(_, c)| c.global_indirect).collect();
        let totals: Vec<f64> = cells
            .iter()
            .map(|(_, c)| c.global_indirect + c.direct)
            .collect();
        let (_, std) = mean_and_sample_std(&globals);
        let mean_basis = totals.iter().sum::<f64>() / totals.len() as f64;
        rows.push(DispersionRow {
            model,
            std_across_methods: std,
            pct_of_mean: if mean_basis != 0.0 { std / mean_basis } else { 0.0 },
            n: cells.len(),
        });
    }
    Ok(rows)
}

/// One grid cell against one external estimate.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub method: ShockMethod,
    pub model: ImpactModel,
    pub estimate_label: String,
    pub estimate_amount: f64,
    /// Domestic indirect loss for the cell, if populated.
    pub cell_amount: Option<f64>,
    /// cell / estimate.
    pub ratio: Option<f64>,
    /// Signed percent difference, (cell - estimate) / estimate * 100.
    pub pct_difference: Option<f64>,
}

/// Pairs every cell's domestic indirect loss with every external estimate.
pub fn compare_validation(
    grid: &SensitivityGrid,
    estimates: &[ValidationEstimate],
) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for estimate in estimates {
        for method in SensitivityGrid::METHODS {
            for model in SensitivityGrid::MODELS {
                let cell_amount = grid
                    .cell(method, model)
                    .values()
                    .map(|c| c.domestic_indirect);
                let ratio = cell_amount.map(|a| a / estimate.amount);
                rows.push(ComparisonRow {
                    method,
                    model,
                    estimate_label: estimate.label.clone(),
                    estimate_amount: estimate.amount,
                    cell_amount,
                    ratio,
                    pct_difference: ratio.map(|r| (r - 1.0) * 100.0),
                });
            }
        }
    }
    rows
}

/// Which artifacts `emit_report` writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportFormats {
    pub csv: bool,
    pub svg: bool,
}

impl Default for ReportFormats {
    fn default() -> Self {
        ReportFormats {
            csv: true,
            svg: true,
        }
    }
}

impl ReportFormats {
    /// Parses a comma-separated list like "csv,svg".
    pub fn parse(s: &str) -> Option<Self> {
        let mut formats = ReportFormats {
            csv: false,
            svg: false,
        };
        for token in s.split(',') {
            match token.trim() {
                "csv" => formats.csv = true,
                "svg" => formats.svg = true,
                "" => {}
                _ => return None,
            }
        }
        Some(formats)
    }
}

/// Writes the report files and returns their paths.
///
/// CSV layouts (fixed headers, shortest round-trip decimals, currency in the
/// explicit `unit` column):
///
/// * `grid.csv` — `model,method,direct,domestic_indirect,global_indirect,unit`
/// * `stats.csv` — `scope,mean,sample_std,min,max,n,unit`
/// * `dispersion.csv` — `model,std_across_methods,pct_of_mean,n,unit`
/// * `rankings.csv` — `method,model,rank,region,sector,indirect_loss,share_of_output,unit`
/// * `comparison.svg` — internal-vs-external bar chart, only with `svg` and
///   a non-empty estimate list.
pub fn emit_report(
    grid: &SensitivityGrid,
    estimates: &[ValidationEstimate],
    top_n: usize,
    out_dir: impl AsRef<Path>,
    formats: ReportFormats,
) -> Result<Vec<PathBuf>, ReportError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|source| io_failure(out_dir, source))?;
    let mut written = Vec::new();

    if formats.csv {
        let mut grid_csv =
            String::from("model,method,direct,domestic_indirect,global_indirect,unit\n");
        for method in SensitivityGrid::METHODS {
            for model in SensitivityGrid::MODELS {
                if let Some(cell) = grid.cell(method, model).values() {
                    grid_csv.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        model,
                        method,
                        cell.direct,
                        cell.domestic_indirect,
                        cell.global_indirect,
                        grid.currency
                    ));
                }
            }
        }
        written.push(write_file(out_dir.join("grid.csv"), grid_csv)?);

        let mut stats_csv = String::from("scope,mean,sample_std,min,max,n,unit\n");
        for scope in StatScope::ALL {
            if let Ok(stats) = summary_stats(grid, scope) {
                stats_csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    scope.as_str(),
                    stats.mean,
                    stats.sample_std,
                    stats.min,
                    stats.max,
                    stats.n,
                    grid.currency
                ));
            }
        }
        written.push(write_file(out_dir.join("stats.csv"), stats_csv)?);

        let mut dispersion_csv = String::from("model,std_across_methods,pct_of_mean,n,unit\n");
        if let Ok(rows) = parameterization_dispersion(grid) {
            for row in rows {
                dispersion_csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.model, row.std_across_methods, row.pct_of_mean, row.n, grid.currency
                ));
            }
        }
        written.push(write_file(out_dir.join("dispersion.csv"), dispersion_csv)?);

        let mut rankings_csv =
            String::from("method,model,rank,region,sector,indirect_loss,share_of_output,unit\n");
        for method in SensitivityGrid::METHODS {
            for model in SensitivityGrid::MODELS {
                if let Some(cell) = grid.cell(method, model).values() {
                    for (rank, sector) in cell.rankings.iter().take(top_n).enumerate() {
                        rankings_csv.push_str(&format!(
                            "{},{},{},{},{},{},{},{}\n",
                            method,
                            model,
                            rank + 1,
                            sector.region,
                            sector.sector,
                            sector.indirect_loss,
                            sector.share_of_output,
                            grid.currency
                        ));
                    }
                }
            }
        }
        written.push(write_file(out_dir.join("rankings.csv"), rankings_csv)?);
    }

    if formats.svg && !estimates.is_empty() {
        let svg = render_comparison_svg(grid, estimates);
        written.push(write_file(out_dir.join("comparison.svg"), svg)?);
    }

    Ok(written)
}

fn io_failure(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: PathBuf, contents: String) -> Result<PathBuf, ReportError> {
    fs::write(&path, contents).map_err(|source| io_failure(&path, source))?;
    Ok(path)
}

/// Re-parses a `grid.csv` emitted by [`emit_report`]. Rankings are not part
/// of the CSV, so reconstructed cells carry empty ranking lists.
pub fn parse_grid_csv(path: impl AsRef<Path>) -> Result<SensitivityGrid, ReportError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| io_failure(path, source))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "model,method,direct,domestic_indirect,global_indirect,unit" {
        return Err(ReportError::Malformed {
            path: path.display().to_string(),
            detail: format!("unexpected header {header:?}"),
        });
    }
    let mut cells = Vec::new();
    let mut currency = String::from("USD");
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(ReportError::Malformed {
                path: path.display().to_string(),
                detail: format!("row {row}: expected 6 fields, got {}", fields.len()),
            });
        }
        let model = ImpactModel::parse(fields[0]).ok_or_else(|| ReportError::Malformed {
            path: path.display().to_string(),
            detail: format!("row {row}: unknown model {:?}", fields[0]),
        })?;
        let method = ShockMethod::parse(fields[1]).ok_or_else(|| ReportError::Malformed {
            path: path.display().to_string(),
            detail: format!("row {row}: unknown method {:?}", fields[1]),
        })?;
        let parse = |field: &str, name: &str| -> Result<f64, ReportError> {
            field.parse().map_err(|_| ReportError::Malformed {
                path: path.display().to_string(),
                detail: format!("row {row}: non-numeric {name} {field:?}"),
            })
        };
        let values = CellValues {
            direct: parse(fields[2], "direct")?,
            domestic_indirect: parse(fields[3], "domestic_indirect")?,
            global_indirect: parse(fields[4], "global_indirect")?,
            rankings: Vec::new(),
        };
        currency = fields[5].to_string();
        cells.push((method, model, values));
    }
    Ok(SensitivityGrid::from_cells("", currency, cells))
}

const SVG_WIDTH: f64 = 1000.0;
const SVG_MARGIN_LEFT: f64 = 280.0;
const SVG_MARGIN_RIGHT: f64 = 20.0;
const SVG_BAR_HEIGHT: f64 = 16.0;
const SVG_BAR_GAP: f64 = 6.0;
const SVG_HEADER: f64 = 40.0;

/// Horizontal bar chart pairing each populated cell's domestic indirect
/// loss with the external estimates. Bar lengths are linear in value.
pub fn render_comparison_svg(grid: &SensitivityGrid, estimates: &[ValidationEstimate]) -> String {
    let mut bars: Vec<(String, f64, &'static str)> = Vec::new();
    for method in SensitivityGrid::METHODS {
        for model in SensitivityGrid::MODELS {
            if let Some(cell) = grid.cell(method, model).values() {
                bars.push((
                    format!("{method} / {model}"),
                    cell.domestic_indirect,
                    "#4472c4",
                ));
            }
        }
    }
    for estimate in estimates {
        bars.push((estimate.label.clone(), estimate.amount, "#ed7d31"));
    }
    let max_value = bars.iter().map(|(_, v, _)| *v).fold(0.0f64, f64::max);
    let plot_width = SVG_WIDTH - SVG_MARGIN_LEFT - SVG_MARGIN_RIGHT;
    let scale = if max_value > 0.0 {
        plot_width / max_value
    } else {
        0.0
    };
    let height = SVG_HEADER + bars.len() as f64 * (SVG_BAR_HEIGHT + SVG_BAR_GAP) + 10.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{SVG_WIDTH}\" height=\"{height}\" viewBox=\"0 0 {SVG_WIDTH} {height}\">\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">Domestic indirect losses vs external estimates ({}){}</text>\n",
        xml_escape(&grid.currency),
        if grid.event_id.is_empty() {
            String::new()
        } else {
            format!(" | {}", xml_escape(&grid.event_id))
        }
    ));
    for (i, (label, value, color)) in bars.iter().enumerate() {
        let y = SVG_HEADER + i as f64 * (SVG_BAR_HEIGHT + SVG_BAR_GAP);
        let width = value * scale;
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            SVG_MARGIN_LEFT - 6.0,
            y + SVG_BAR_HEIGHT - 4.0,
            xml_escape(label)
        ));
        svg.push_str(&format!(
            "  <rect x=\"{SVG_MARGIN_LEFT}\" y=\"{y}\" width=\"{width}\" height=\"{SVG_BAR_HEIGHT}\" fill=\"{color}\" data-value=\"{value}\"/>\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
            SVG_MARGIN_LEFT + width + 4.0,
            y + SVG_BAR_HEIGHT - 4.0,
            value
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
