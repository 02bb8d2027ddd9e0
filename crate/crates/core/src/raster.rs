//! Nighttime-luminosity grid processing for the satellite parameterization.
//!
//! Grids are georeferenced radiance rasters in ESRI ASCII format (post
//! day/night correction; acquisition and correction happen upstream in GIS
//! tooling). The pipeline here is mask/clip, optional max-normalization for
//! export, baseline-vs-event differencing with gains clamped to zero loss,
//! and aggregation of the loss fraction over an area of interest.
//!
//! Grids are immutable after load and all operations are pure; sums run in a
//! fixed cell order so results are deterministic.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default NODATA sentinel when a header omits `NODATA_value`.
pub const DEFAULT_NODATA: f64 = -9999.0;

/// Tolerance for georeference congruence (origin, cellsize) in degrees.
const GEOREF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed header: {reason}")]
    MalformedHeader { reason: String },
    #[error("row {row} has {got} values, expected {expected}")]
    RowLengthMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected} data rows, got {got}")]
    RowCountMismatch { expected: usize, got: usize },
    #[error("non-numeric cell at row {row}, column {col}: {token:?}")]
    NonNumericCell {
        row: usize,
        col: usize,
        token: String,
    },
    #[error("grid dimensions or georeference do not match: {reason}")]
    GridMismatch { reason: String },
    #[error("area of interest does not intersect the grid")]
    EmptyIntersection,
    #[error("grid has no valid cells")]
    NoValidCells,
    #[error("baseline radiance sums to zero over the area of interest")]
    ZeroBaseline,
}

/// A lat/lon bounding rectangle, degrees, corners ordered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Self {
        assert!(
            min_lon <= max_lon && min_lat <= max_lat,
            "bounding box corners must be ordered"
        );
        BoundingBox {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        }
    }

    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        lon >= self.min_lon && lon <= self.max_lon && lat >= self.min_lat && lat <= self.max_lat
    }
}

/// The window over which luminosity loss is aggregated: either a bounding
/// rectangle or a mask grid congruent with the subject grid (cells valid and
/// nonzero in the mask participate).
#[derive(Debug, Clone)]
pub enum AreaOfInterest {
    Rect(BoundingBox),
    Mask(LuminosityGrid),
}

impl AreaOfInterest {
    pub fn rect(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Self {
        AreaOfInterest::Rect(BoundingBox::new(min_lon, min_lat, max_lon, max_lat))
    }

    /// A rectangle covering the whole grid.
    pub fn full_extent(grid: &LuminosityGrid) -> Self {
        AreaOfInterest::Rect(BoundingBox::new(
            grid.x_origin,
            grid.y_origin,
            grid.x_origin + grid.ncols as f64 * grid.cellsize,
            grid.y_origin + grid.nrows as f64 * grid.cellsize,
        ))
    }
}

/// How baseline-minus-event differences treat cells that brightened.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    /// Gains are not losses: negative differences clamp to zero, so
    /// unrelated brightening cannot mask the outage signal.
    #[default]
    ClampGains,
    /// Signed netting, for sensitivity runs.
    Net,
}

/// A georeferenced radiance raster with NODATA semantics.
///
/// Cells are stored row-major with the first row northernmost, matching the
/// file layout; `x_origin`/`y_origin` are the lower-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct LuminosityGrid {
    ncols: usize,
    nrows: usize,
    x_origin: f64,
    y_origin: f64,
    cellsize: f64,
    nodata_value: f64,
    cells: Vec<f64>,
    clamped_negative: usize,
}

impl LuminosityGrid {
    pub fn from_values(
        ncols: usize,
        nrows: usize,
        x_origin: f64,
        y_origin: f64,
        cellsize: f64,
        nodata_value: f64,
        cells: Vec<f64>,
    ) -> Result<Self, RasterError> {
        if cellsize <= 0.0 {
            return Err(RasterError::MalformedHeader {
                reason: format!("cellsize must be positive, got {cellsize}"),
            });
        }
        if cells.len() != ncols * nrows {
            return Err(RasterError::RowCountMismatch {
                expected: ncols * nrows,
                got: cells.len(),
            });
        }
        Ok(LuminosityGrid {
            ncols,
            nrows,
            x_origin,
            y_origin,
            cellsize,
            nodata_value,
            cells,
            clamped_negative: 0,
        })
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn cellsize(&self) -> f64 {
        self.cellsize
    }

    pub fn nodata_value(&self) -> f64 {
        self.nodata_value
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.x_origin, self.y_origin)
    }

    /// Negative radiances clamped to zero at load time.
    pub fn clamped_negative(&self) -> usize {
        self.clamped_negative
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.ncols + col]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.value(row, col) != self.nodata_value
    }

    pub fn valid_count(&self) -> usize {
        self.cells.iter().filter(|&&v| v != self.nodata_value).count()
    }

    /// Geographic center of a cell; row 0 is the northernmost.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let lon = self.x_origin + (col as f64 + 0.5) * self.cellsize;
        let lat =
            self.y_origin + (self.nrows - 1 - row) as f64 * self.cellsize + 0.5 * self.cellsize;
        (lon, lat)
    }

    /// Renders back to ESRI ASCII (shortest round-trip number formatting).
    pub fn to_ascii_grid(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("ncols {}\n", self.ncols));
        out.push_str(&format!("nrows {}\n", self.nrows));
        out.push_str(&format!("xllcorner {}\n", self.x_origin));
        out.push_str(&format!("yllcorner {}\n", self.y_origin));
        out.push_str(&format!("cellsize {}\n", self.cellsize));
        out.push_str(&format!("NODATA_value {}\n", self.nodata_value));
        for row in 0..self.nrows {
            let line: Vec<String> = (0..self.ncols)
                .map(|col| format!("{}", self.value(row, col)))
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    fn congruent(&self, other: &LuminosityGrid) -> Result<(), RasterError> {
        if self.ncols != other.ncols || self.nrows != other.nrows {
            return Err(RasterError::GridMismatch {
                reason: format!(
                    "{}x{} vs {}x{}",
                    self.nrows, self.ncols, other.nrows, other.ncols
                ),
            });
        }
        for (label, a, b) in [
            ("xllcorner", self.x_origin, other.x_origin),
            ("yllcorner", self.y_origin, other.y_origin),
            ("cellsize", self.cellsize, other.cellsize),
        ] {
            if (a - b).abs() > GEOREF_TOLERANCE {
                return Err(RasterError::GridMismatch {
                    reason: format!("{label} {a} vs {b}"),
                });
            }
        }
        Ok(())
    }

    /// Whether a cell participates in the AOI (by cell-center containment
    /// for rectangles, by mask validity for mask grids).
    fn in_aoi(&self, row: usize, col: usize, aoi: &AreaOfInterest) -> Result<bool, RasterError> {
        match aoi {
            AreaOfInterest::Rect(rect) => {
                let (lon, lat) = self.cell_center(row, col);
                Ok(rect.contains(lon, lat))
            }
            AreaOfInterest::Mask(mask) => {
                self.congruent(mask)?;
                Ok(mask.is_valid(row, col) && mask.value(row, col) != 0.0)
            }
        }
    }
}

/// Parses an ESRI ASCII grid file.
///
/// Header keys: `ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize`,
/// `NODATA_value` (matched case-insensitively; `NODATA_value` defaults to
/// -9999 when omitted), followed by `nrows` rows of `ncols` values. Negative
/// radiances are clamped to zero and counted.
pub fn load_grid(path: impl AsRef<Path>) -> Result<LuminosityGrid, RasterError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| RasterError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_grid(&text)
}

pub fn parse_grid(text: &str) -> Result<LuminosityGrid, RasterError> {
    let mut lines = text.lines().peekable();

    let mut ncols: Option<usize> = None;
    let mut nrows: Option<usize> = None;
    let mut xllcorner: Option<f64> = None;
    let mut yllcorner: Option<f64> = None;
    let mut cellsize: Option<f64> = None;
    let mut nodata: Option<f64> = None;

    // Header: leading `key value` lines until the first line that does not
    // start with a known key.
    while let Some(line) = lines.peek() {
        let mut parts = line.split_whitespace();
        let key = match parts.next() {
            Some(k) => k.to_ascii_lowercase(),
            None => {
                lines.next();
                continue;
            }
        };
        let is_header = matches!(
            key.as_str(),
            "ncols" | "nrows" | "xllcorner" | "yllcorner" | "cellsize" | "nodata_value"
        );
        if !is_header {
            break;
        }
        let value = parts.next().ok_or_else(|| RasterError::MalformedHeader {
            reason: format!("header key `{key}` has no value"),
        })?;
        if parts.next().is_some() {
            return Err(RasterError::MalformedHeader {
                reason: format!("header key `{key}` has trailing tokens"),
            });
        }
        match key.as_str() {
            "ncols" | "nrows" => {
                let parsed: usize = value.parse().map_err(|_| RasterError::MalformedHeader {
                    reason: format!("`{key}` must be a positive integer, got {value:?}"),
                })?;
                if key == "ncols" {
                    ncols = Some(parsed);
                } else {
                    nrows = Some(parsed);
                }
            }
            _ => {
                let parsed: f64 = value.parse().map_err(|_| RasterError::MalformedHeader {
                    reason: format!("`{key}` must be numeric, got {value:?}"),
                })?;
                match key.as_str() {
                    "xllcorner" => xllcorner = Some(parsed),
                    "yllcorner" => yllcorner = Some(parsed),
                    "cellsize" => cellsize = Some(parsed),
                    _ => nodata = Some(parsed),
                }
            }
        }
        lines.next();
    }

    let missing = |name: &str| RasterError::MalformedHeader {
        reason: format!("missing header key `{name}`"),
    };
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let x_origin = xllcorner.ok_or_else(|| missing("xllcorner"))?;
    let y_origin = yllcorner.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let nodata_value = nodata.unwrap_or(DEFAULT_NODATA);
    if cellsize <= 0.0 {
        return Err(RasterError::MalformedHeader {
            reason: format!("cellsize must be positive, got {cellsize}"),
        });
    }

    let mut cells = Vec::with_capacity(ncols * nrows);
    let mut clamped = 0usize;
    let mut row = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        if row >= nrows {
            return Err(RasterError::RowCountMismatch {
                expected: nrows,
                got: row + 1,
            });
        }
        let mut col = 0usize;
        for token in line.split_whitespace() {
            if col >= ncols {
                return Err(RasterError::RowLengthMismatch {
                    row,
                    expected: ncols,
                    got: col + 1,
                });
            }
            let value: f64 = token.parse().map_err(|_| RasterError::NonNumericCell {
                row,
                col,
                token: token.to_string(),
            })?;
            let value = if value == nodata_value {
                value
            } else if value < 0.0 {
                clamped += 1;
                0.0
            } else {
                value
            };
            cells.push(value);
            col += 1;
        }
        if col != ncols {
            return Err(RasterError::RowLengthMismatch {
                row,
                expected: ncols,
                got: col,
            });
        }
        row += 1;
    }
    if row != nrows {
        return Err(RasterError::RowCountMismatch {
            expected: nrows,
            got: row,
        });
    }

    let mut grid = LuminosityGrid::from_values(
        ncols,
        nrows,
        x_origin,
        y_origin,
        cellsize,
        nodata_value,
        cells,
    )?;
    grid.clamped_negative = clamped;
    Ok(grid)
}

/// Extracts the sub-grid of cells whose centers fall inside the AOI.
///
/// The result covers the bounding box of selected cells; cells inside the
/// box but outside the AOI (possible with mask AOIs) become NODATA. NODATA
/// cells are preserved.
pub fn clip(grid: &LuminosityGrid, aoi: &AreaOfInterest) -> Result<LuminosityGrid, RasterError> {
    let mut selected = vec![false; grid.ncols * grid.nrows];
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (usize::MAX, 0usize, usize::MAX, 0usize);
    let mut any = false;
    for row in 0..grid.nrows {
        for col in 0..grid.ncols {
            if grid.in_aoi(row, col, aoi)? {
                selected[row * grid.ncols + col] = true;
                any = true;
                rmin = rmin.min(row);
                rmax = rmax.max(row);
                cmin = cmin.min(col);
                cmax = cmax.max(col);
            }
        }
    }
    if !any {
        return Err(RasterError::EmptyIntersection);
    }
    let ncols = cmax - cmin + 1;
    let nrows = rmax - rmin + 1;
    let mut cells = Vec::with_capacity(ncols * nrows);
    for row in rmin..=rmax {
        for col in cmin..=cmax {
            if selected[row * grid.ncols + col] {
                cells.push(grid.value(row, col));
            } else {
                cells.push(grid.nodata_value);
            }
        }
    }
    let mut out = LuminosityGrid::from_values(
        ncols,
        nrows,
        grid.x_origin + cmin as f64 * grid.cellsize,
        grid.y_origin + (grid.nrows - 1 - rmax) as f64 * grid.cellsize,
        grid.cellsize,
        grid.nodata_value,
        cells,
    )?;
    out.clamped_negative = grid.clamped_negative;
    Ok(out)
}

/// Rescales valid cells so the maximum is one; an all-zero grid stays zero.
pub fn normalize(grid: &LuminosityGrid) -> Result<LuminosityGrid, RasterError> {
    let max = grid
        .cells
        .iter()
        .filter(|&&v| v != grid.nodata_value)
        .fold(None::<f64>, |acc, &v| Some(acc.map_or(v, |m| m.max(v))));
    let max = max.ok_or(RasterError::NoValidCells)?;
    let mut out = grid.clone();
    if max == 0.0 {
        return Ok(out);
    }
    for v in &mut out.cells {
        if *v != grid.nodata_value {
            *v /= max;
        }
    }
    Ok(out)
}

/// Cell-wise luminosity lost: `max(baseline - event, 0)` by default, with
/// NODATA in either input propagating to the output.
pub fn difference(
    baseline: &LuminosityGrid,
    event: &LuminosityGrid,
) -> Result<LuminosityGrid, RasterError> {
    difference_with(baseline, event, DiffMode::ClampGains)
}

pub fn difference_with(
    baseline: &LuminosityGrid,
    event: &LuminosityGrid,
    mode: DiffMode,
) -> Result<LuminosityGrid, RasterError> {
    baseline.congruent(event)?;
    let mut cells = Vec::with_capacity(baseline.cells.len());
    for i in 0..baseline.cells.len() {
        let b = baseline.cells[i];
        let e = event.cells[i];
        if b == baseline.nodata_value || e == event.nodata_value {
            cells.push(baseline.nodata_value);
        } else {
            let d = b - e;
            cells.push(match mode {
                DiffMode::ClampGains => d.max(0.0),
                DiffMode::Net => d,
            });
        }
    }
    LuminosityGrid::from_values(
        baseline.ncols,
        baseline.nrows,
        baseline.x_origin,
        baseline.y_origin,
        baseline.cellsize,
        baseline.nodata_value,
        cells,
    )
}

/// Fraction of baseline luminosity lost over the AOI.
///
/// Only cells valid in both grids contribute to either sum, keeping the
/// numerator and denominator comparable; with gains clamped the result is
/// always in [0, 1].
pub fn percent_loss(
    baseline: &LuminosityGrid,
    event: &LuminosityGrid,
    aoi: &AreaOfInterest,
) -> Result<f64, RasterError> {
    percent_loss_with(baseline, event, aoi, DiffMode::ClampGains)
}

pub fn percent_loss_with(
    baseline: &LuminosityGrid,
    event: &LuminosityGrid,
    aoi: &AreaOfInterest,
    mode: DiffMode,
) -> Result<f64, RasterError> {
    baseline.congruent(event)?;
    let mut lost = 0.0;
    let mut base = 0.0;
    let mut intersects = false;
    for row in 0..baseline.nrows {
        for col in 0..baseline.ncols {
            if !baseline.in_aoi(row, col, aoi)? {
                continue;
            }
            intersects = true;
            if !baseline.is_valid(row, col) || !event.is_valid(row, col) {
                continue;
            }
            let b = baseline.value(row, col);
            let e = event.value(row, col);
            let d = b - e;
            lost += match mode {
                DiffMode::ClampGains => d.max(0.0),
                DiffMode::Net => d,
            };
            base += b;
        }
    }
    if !intersects {
        return Err(RasterError::EmptyIntersection);
    }
    if base <= 0.0 {
        return Err(RasterError::ZeroBaseline);
    }
    Ok(lost / base)
}
