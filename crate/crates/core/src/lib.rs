//! Static input-output analysis of power-outage demand shocks.
//!
//! The library turns raw outage evidence (customer-outage time series, kWh of
//! generation lost, nighttime-radiance rasters) into monetary final-demand
//! shocks on a utilities sector, propagates those shocks through a
//! multi-regional input-output table with three static models (Leontief +
//! Ghosh, critical input, inoperability), and reports how sensitive the loss
//! estimates are to the choice of model and parameterization.
//!
//! Modules map onto the pipeline stages:
//!
//! * [`mrio`] — the economy table and its linear algebra (Leontief inverse,
//!   Ghosh allocations, inoperability system, productiveness checks).
//! * [`shock`] — converting physical evidence into monetary demand shocks.
//! * [`raster`] — nighttime-luminosity grid processing for the satellite
//!   parameterization.
//! * [`models`] — the three impact models and regional loss attribution.
//! * [`ingest`] — bundle, scenario, and time-series loaders.
//! * [`report`] — the model-by-parameterization sensitivity grid, summary
//!   statistics, and CSV/SVG emission.

pub mod ingest;
pub mod models;
pub mod mrio;
pub mod raster;
pub mod report;
pub mod shock;

pub use ingest::{load_mrio_bundle, load_outage_series, load_scenario, ScenarioConfig};
pub use models::{ImpactEngine, ImpactModel, ImpactResult, RegionPartition};
pub use mrio::MrioTable;
pub use raster::{AreaOfInterest, LuminosityGrid};
pub use report::{SensitivityGrid, StatScope, SummaryStats};
pub use shock::{DemandShock, SectorRef, ShockConstants, ShockMethod};
