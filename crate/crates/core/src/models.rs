//! The three static impact models, run against one table and one shock.
//!
//! Every run decomposes the loss into a direct component (the shock itself,
//! counted exactly once), an upstream indirect component (suppliers of the
//! shocked sector, via the Leontief inverse), and a downstream indirect
//! component (its customers, via the Ghosh inverse). Regional attribution
//! splits indirect losses between the shocked region and the rest of the
//! world; sector rankings report both absolute losses and losses as a share
//! of sector output.
//!
//! * Leontief + Ghosh: one-sector demand shock propagated both ways, with
//!   the matching value-added reduction carrying the same monetary magnitude
//!   as the demand shock (lost sales reduce supply one-for-one).
//! * Critical input: electricity is treated as indispensable, so the target
//!   sector's percentage shock applies uniformly to final demand of every
//!   sector in the shocked region before propagating.
//! * Inoperability: the demand reduction is normalized to a dimensionless
//!   inoperability vector; upstream-only by construction.
//!
//! Runs are pure functions of (table, shock); independent runs may execute
//! in parallel against one shared table.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mrio::{GhoshSystem, LeontiefInverse, MrioError, MrioTable};
use crate::shock::{DemandShock, SectorRef};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shock target {target} not present in the table")]
    TargetNotFound { target: SectorRef },
    #[error("shock amount {amount} exceeds final demand {available} at the target")]
    ShockExceedsDemand { amount: f64, available: f64 },
    #[error("final demand at target {target} is zero; cannot derive a percentage shock")]
    ZeroTargetDemand { target: SectorRef },
    #[error("partition does not match the table index space: {reason}")]
    PartitionMismatch { reason: String },
    #[error(transparent)]
    Mrio(#[from] MrioError),
}

/// Which model produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactModel {
    LeontiefGhosh,
    CriticalInput,
    Inoperability,
}

impl ImpactModel {
    pub const ALL: [ImpactModel; 3] = [
        ImpactModel::LeontiefGhosh,
        ImpactModel::CriticalInput,
        ImpactModel::Inoperability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ImpactModel::LeontiefGhosh => "leontief_ghosh",
            ImpactModel::CriticalInput => "critical_input",
            ImpactModel::Inoperability => "inoperability",
        }
    }

    pub fn parse(s: &str) -> Option<ImpactModel> {
        match s {
            "leontief_ghosh" => Some(ImpactModel::LeontiefGhosh),
            "critical_input" => Some(ImpactModel::CriticalInput),
            "inoperability" => Some(ImpactModel::Inoperability),
            _ => None,
        }
    }
}

impl std::fmt::Display for ImpactModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Splits the index space into the shocked region and the rest of the world.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    shocked_region: String,
    domestic: Vec<usize>,
    rest_of_world: Vec<usize>,
    len: usize,
}

impl RegionPartition {
    pub fn for_region(table: &MrioTable, region: &str) -> Self {
        let mut domestic = Vec::new();
        let mut rest_of_world = Vec::new();
        for (i, rs) in table.sectors().iter().enumerate() {
            if rs.region == region {
                domestic.push(i);
            } else {
                rest_of_world.push(i);
            }
        }
        RegionPartition {
            shocked_region: region.to_string(),
            domestic,
            rest_of_world,
            len: table.len(),
        }
    }

    /// Builds from explicit index sets; they must cover `len` exactly once.
    pub fn from_indices(
        shocked_region: impl Into<String>,
        domestic: Vec<usize>,
        rest_of_world: Vec<usize>,
        len: usize,
    ) -> Result<Self, ModelError> {
        let mut seen = vec![false; len];
        for &i in domestic.iter().chain(&rest_of_world) {
            if i >= len {
                return Err(ModelError::PartitionMismatch {
                    reason: format!("index {i} out of range for {len} sectors"),
                });
            }
            if seen[i] {
                return Err(ModelError::PartitionMismatch {
                    reason: format!("index {i} appears twice"),
                });
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(ModelError::PartitionMismatch {
                reason: "partition does not cover every sector".to_string(),
            });
        }
        Ok(RegionPartition {
            shocked_region: shocked_region.into(),
            domestic,
            rest_of_world,
            len,
        })
    }

    pub fn shocked_region(&self) -> &str {
        &self.shocked_region
    }

    pub fn domestic(&self) -> &[usize] {
        &self.domestic
    }

    pub fn rest_of_world(&self) -> &[usize] {
        &self.rest_of_world
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// One sector's indirect loss, for rankings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSector {
    pub region: String,
    pub sector: String,
    /// Currency units.
    pub indirect_loss: f64,
    /// Loss over sector gross output (zero for zero-output sectors).
    pub share_of_output: f64,
}

/// A model run's loss decomposition.
#[derive(Debug, Clone)]
pub struct ImpactResult {
    pub model: ImpactModel,
    pub shock: DemandShock,
    /// The shock magnitude, counted exactly once.
    pub direct: f64,
    pub upstream_indirect: f64,
    pub downstream_indirect: f64,
    /// upstream + downstream, always.
    pub total_indirect: f64,
    /// Per-sector output change, direct component included once at the
    /// shocked sector(s).
    pub per_sector_delta: DVector<f64>,
    /// Where the direct component sits (single target for Leontief-Ghosh and
    /// inoperability, the whole shocked region for critical input).
    pub per_sector_direct: DVector<f64>,
    /// Indirect losses inside the shocked region.
    pub domestic_indirect: f64,
    /// Indirect losses over every region; agrees with `total_indirect` up to
    /// summation rounding, and equals domestic + rest-of-world exactly.
    pub global_indirect: f64,
    /// All sectors, descending by indirect loss.
    pub sector_rankings: Vec<RankedSector>,
}

/// Precomputed propagation systems for repeated runs against one table.
#[derive(Debug)]
pub struct ImpactEngine<'t> {
    table: &'t MrioTable,
    leontief: LeontiefInverse,
    ghosh: GhoshSystem,
}

impl<'t> ImpactEngine<'t> {
    pub fn new(table: &'t MrioTable) -> Result<Self, ModelError> {
        Ok(ImpactEngine {
            table,
            leontief: table.leontief()?,
            ghosh: table.ghosh()?,
        })
    }

    pub fn table(&self) -> &MrioTable {
        self.table
    }

    pub fn run(&self, model: ImpactModel, shock: &DemandShock) -> Result<ImpactResult, ModelError> {
        match model {
            ImpactModel::LeontiefGhosh => self.run_leontief_ghosh(shock),
            ImpactModel::CriticalInput => {
                let partition = RegionPartition::for_region(self.table, &shock.target.region);
                self.run_critical_input(shock, &partition)
            }
            ImpactModel::Inoperability => self.run_inoperability(shock),
        }
    }

    /// Demand-side and supply-side propagation of a one-sector shock.
    pub fn run_leontief_ghosh(&self, shock: &DemandShock) -> Result<ImpactResult, ModelError> {
        let idx = self.target_index(shock)?;
        let available = self.table.final_demand()[idx];
        if shock.amount > available {
            return Err(ModelError::ShockExceedsDemand {
                amount: shock.amount,
                available,
            });
        }
        let n = self.table.len();
        let mut df = DVector::zeros(n);
        df[idx] = shock.amount;
        self.propagate_both_ways(ImpactModel::LeontiefGhosh, shock, df)
    }

    /// Uniform percentage shock on the shocked region's final demand.
    pub fn run_critical_input(
        &self,
        shock: &DemandShock,
        partition: &RegionPartition,
    ) -> Result<ImpactResult, ModelError> {
        let idx = self.target_index(shock)?;
        if partition.len() != self.table.len() {
            return Err(ModelError::PartitionMismatch {
                reason: format!(
                    "partition covers {} sectors, table has {}",
                    partition.len(),
                    self.table.len()
                ),
            });
        }
        if !partition.domestic().contains(&idx) {
            return Err(ModelError::PartitionMismatch {
                reason: format!(
                    "shock target {} is not in the shocked region {}",
                    shock.target,
                    partition.shocked_region()
                ),
            });
        }
        let f_target = self.table.final_demand()[idx];
        if f_target <= 0.0 {
            return Err(ModelError::ZeroTargetDemand {
                target: shock.target.clone(),
            });
        }
        let scale = shock.amount / f_target;
        if scale > 1.0 {
            return Err(ModelError::ShockExceedsDemand {
                amount: shock.amount,
                available: f_target,
            });
        }
        let n = self.table.len();
        let mut df = DVector::zeros(n);
        for &i in partition.domestic() {
            df[i] = scale * self.table.final_demand()[i];
        }
        self.propagate_both_ways(ImpactModel::CriticalInput, shock, df)
    }

    /// Upstream-only propagation via the inoperability system.
    pub fn run_inoperability(&self, shock: &DemandShock) -> Result<ImpactResult, ModelError> {
        let idx = self.target_index(shock)?;
        let n = self.table.len();
        let mut dx = DVector::zeros(n);
        dx[idx] = shock.amount;
        let system = self.table.inoperability(&dx)?;
        let per_sector_delta = system.lost_output();
        let total: f64 = per_sector_delta.iter().sum();
        let direct = shock.amount;
        let total_indirect = total - direct;
        let rankings = self.rank_sectors(&per_sector_delta, &dx);
        let partition = RegionPartition::for_region(self.table, &shock.target.region);
        let (domestic_indirect, global_indirect) =
            split_indirect(&per_sector_delta, &dx, &partition);
        Ok(ImpactResult {
            model: ImpactModel::Inoperability,
            shock: shock.clone(),
            direct,
            upstream_indirect: total_indirect,
            downstream_indirect: 0.0,
            total_indirect,
            per_sector_delta,
            per_sector_direct: dx,
            domestic_indirect,
            global_indirect,
            sector_rankings: rankings,
        })
    }

    fn target_index(&self, shock: &DemandShock) -> Result<usize, ModelError> {
        self.table
            .index_of(&shock.target.region, &shock.target.sector)
            .ok_or_else(|| ModelError::TargetNotFound {
                target: shock.target.clone(),
            })
    }

    /// Shared demand-side + supply-side propagation for a per-sector direct
    /// loss vector `df`. The value-added reduction carries the same monetary
    /// magnitudes as the demand reduction.
    fn propagate_both_ways(
        &self,
        model: ImpactModel,
        shock: &DemandShock,
        df: DVector<f64>,
    ) -> Result<ImpactResult, ModelError> {
        let direct: f64 = df.iter().sum();
        let upstream_vec = self.leontief.delta(&df)?;
        let upstream_total: f64 = upstream_vec.iter().sum();
        let upstream_indirect = upstream_total - direct;

        let downstream_vec = self.ghosh.output_delta(&df)?;
        let downstream_total: f64 = downstream_vec.iter().sum();
        let downstream_indirect = downstream_total - direct;

        let per_sector_delta = &upstream_vec + &downstream_vec - &df;
        let rankings = self.rank_sectors(&per_sector_delta, &df);
        let partition = RegionPartition::for_region(self.table, &shock.target.region);
        let (domestic_indirect, global_indirect) =
            split_indirect(&per_sector_delta, &df, &partition);
        let total_indirect = upstream_indirect + downstream_indirect;
        Ok(ImpactResult {
            model,
            shock: shock.clone(),
            direct,
            upstream_indirect,
            downstream_indirect,
            total_indirect,
            per_sector_delta,
            per_sector_direct: df,
            domestic_indirect,
            global_indirect,
            sector_rankings: rankings,
        })
    }

    fn rank_sectors(&self, delta: &DVector<f64>, direct: &DVector<f64>) -> Vec<RankedSector> {
        let mut rankings: Vec<RankedSector> = self
            .table
            .sectors()
            .iter()
            .enumerate()
            .map(|(i, rs)| {
                let loss = delta[i] - direct[i];
                let output = self.table.gross_output()[i];
                RankedSector {
                    region: rs.region.clone(),
                    sector: rs.sector.clone(),
                    indirect_loss: loss,
                    share_of_output: if output > 0.0 { loss / output } else { 0.0 },
                }
            })
            .collect();
        rankings.sort_by(|a, b| {
            b.indirect_loss
                .partial_cmp(&a.indirect_loss)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        rankings
    }
}

fn indirect_over(delta: &DVector<f64>, direct: &DVector<f64>, indices: &[usize]) -> f64 {
    indices.iter().map(|&i| delta[i] - direct[i]).sum()
}

/// Domestic and global indirect totals along the same summation route, so
/// that domestic + rest-of-world equals global exactly.
fn split_indirect(
    delta: &DVector<f64>,
    direct: &DVector<f64>,
    partition: &RegionPartition,
) -> (f64, f64) {
    let domestic = indirect_over(delta, direct, partition.domestic());
    let global = domestic + indirect_over(delta, direct, partition.rest_of_world());
    (domestic, global)
}

/// One-shot convenience wrappers; grid runs should reuse an [`ImpactEngine`].
pub fn run_leontief_ghosh(
    table: &MrioTable,
    shock: &DemandShock,
) -> Result<ImpactResult, ModelError> {
    ImpactEngine::new(table)?.run_leontief_ghosh(shock)
}

pub fn run_critical_input(
    table: &MrioTable,
    shock: &DemandShock,
    partition: &RegionPartition,
) -> Result<ImpactResult, ModelError> {
    ImpactEngine::new(table)?.run_critical_input(shock, partition)
}

pub fn run_inoperability(
    table: &MrioTable,
    shock: &DemandShock,
) -> Result<ImpactResult, ModelError> {
    ImpactEngine::new(table)?.run_inoperability(shock)
}

/// Regional loss attribution for an existing result under an arbitrary
/// partition: (domestic indirect, global indirect, rankings).
pub fn attribute_regions(
    table: &MrioTable,
    result: &ImpactResult,
    partition: &RegionPartition,
) -> Result<(f64, f64, Vec<RankedSector>), ModelError> {
    if partition.len() != result.per_sector_delta.len() {
        return Err(ModelError::PartitionMismatch {
            reason: format!(
                "partition covers {} sectors, result has {}",
                partition.len(),
                result.per_sector_delta.len()
            ),
        });
    }
    if table.len() != result.per_sector_delta.len() {
        return Err(ModelError::PartitionMismatch {
            reason: "table and result dimensions differ".to_string(),
        });
    }
    let domestic = indirect_over(
        &result.per_sector_delta,
        &result.per_sector_direct,
        partition.domestic(),
    );
    let global = domestic
        + indirect_over(
            &result.per_sector_delta,
            &result.per_sector_direct,
            partition.rest_of_world(),
        );
    let mut rankings: Vec<RankedSector> = table
        .sectors()
        .iter()
        .enumerate()
        .map(|(i, rs)| {
            let loss = result.per_sector_delta[i] - result.per_sector_direct[i];
            let output = table.gross_output()[i];
            RankedSector {
                region: rs.region.clone(),
                sector: rs.sector.clone(),
                indirect_loss: loss,
                share_of_output: if output > 0.0 { loss / output } else { 0.0 },
            }
        })
        .collect();
    rankings.sort_by(|a, b| {
        b.indirect_loss
            .partial_cmp(&a.indirect_loss)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok((domestic, global, rankings))
}
