//! The multi-regional input-output economy and its static linear algebra.
//!
//! An economy is an indexed list of (region, sector) pairs plus four aligned
//! arrays: the technical coefficients matrix `A`, the final demand vector `F`,
//! the gross output vector `x`, and the value-added vector `v`. Everything in
//! this module is a pure function of those inputs; tables and derived systems
//! are immutable and safe to share across threads.
//!
//! Three derived systems are supported:
//!
//! * the Leontief inverse `L = (I - A)^-1`, mapping final-demand changes to
//!   total upstream output changes;
//! * the Ghosh system built from the direct allocations matrix
//!   `B = x^-1 A x` (hat denoting diagonalization) with `G = (I - B)^-1`,
//!   mapping value-added changes to downstream output changes;
//! * the inoperability system with interdependency matrix `A* = x^-1 A x`,
//!   perturbation `c* = x^-1 dx`, and inoperability `q = (I - A*)^-1 c*`.
//!
//! `A*` and `B` are numerically identical; they are kept as distinct roles
//! because they answer different questions. Their similarity to `A` also
//! yields the identity `x_hat * q == L * dx`, which the test suite enforces.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Dyn};
use thiserror::Error;

/// Relative tolerance for algebraic identity residuals.
pub const DEFAULT_IDENTITY_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for table balance (`x = A x + F`); real MRIO exports
/// are only approximately balanced.
pub const DEFAULT_CONSISTENCY_TOLERANCE: f64 = 1e-6;

/// Convergence threshold for the spectral-radius power iteration.
const POWER_ITERATION_TOLERANCE: f64 = 1e-6;
const POWER_ITERATION_MAX_STEPS: usize = 50_000;

type Lu = nalgebra::linalg::LU<f64, Dyn, Dyn>;

#[derive(Debug, Error)]
pub enum MrioError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative coefficient {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error(
        "economy is not productive (max column sum {max_column_sum}, \
         estimated spectral radius {spectral_radius})"
    )]
    NotProductive {
        max_column_sum: f64,
        spectral_radius: f64,
    },
    #[error("linear system is numerically singular")]
    SingularSystem,
    #[error("column {col} has zero gross output but nonzero transaction flows")]
    ZeroOutputWithFlows { col: usize },
    #[error("sector {index} has zero gross output but nonzero coefficients")]
    ZeroOutputWithCoefficients { index: usize },
    #[error("gross output must be nonnegative, got {value} at sector {index}")]
    NegativeOutput { index: usize, value: f64 },
    #[error(
        "perturbation {value} exceeds gross output {output} at sector {index}"
    )]
    PerturbationExceedsOutput {
        index: usize,
        value: f64,
        output: f64,
    },
    #[error(
        "table balance residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
    )]
    ConsistencyViolation { residual: f64, tolerance: f64 },
}

/// One position in the economy's index space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegionSector {
    pub region: String,
    pub sector: String,
    pub name: String,
}

impl RegionSector {
    pub fn new(region: impl Into<String>, sector: impl Into<String>) -> Self {
        let sector = sector.into();
        RegionSector {
            region: region.into(),
            name: sector.clone(),
            sector,
        }
    }
}

/// Residual tolerances carried by a table (overridable via bundle metadata).
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub identity: f64,
    pub consistency: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: DEFAULT_IDENTITY_TOLERANCE,
            consistency: DEFAULT_CONSISTENCY_TOLERANCE,
        }
    }
}

/// A validated regions-by-sectors economy.
///
/// All money is stored in the single `currency_scale` declared at
/// construction; unit conversions belong to ingest, never to the algebra.
#[derive(Debug, Clone)]
pub struct MrioTable {
    sectors: Vec<RegionSector>,
    a: DMatrix<f64>,
    final_demand: DVector<f64>,
    gross_output: DVector<f64>,
    value_added: DVector<f64>,
    base_year: i32,
    currency_scale: String,
    tolerances: Tolerances,
    zero_output: Vec<usize>,
}

impl MrioTable {
    /// Validates and assembles a table.
    ///
    /// Rejects non-square or negative coefficients, column sums at or above
    /// one, and sectors that have zero gross output while still carrying
    /// coefficient flows. Sectors with zero output and all-zero coefficient
    /// rows/columns are legal; they are recorded in `zero_output_sectors`.
    pub fn new(
        sectors: Vec<RegionSector>,
        a: DMatrix<f64>,
        final_demand: DVector<f64>,
        gross_output: DVector<f64>,
        value_added: DVector<f64>,
        base_year: i32,
        currency_scale: impl Into<String>,
        tolerances: Tolerances,
    ) -> Result<Self, MrioError> {
        let n = sectors.len();
        if a.nrows() != a.ncols() {
            return Err(MrioError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.nrows() != n {
            return Err(MrioError::DimensionMismatch {
                expected: n,
                got: a.nrows(),
            });
        }
        for vec in [&final_demand, &gross_output, &value_added] {
            if vec.len() != n {
                return Err(MrioError::DimensionMismatch {
                    expected: n,
                    got: vec.len(),
                });
            }
        }
        check_nonnegative(&a)?;
        let report = productiveness_check(&a)?;
        if !report.pass {
            return Err(MrioError::NotProductive {
                max_column_sum: report.max_column_sum,
                spectral_radius: report.spectral_radius,
            });
        }
        if report.max_column_sum >= 1.0 {
            return Err(MrioError::NotProductive {
                max_column_sum: report.max_column_sum,
                spectral_radius: report.spectral_radius,
            });
        }

        let mut zero_output = Vec::new();
        for i in 0..n {
            let x_i = gross_output[i];
            if x_i < 0.0 {
                return Err(MrioError::NegativeOutput {
                    index: i,
                    value: x_i,
                });
            }
            if x_i == 0.0 {
                let live = (0..n).any(|j| a[(i, j)] != 0.0 || a[(j, i)] != 0.0);
                if live {
                    return Err(MrioError::ZeroOutputWithCoefficients { index: i });
                }
                zero_output.push(i);
            }
        }

        Ok(MrioTable {
            sectors,
            a,
            final_demand,
            gross_output,
            value_added,
            base_year,
            currency_scale: currency_scale.into(),
            tolerances,
            zero_output,
        })
    }

    pub fn len(&self) -> usize {
        self.sectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }

    pub fn sectors(&self) -> &[RegionSector] {
        &self.sectors
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn final_demand(&self) -> &DVector<f64> {
        &self.final_demand
    }

    pub fn gross_output(&self) -> &DVector<f64> {
        &self.gross_output
    }

    pub fn value_added(&self) -> &DVector<f64> {
        &self.value_added
    }

    pub fn base_year(&self) -> i32 {
        self.base_year
    }

    pub fn currency_scale(&self) -> &str {
        &self.currency_scale
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    /// Sectors carried with zero gross output (excluded from `B`/`A*`
    /// construction but kept in the index space).
    pub fn zero_output_sectors(&self) -> &[usize] {
        &self.zero_output
    }

    /// Index of a (region, sector) pair, if present.
    pub fn index_of(&self, region: &str, sector: &str) -> Option<usize> {
        self.sectors
            .iter()
            .position(|rs| rs.region == region && rs.sector == sector)
    }

    /// Indices belonging to one region.
    pub fn region_indices(&self, region: &str) -> Vec<usize> {
        self.sectors
            .iter()
            .enumerate()
            .filter(|(_, rs)| rs.region == region)
            .map(|(i, _)| i)
            .collect()
    }

    /// `max_i |x - (A x + F)|_i / max_i |x|_i`, the table balance residual.
    pub fn consistency_residual(&self) -> f64 {
        let implied = &self.a * &self.gross_output + &self.final_demand;
        let diff = &self.gross_output - implied;
        let num = diff.amax();
        let den = self.gross_output.amax();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    /// Errors when the balance residual exceeds the table's tolerance.
    pub fn check_consistency(&self) -> Result<f64, MrioError> {
        let residual = self.consistency_residual();
        if residual > self.tolerances.consistency {
            return Err(MrioError::ConsistencyViolation {
                residual,
                tolerance: self.tolerances.consistency,
            });
        }
        Ok(residual)
    }

    /// Residual of `v` against `x .* (1 - column sums of A)`, reported for
    /// diagnostics; value-added exports are not always rebalanced.
    pub fn value_added_residual(&self) -> f64 {
        let n = self.len();
        let mut num: f64 = 0.0;
        for j in 0..n {
            let col_sum: f64 = (0..n).map(|i| self.a[(i, j)]).sum();
            let implied = self.gross_output[j] * (1.0 - col_sum);
            num = num.max((self.value_added[j] - implied).abs());
        }
        let den = self.value_added.amax();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    pub fn leontief(&self) -> Result<LeontiefInverse, MrioError> {
        leontief_inverse(&self.a)
    }

    pub fn ghosh(&self) -> Result<GhoshSystem, MrioError> {
        ghosh_system(&self.a, &self.gross_output)
    }

    pub fn inoperability(
        &self,
        dx: &DVector<f64>,
    ) -> Result<InoperabilitySystem, MrioError> {
        inoperability_system(&self.a, &self.gross_output, dx)
    }
}

/// Productiveness diagnostics for a coefficients matrix.
#[derive(Debug, Clone, Copy)]
pub struct ProductivenessReport {
    /// Fast sufficient condition: every column sum below one implies a
    /// spectral radius below one.
    pub max_column_sum: f64,
    /// Power-iteration estimate of the dominant eigenvalue magnitude.
    pub spectral_radius: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Passes when the estimated spectral radius is below one.
    pub pass: bool,
}

/// Checks that a nonnegative coefficients matrix admits a nonnegative
/// Leontief inverse, reporting both the column-sum bound and a power-iteration
/// estimate of the spectral radius.
pub fn productiveness_check(a: &DMatrix<f64>) -> Result<ProductivenessReport, MrioError> {
    if a.nrows() != a.ncols() {
        return Err(MrioError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    check_nonnegative(a)?;
    let n = a.nrows();
    let max_column_sum = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)]).sum::<f64>())
        .fold(0.0f64, f64::max);
    let (spectral_radius, iterations, converged) = spectral_radius_nonnegative(a);
    Ok(ProductivenessReport {
        max_column_sum,
        spectral_radius,
        iterations,
        converged,
        pass: converged && spectral_radius < 1.0,
    })
}

/// Power-iteration estimate of the Perron root of a nonnegative matrix.
///
/// Iterates on `A + I` and subtracts the shift afterwards; the shift moves
/// the whole spectrum right by exactly one, which keeps the iteration from
/// oscillating on periodic coefficient structures (e.g. pure two-sector
/// exchange loops) where plain power iteration never settles.
fn spectral_radius_nonnegative(a: &DMatrix<f64>) -> (f64, usize, bool) {
    let n = a.nrows();
    if n == 0 {
        return (0.0, 0, true);
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0f64;
    for step in 1..=POWER_ITERATION_MAX_STEPS {
        let mut w = a * &v;
        w += &v; // (A + I) v
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, step, true);
        }
        let rayleigh = w.dot(&v) / v.dot(&v);
        w /= norm;
        v = w;
        let shifted = rayleigh - 1.0;
        if (shifted - estimate).abs() <= POWER_ITERATION_TOLERANCE * estimate.abs().max(1.0) {
            return (shifted.max(0.0), step, true);
        }
        estimate = shifted;
    }
    (estimate.max(0.0), POWER_ITERATION_MAX_STEPS, false)
}

/// Builds technical coefficients from a transactions matrix: `A_ij = T_ij / x_j`.
///
/// Columns with zero output are legal only when the corresponding
/// transactions column is all zero; the resulting coefficient column is zero.
pub fn build_technical_coefficients(
    transactions: &DMatrix<f64>,
    gross_output: &DVector<f64>,
) -> Result<DMatrix<f64>, MrioError> {
    let n = transactions.nrows();
    if transactions.ncols() != n {
        return Err(MrioError::NotSquare {
            rows: n,
            cols: transactions.ncols(),
        });
    }
    if gross_output.len() != n {
        return Err(MrioError::DimensionMismatch {
            expected: n,
            got: gross_output.len(),
        });
    }
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let x_j = gross_output[j];
        if x_j < 0.0 {
            return Err(MrioError::NegativeOutput {
                index: j,
                value: x_j,
            });
        }
        if x_j == 0.0 {
            // A dead sector can neither buy (column) nor sell (row).
            if (0..n).any(|i| transactions[(i, j)] != 0.0 || transactions[(j, i)] != 0.0) {
                return Err(MrioError::ZeroOutputWithFlows { col: j });
            }
            continue;
        }
        for i in 0..n {
            a[(i, j)] = transactions[(i, j)] / x_j;
        }
    }
    Ok(a)
}

/// The Leontief inverse `L = (I - A)^-1`.
///
/// Holds the dense factorization of `(I - A)`; demand deltas are computed by
/// solving rather than by multiplying with an explicit inverse, and the full
/// matrix is materialized only on first request.
#[derive(Debug)]
pub struct LeontiefInverse {
    factors: Lu,
    dim: usize,
    matrix: OnceLock<DMatrix<f64>>,
}

impl LeontiefInverse {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Output change `dx = L * dF` for a final-demand change `dF`.
    pub fn delta(&self, final_demand_change: &DVector<f64>) -> Result<DVector<f64>, MrioError> {
        if final_demand_change.len() != self.dim {
            return Err(MrioError::DimensionMismatch {
                expected: self.dim,
                got: final_demand_change.len(),
            });
        }
        self.factors
            .solve(final_demand_change)
            .ok_or(MrioError::SingularSystem)
    }

    /// The explicit inverse, materialized on first use.
    pub fn matrix(&self) -> &DMatrix<f64> {
        self.matrix.get_or_init(|| {
            self.factors
                .try_inverse()
                .expect("factorization was validated invertible at construction")
        })
    }
}

/// Factorizes `(I - A)` after gating on productiveness.
pub fn leontief_inverse(a: &DMatrix<f64>) -> Result<LeontiefInverse, MrioError> {
    let report = productiveness_check(a)?;
    if !report.pass {
        return Err(MrioError::NotProductive {
            max_column_sum: report.max_column_sum,
            spectral_radius: report.spectral_radius,
        });
    }
    let n = a.nrows();
    let i_minus_a = DMatrix::identity(n, n) - a;
    let factors = Lu::new(i_minus_a);
    if !factors.is_invertible() {
        return Err(MrioError::SingularSystem);
    }
    Ok(LeontiefInverse {
        factors,
        dim: n,
        matrix: OnceLock::new(),
    })
}

/// `dx = L * dF`; kept as a standalone operation to mirror the modeling
/// vocabulary, delegates to the solver path.
pub fn leontief_delta(
    leontief: &LeontiefInverse,
    final_demand_change: &DVector<f64>,
) -> Result<DVector<f64>, MrioError> {
    leontief.delta(final_demand_change)
}

/// The Ghosh supply-side system: direct allocations `B = x^-1 A x` and
/// `G = (I - B)^-1`.
#[derive(Debug)]
pub struct GhoshSystem {
    allocations: DMatrix<f64>,
    /// LU of `(I - B)^T`, so that row-vector products `v' G` become solves.
    factors_t: Lu,
    dim: usize,
    matrix: OnceLock<DMatrix<f64>>,
}

impl GhoshSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The direct allocations matrix `B`.
    pub fn allocations(&self) -> &DMatrix<f64> {
        &self.allocations
    }

    /// Downstream output row `x' = v' G` for a value-added row `v'`.
    ///
    /// Orientation: both `v` and the result are stored as plain vectors; the
    /// product treats them as row vectors.
    pub fn output_delta(&self, value_added: &DVector<f64>) -> Result<DVector<f64>, MrioError> {
        if value_added.len() != self.dim {
            return Err(MrioError::DimensionMismatch {
                expected: self.dim,
                got: value_added.len(),
            });
        }
        // v' G = (G' v)', and G' = ((I - B)^T)^-1.
        self.factors_t
            .solve(value_added)
            .ok_or(MrioError::SingularSystem)
    }

    /// The explicit Ghosh inverse `G`, materialized on first use.
    pub fn matrix(&self) -> &DMatrix<f64> {
        self.matrix.get_or_init(|| {
            self.factors_t
                .try_inverse()
                .expect("factorization was validated invertible at construction")
                .transpose()
        })
    }
}

/// Builds the Ghosh system from coefficients and gross output.
///
/// `B_ij = A_ij * x_j / x_i`. Sectors with zero output must have all-zero
/// coefficient rows and columns; their allocation rows and columns are zero.
pub fn ghosh_system(a: &DMatrix<f64>, gross_output: &DVector<f64>) -> Result<GhoshSystem, MrioError> {
    let b = similarity_scale(a, gross_output)?;
    // B is similar to A wherever output is positive, so productiveness carries
    // over; assert anyway since the factorization is about to rely on it.
    let report = productiveness_check(&b)?;
    if !report.pass {
        return Err(MrioError::NotProductive {
            max_column_sum: report.max_column_sum,
            spectral_radius: report.spectral_radius,
        });
    }
    let n = b.nrows();
    let i_minus_b_t = (DMatrix::identity(n, n) - &b).transpose();
    let factors_t = Lu::new(i_minus_b_t);
    if !factors_t.is_invertible() {
        return Err(MrioError::SingularSystem);
    }
    Ok(GhoshSystem {
        allocations: b,
        factors_t,
        dim: n,
        matrix: OnceLock::new(),
    })
}

/// `x' = v' G` as a standalone operation.
pub fn ghosh_output(
    value_added: &DVector<f64>,
    ghosh: &GhoshSystem,
) -> Result<DVector<f64>, MrioError> {
    ghosh.output_delta(value_added)
}

/// The inoperability system for one perturbation.
#[derive(Debug, Clone)]
pub struct InoperabilitySystem {
    interdependency: DMatrix<f64>,
    perturbation: DVector<f64>,
    inoperability: DVector<f64>,
    gross_output: DVector<f64>,
}

impl InoperabilitySystem {
    /// The interdependency matrix `A*` (numerically the Ghosh `B`; kept as a
    /// distinct role).
    pub fn interdependency(&self) -> &DMatrix<f64> {
        &self.interdependency
    }

    /// The dimensionless perturbation `c* = x^-1 dx`.
    pub fn perturbation(&self) -> &DVector<f64> {
        &self.perturbation
    }

    /// The dimensionless inoperability `q = (I - A*)^-1 c*`.
    pub fn inoperability(&self) -> &DVector<f64> {
        &self.inoperability
    }

    /// Monetary lost output `x_hat * q`.
    pub fn lost_output(&self) -> DVector<f64> {
        DVector::from_fn(self.gross_output.len(), |i, _| {
            self.gross_output[i] * self.inoperability[i]
        })
    }
}

/// Solves the inoperability system for a demand-reduction vector `dx`.
///
/// `dx` must be nonnegative and can nowhere exceed gross output. Sectors with
/// zero output must carry zero perturbation.
pub fn inoperability_system(
    a: &DMatrix<f64>,
    gross_output: &DVector<f64>,
    dx: &DVector<f64>,
) -> Result<InoperabilitySystem, MrioError> {
    let n = a.nrows();
    if dx.len() != n {
        return Err(MrioError::DimensionMismatch {
            expected: n,
            got: dx.len(),
        });
    }
    assert!(
        dx.iter().all(|&d| d >= 0.0),
        "demand reductions must be nonnegative"
    );
    for i in 0..n {
        if dx[i] > gross_output[i] {
            return Err(MrioError::PerturbationExceedsOutput {
                index: i,
                value: dx[i],
                output: gross_output[i],
            });
        }
    }
    let a_star = similarity_scale(a, gross_output)?;
    let report = productiveness_check(&a_star)?;
    if !report.pass {
        return Err(MrioError::NotProductive {
            max_column_sum: report.max_column_sum,
            spectral_radius: report.spectral_radius,
        });
    }
    let c_star = DVector::from_fn(n, |i, _| {
        if gross_output[i] == 0.0 {
            0.0
        } else {
            dx[i] / gross_output[i]
        }
    });
    let i_minus = DMatrix::identity(n, n) - &a_star;
    let factors = Lu::new(i_minus);
    let q = factors.solve(&c_star).ok_or(MrioError::SingularSystem)?;
    Ok(InoperabilitySystem {
        interdependency: a_star,
        perturbation: c_star,
        inoperability: q,
        gross_output: gross_output.clone(),
    })
}

/// `x^-1 M x` with zero-output rows and columns carried as zeros.
fn similarity_scale(
    a: &DMatrix<f64>,
    gross_output: &DVector<f64>,
) -> Result<DMatrix<f64>, MrioError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(MrioError::NotSquare {
            rows: n,
            cols: a.ncols(),
        });
    }
    if gross_output.len() != n {
        return Err(MrioError::DimensionMismatch {
            expected: n,
            got: gross_output.len(),
        });
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let x_i = gross_output[i];
        if x_i < 0.0 {
            return Err(MrioError::NegativeOutput {
                index: i,
                value: x_i,
            });
        }
        if x_i == 0.0 {
            if (0..n).any(|j| a[(i, j)] != 0.0 || a[(j, i)] != 0.0) {
                return Err(MrioError::ZeroOutputWithCoefficients { index: i });
            }
            continue;
        }
        for j in 0..n {
            if gross_output[j] == 0.0 {
                continue;
            }
            out[(i, j)] = a[(i, j)] * gross_output[j] / x_i;
        }
    }
    Ok(out)
}

fn check_nonnegative(a: &DMatrix<f64>) -> Result<(), MrioError> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let v = a[(i, j)];
            if !(v >= 0.0) {
                return Err(MrioError::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}
