//! Unified NOMA framework.
//!
//! Every scheme is described by a `K x N` sparse spreading matrix whose rows
//! are resource blocks and whose columns are user layers. Power-domain NOMA
//! is the single-row special case; SCMA uses equal column weights, PDMA
//! unequal ones, and MUSA fills columns from a low cross-correlation
//! sequence pool. Receivers either run SIC (power domain) or message passing
//! over the factor graph induced by the matrix (code domain).

mod codebook;
mod constellation;
mod matrix;
mod mpa;
mod musa;
mod sic;

pub use codebook::Codebook;
pub use constellation::Constellation;
pub use matrix::{assign_columns, build_matrix, MatrixParams, Scheme, SpreadingMatrix};
pub use mpa::{mpa_detect, DetectionResult, MpaConfig};
pub use musa::{max_cross_correlation, musa_pool, MusaPool};
pub use sic::{
    sic_decode_downlink, sic_decode_uplink, superpose_downlink, Cancellation, DownlinkChannel,
    DownlinkSicOutput, NomaPair, UplinkLink, UplinkSicOutput,
};

pub use num_complex::Complex64;

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum NomaError {
    #[error("matrix dimensions must be >= 1, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("column {0} occupies no resource block")]
    ZeroColumn(usize),
    #[error("PD-NOMA requires exactly one row, got {0}")]
    PdNomaRows(usize),
    #[error("SCMA requires equal column weights, column {col} has weight {weight} (expected {expected})")]
    UnequalWeights { col: usize, weight: usize, expected: usize },
    #[error("columns {0} and {1} have identical occupancy")]
    DuplicateColumns(usize, usize),
    #[error("a {rows}x{cols} code-domain matrix must not be fully occupied")]
    DenseMatrix { rows: usize, cols: usize },
    #[error("SCMA column weight {weight} invalid for {rows} rows")]
    InvalidColumnWeight { weight: usize, rows: usize },
    #[error("only {available} distinct weight-{weight} columns exist, {requested} requested")]
    NotEnoughColumns { available: u128, weight: usize, requested: usize },
    #[error("PDMA needs {expected} patterns of length {rows}, got {detail}")]
    PatternShape { expected: usize, rows: usize, detail: String },
    #[error("column index {index} out of range for {cols} columns")]
    ColumnOutOfRange { index: usize, cols: usize },
    #[error("{users} users cannot be assigned to {cols} columns")]
    TooManyUsers { users: usize, cols: usize },
    #[error("power shares must satisfy a_m + a_n = 1 and 0 < a_n < a_m < 1, got a_m={far}, a_n={near}")]
    InvalidPowerShares { far: f64, near: f64 },
    #[error("a NOMA pair needs two distinct users, got {0} twice")]
    SameUser(usize),
    #[error("total power must be finite and > 0, got {0}")]
    InvalidPower(f64),
    #[error("noise variance must be finite and > 0, got {0}")]
    InvalidNoise(f64),
    #[error("link gain/power must be finite and >= 0")]
    InvalidLink,
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("pool size must be >= 1")]
    EmptyPool,
    #[error("symbol alphabet size {0} unsupported (use 2, 4 or 8)")]
    UnsupportedOrder(usize),
    #[error("codebook inconsistent with matrix: {0}")]
    CodebookMismatch(String),
    #[error("received vector has {got} samples, matrix has {rows} rows")]
    ReceivedLength { got: usize, rows: usize },
    #[error("max_iters must be >= 1")]
    NoIterations,
    #[error("damping must lie in [0, 1), got {0}")]
    InvalidDamping(f64),
    #[error("symbol index {index} out of range for alphabet of {order}")]
    SymbolOutOfRange { index: usize, order: usize },
    #[error("codebook parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
