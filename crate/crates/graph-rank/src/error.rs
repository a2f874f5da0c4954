//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by graph construction, estimation and inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("item index {index} out of range for {items} items")]
    IndexOutOfRange { index: usize, items: usize },

    #[error("comparison of item {item} with itself")]
    SelfComparison { item: usize },

    #[error("at least 2 items are required, got {items}")]
    TooFewItems { items: usize },

    #[error("graph has no comparisons")]
    NoComparisons,

    #[error("comparison graph is disconnected; components: {}", format_components(.components))]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("weight supplied for non-edge ({i}, {j})")]
    WeightForNonEdge { i: usize, j: usize },

    #[error("weights must be strictly positive; got {value} for edge ({i}, {j})")]
    NonPositiveWeight { i: usize, j: usize, value: f64 },

    #[error("invalid constraint: {reason}")]
    InvalidConstraint { reason: String },

    #[error("vertex {item} has no comparisons")]
    IsolatedVertex { item: usize },

    #[error("matrix is not symmetric")]
    NonSymmetric,

    #[error("zero matrix has no column span")]
    ZeroMatrix,

    #[error("design is not identifiable: {reason}")]
    NotIdentifiable { reason: String },

    #[error("covariate vectors are missing or have unequal lengths")]
    RaggedCovariates,

    #[error("residual variance is zero; the fit is exact and the statistic is undefined")]
    DegenerateVariance,

    #[error("subset must contain at least 2 items, got {size}")]
    SubsetTooSmall { size: usize },

    #[error("rank vectors contain ties; distances are defined on permutations only")]
    TiedRanks,

    #[error("rank vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("infeasible: {reason}")]
    Infeasible { reason: String },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_components(components: &[Vec<usize>]) -> String {
    components
        .iter()
        .map(|c| {
            let items = c
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(", ");
            format!("{{{items}}}")
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

pub type Result<T> = std::result::Result<T, Error>;
