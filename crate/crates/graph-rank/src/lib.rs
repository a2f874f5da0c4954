//! Merit estimation and rank inference from cardinal paired-comparison data
//! on arbitrary comparison graphs.
//!
//! Outcomes `Y_ijk = mu_i - mu_j + eps_ijk` are aggregated on a pairwise
//! comparison graph; the constrained least-squares estimator is driven by
//! the Moore-Penrose inverse of the graph Laplacian, whose spectrum also
//! quantifies how precisely the merits can be recovered. On top of the
//! estimator sit covariate adjustment, identifiability diagnostics,
//! hypothesis tests on merits and ranks, a rank bootstrap, and a seeded
//! simulation harness.
//!
//! Quick tour:
//!
//! ```
//! use graph_rank::{ComparisonGraph, ComparisonRecord, Constraint};
//!
//! let records = vec![
//!     ComparisonRecord::new(0, 1, 1.0),
//!     ComparisonRecord::new(0, 2, 2.0),
//!     ComparisonRecord::new(1, 2, 1.0),
//! ];
//! let graph = ComparisonGraph::from_records(&records, 3).unwrap();
//! let fit = graph_rank::fit(&graph, &Constraint::SumZero, None).unwrap();
//! assert_eq!(fit.ranks.0, vec![1, 2, 3]);
//! ```

pub mod covariates;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod inference;
pub mod io;
pub mod report;
mod rng;
pub mod simulation;
pub mod spectral;

pub use error::{Error, Result};
pub use estimator::{
    fit, fit_with_options, pairwise_difference_variance, ranks, reconstrain, row_sum_estimate,
    Constraint, FitDiagnostics, MeritFit, RankVector, VarianceDivisor,
};
pub use graph::{Bottleneck, ComparisonGraph, ComparisonRecord, EdgeData, EdgeWeights};
pub use spectral::{pinv_laplacian, pinv_symmetric, principal_angle, spectral_summary, SpectralSummary};
