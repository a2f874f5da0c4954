//! Machine-readable JSON reports produced by the command-line interface.
//! The schema is versioned as `graph-rank/1`.

use serde::{Deserialize, Serialize};

use crate::inference::{BootstrapReport, TestResult};

pub const SCHEMA: &str = "graph-rank/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemReport {
    pub label: String,
    pub merit: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub connected: bool,
    pub lambda2: f64,
    pub bottleneck_m: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovariateReport {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub identifiable: bool,
    pub rank_incidence: usize,
    pub rank_residual_covariates: usize,
    /// Smallest principal angle between the incidence and covariate spans,
    /// in radians.
    pub angle_phi: f64,
    /// Plug-in bias `N^+ M' X beta_hat` the covariate-omitting fit would
    /// absorb into the merits.
    pub misspecification_bias: Vec<f64>,
    pub centered: bool,
}

/// Output of `graph-rank fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: String,
    pub constraint: String,
    pub items: Vec<ItemReport>,
    pub sigma2: f64,
    pub n: u64,
    pub diagnostics: DiagnosticsReport,
    /// Standard errors of all pairwise merit differences (zero diagonal).
    pub pairwise_se: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariates: Option<CovariateReport>,
}

/// Output of `graph-rank test`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub schema: String,
    pub test: String,
    #[serde(flatten)]
    pub result: TestResult,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankQuartiles {
    pub label: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Output of `graph-rank bootstrap`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapJsonReport {
    pub schema: String,
    pub replicates: usize,
    pub successful: usize,
    pub skipped: usize,
    pub seed: u64,
    pub with_covariates: bool,
    pub items: Vec<RankQuartiles>,
}

impl BootstrapJsonReport {
    pub fn from_report(
        report: &BootstrapReport,
        labels: &[String],
        seed: u64,
        with_covariates: bool,
    ) -> Self {
        let items = labels
            .iter()
            .zip(&report.quartiles)
            .map(|(label, &(q1, median, q3))| RankQuartiles {
                label: label.clone(),
                q1,
                median,
                q3,
            })
            .collect();
        Self {
            schema: SCHEMA.into(),
            replicates: report.replicates,
            successful: report.rank_samples.len(),
            skipped: report.skipped,
            seed,
            with_covariates,
            items,
        }
    }

    /// Quartiles as CSV (`label,q1,median,q3`).
    pub fn quartiles_csv(&self) -> String {
        let mut out = String::from("label,q1,median,q3\n");
        for item in &self.items {
            out.push_str(&format!(
                "{},{},{},{}\n",
                item.label, item.q1, item.median, item.q3
            ));
        }
        out
    }
}
