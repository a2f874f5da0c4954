//! Hypothesis tests on merits, distances between derived rankings, and the
//! nonparametric bootstrap of rank vectors.
//!
//! All statistics depend on merit differences only; internally the fitted
//! merits are centred to the sum-zero representative so that every test is
//! invariant to the constraint the fit was produced under.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::estimator::{self, Constraint, MeritFit, RankVector};
use crate::graph::{ComparisonGraph, ComparisonRecord};
use crate::rng::{stream_rng, CTX_BOOTSTRAP, CTX_MC_NULL};
use crate::spectral::sqrt_psd;

/// Null distribution behind a test result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullLaw {
    ChiSquare { df: usize },
    MonteCarlo { draws: usize },
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub null: NullLaw,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
}

impl TestResult {
    fn from_chi_square(statistic: f64, df: usize, alpha: f64) -> Result<Self> {
        let chi = ChiSquared::new(df as f64).map_err(|e| Error::InvalidConfig {
            reason: format!("chi-square with df {df}: {e}"),
        })?;
        let p_value = 1.0 - chi.cdf(statistic);
        Ok(Self {
            statistic,
            null: NullLaw::ChiSquare { df },
            p_value,
            alpha,
            reject: p_value < alpha,
        })
    }

    /// Monte-Carlo p-value `(1 + #{T* >= T}) / (B + 1)`; never exactly zero.
    fn from_monte_carlo(statistic: f64, null_draws: &[f64], alpha: f64) -> Self {
        let exceed = null_draws.iter().filter(|&&t| t >= statistic).count();
        let p_value = (1 + exceed) as f64 / (null_draws.len() + 1) as f64;
        Self {
            statistic,
            null: NullLaw::MonteCarlo {
                draws: null_draws.len(),
            },
            p_value,
            alpha,
            reject: p_value < alpha,
        }
    }
}

/// Sum-zero representative of the fitted merits; all statistics are computed
/// on it so the constraint choice drops out.
fn centred_merits(fit: &MeritFit) -> DVector<f64> {
    let mean = fit.mu_hat.mean();
    fit.mu_hat.map(|v| v - mean)
}

fn require_positive_variance(fit: &MeritFit) -> Result<()> {
    if fit.sigma2_hat > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateVariance)
    }
}

fn validate_subset(subset: &[usize], items: usize) -> Result<()> {
    if subset.len() < 2 {
        return Err(Error::SubsetTooSmall {
            size: subset.len(),
        });
    }
    let mut seen = vec![false; items];
    for &index in subset {
        if index >= items {
            return Err(Error::IndexOutOfRange { index, items });
        }
        if seen[index] {
            return Err(Error::InvalidConfig {
                reason: format!("duplicate item {index} in subset"),
            });
        }
        seen[index] = true;
    }
    Ok(())
}

/// Tests whether all merits (or a subset of them) are zero.
///
/// Full set: `T = mu_hat' N mu_hat / sigma2`, chi-square with `K - 1`
/// degrees of freedom. Strict subset `R`: `T = mu_R' [(N^+)_R]^{-1} mu_R /
/// sigma2`, chi-square with `|R|` degrees of freedom (the submatrix of the
/// plug-in `n N^+` is taken first and then inverted).
pub fn test_all_equal(
    fit: &MeritFit,
    g: &ComparisonGraph,
    subset: Option<&[usize]>,
    alpha: f64,
) -> Result<TestResult> {
    require_positive_variance(fit)?;
    let k = fit.mu_hat.len();
    let mu = centred_merits(fit);

    match subset {
        None => full_equality_statistic(fit, g, &mu, alpha),
        Some(subset) if subset.len() == k => full_equality_statistic(fit, g, &mu, alpha),
        Some(subset) => {
            validate_subset(subset, k)?;
            let r = subset.len();
            let mut pinv_sub = DMatrix::zeros(r, r);
            let mut mu_sub = DVector::zeros(r);
            for (a, &ia) in subset.iter().enumerate() {
                mu_sub[a] = mu[ia];
                for (b, &ib) in subset.iter().enumerate() {
                    pinv_sub[(a, b)] = fit.pinv[(ia, ib)];
                }
            }
            let solved = pinv_sub
                .clone()
                .cholesky()
                .ok_or(Error::DegenerateVariance)?
                .solve(&mu_sub);
            let statistic = mu_sub.dot(&solved) / fit.sigma2_hat;
            TestResult::from_chi_square(statistic, r, alpha)
        }
    }
}

fn full_equality_statistic(
    fit: &MeritFit,
    g: &ComparisonGraph,
    mu: &DVector<f64>,
    alpha: f64,
) -> Result<TestResult> {
    let laplacian = g.laplacian(None)?;
    let statistic = (mu.transpose() * &laplacian * mu)[(0, 0)] / fit.sigma2_hat;
    TestResult::from_chi_square(statistic, fit.mu_hat.len() - 1, alpha)
}

/// ANOVA-style test that the merits in `subset` are all equal, using the
/// adjacent-difference contrast matrix. Chi-square with `|R| - 1` degrees
/// of freedom; the pairwise case reduces to
/// `(mu_i - mu_j)^2 / Var(mu_i - mu_j)`.
pub fn test_contrasts(
    fit: &MeritFit,
    _g: &ComparisonGraph,
    subset: &[usize],
    alpha: f64,
) -> Result<TestResult> {
    require_positive_variance(fit)?;
    let k = fit.mu_hat.len();
    validate_subset(subset, k)?;
    let mu = centred_merits(fit);
    let r = subset.len();

    // Adjacent differences of the subset merits.
    let mut diffs = DVector::zeros(r - 1);
    for a in 0..r - 1 {
        diffs[a] = mu[subset[a]] - mu[subset[a + 1]];
    }
    // Covariance of those differences from N^+: contract with the contrast
    // rows e_{subset[a]} - e_{subset[a+1]}.
    let mut cov = DMatrix::zeros(r - 1, r - 1);
    for a in 0..r - 1 {
        for b in 0..r - 1 {
            let (ia, ja) = (subset[a], subset[a + 1]);
            let (ib, jb) = (subset[b], subset[b + 1]);
            cov[(a, b)] = fit.pinv[(ia, ib)] - fit.pinv[(ia, jb)] - fit.pinv[(ja, ib)]
                + fit.pinv[(ja, jb)];
        }
    }
    let solved = cov
        .cholesky()
        .ok_or(Error::DegenerateVariance)?
        .solve(&diffs);
    let statistic = diffs.dot(&solved) / fit.sigma2_hat;
    TestResult::from_chi_square(statistic, r - 1, alpha)
}

/// Intersection-union test that all merits are distinct:
/// `T = min_{i != j} n (mu_i - mu_j)^2`, rejected for large values against
/// a Monte-Carlo null of `min_i W_i^2` with
/// `W ~ N(0, sigma2 n D N^+ D')` for the pairwise contrast matrix `D`.
pub fn test_all_distinct(
    fit: &MeritFit,
    _g: &ComparisonGraph,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<TestResult> {
    require_positive_variance(fit)?;
    let k = fit.mu_hat.len();
    let mu = centred_merits(fit);
    let n = fit.n as f64;

    let mut statistic = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = mu[i] - mu[j];
            statistic = statistic.min(n * d * d);
        }
    }

    let factor = sqrt_psd(&fit.pinv)?;
    let scale = (fit.sigma2_hat * n).sqrt();
    let null_draws = simulate_null(draws, seed, k, &factor, move |g| {
        let mut min_sq = f64::INFINITY;
        for i in 0..k {
            for j in (i + 1)..k {
                let w = scale * (g[i] - g[j]);
                min_sq = min_sq.min(w * w);
            }
        }
        min_sq
    });
    Ok(TestResult::from_monte_carlo(statistic, &null_draws, alpha))
}

/// Tests the null that `item` has the smallest merit:
/// `T = sqrt(n) (mu_item - min_{j != item} mu_j)`, rejected for large values
/// against a Monte-Carlo null of `min_i Y_i` with
/// `Y ~ N(0, sigma2 n E N^+ E')` for the contrasts-against-`item` matrix `E`.
pub fn test_item_not_worst(
    fit: &MeritFit,
    _g: &ComparisonGraph,
    item: usize,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<TestResult> {
    require_positive_variance(fit)?;
    let k = fit.mu_hat.len();
    if item >= k {
        return Err(Error::IndexOutOfRange {
            index: item,
            items: k,
        });
    }
    let mu = centred_merits(fit);
    let n = fit.n as f64;
    let min_other = (0..k)
        .filter(|&j| j != item)
        .map(|j| mu[j])
        .fold(f64::INFINITY, f64::min);
    let statistic = n.sqrt() * (mu[item] - min_other);

    let factor = sqrt_psd(&fit.pinv)?;
    let scale = (fit.sigma2_hat * n).sqrt();
    let null_draws = simulate_null(draws, seed, k, &factor, move |g| {
        (0..k)
            .filter(|&j| j != item)
            .map(|j| scale * (g[item] - g[j]))
            .fold(f64::INFINITY, f64::min)
    });
    Ok(TestResult::from_monte_carlo(statistic, &null_draws, alpha))
}

/// Draws `draws` vectors `factor * Z` with `Z` standard normal, reducing each
/// through `summary`. Each draw has its own RNG stream.
fn simulate_null<F>(draws: usize, seed: u64, k: usize, factor: &DMatrix<f64>, summary: F) -> Vec<f64>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    (0..draws as u64)
        .into_par_iter()
        .map(|idx| {
            let mut rng = stream_rng(seed, CTX_MC_NULL, idx);
            let z = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            summary(&(factor * z))
        })
        .collect()
}

/// Metric on tie-free rank vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMetric {
    /// Minimum number of transpositions: `K` minus the number of cycles of
    /// the relative permutation.
    Cayley,
    /// Number of discordant pairs.
    Kendall,
}

/// Distance between two rankings of the same items.
pub fn rank_distance(a: &RankVector, b: &RankVector, metric: RankMetric) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if !a.is_permutation() || !b.is_permutation() {
        return Err(Error::TiedRanks);
    }
    let k = a.len();
    match metric {
        RankMetric::Cayley => {
            // sigma maps the rank under `a` to the rank under `b`.
            let mut sigma = vec![0usize; k];
            for i in 0..k {
                sigma[a.0[i] - 1] = b.0[i] - 1;
            }
            let mut seen = vec![false; k];
            let mut cycles = 0u64;
            for start in 0..k {
                if seen[start] {
                    continue;
                }
                cycles += 1;
                let mut v = start;
                while !seen[v] {
                    seen[v] = true;
                    v = sigma[v];
                }
            }
            Ok(k as u64 - cycles)
        }
        RankMetric::Kendall => {
            let mut discordant = 0u64;
            for i in 0..k {
                for j in (i + 1)..k {
                    let da = a.0[i] as i64 - a.0[j] as i64;
                    let db = b.0[i] as i64 - b.0[j] as i64;
                    if da * db < 0 {
                        discordant += 1;
                    }
                }
            }
            Ok(discordant)
        }
    }
}

/// Bootstrap configuration; 200 resamples is the default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Refit with covariates (requires records to carry them).
    pub use_covariates: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 200,
            seed: 0,
            use_covariates: false,
        }
    }
}

/// Bootstrap distribution of the derived ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapReport {
    /// Requested number of resamples.
    pub replicates: usize,
    /// Rank vector per successful resample.
    pub rank_samples: Vec<RankVector>,
    /// Resamples skipped because the resampled graph was disconnected or the
    /// design non-identifiable.
    pub skipped: usize,
    /// Per-item `(Q1, median, Q3)` of the bootstrapped ranks.
    pub quartiles: Vec<(f64, f64, f64)>,
}

/// Nonparametric bootstrap over comparison records: draws `B` resamples of
/// the pooled record list with replacement and refits each, recording the
/// derived rank vector. Deterministic under `(seed)`; replicates run in
/// parallel with per-replicate RNG streams.
pub fn bootstrap_ranks(
    records: &[ComparisonRecord],
    items: usize,
    config: &BootstrapConfig,
) -> Result<BootstrapReport> {
    if records.is_empty() {
        return Err(Error::NoComparisons);
    }
    // The point fit must be feasible before resampling.
    refit_ranks(records, items, config.use_covariates)?;
    let n = records.len();

    let samples: Vec<Option<RankVector>> = (0..config.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(config.seed, CTX_BOOTSTRAP, b);
            let resample: Vec<ComparisonRecord> = (0..n)
                .map(|_| records[rng.gen_range(0..n)].clone())
                .collect();
            match refit_ranks(&resample, items, config.use_covariates) {
                Ok(ranks) => Some(ranks),
                Err(
                    Error::Disconnected { .. }
                    | Error::NotIdentifiable { .. }
                    | Error::IsolatedVertex { .. },
                ) => None,
                // Any other failure is also an infeasible resample.
                Err(_) => None,
            }
        })
        .collect();

    let skipped = samples.iter().filter(|s| s.is_none()).count();
    if skipped * 2 > config.replicates {
        return Err(Error::Infeasible {
            reason: format!(
                "{skipped} of {} bootstrap resamples were infeasible",
                config.replicates
            ),
        });
    }
    let rank_samples: Vec<RankVector> = samples.into_iter().flatten().collect();

    let mut quartiles = Vec::with_capacity(items);
    for item in 0..items {
        let mut column: Vec<f64> = rank_samples.iter().map(|r| r.0[item] as f64).collect();
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        quartiles.push((
            quantile_sorted(&column, 0.25),
            quantile_sorted(&column, 0.5),
            quantile_sorted(&column, 0.75),
        ));
    }

    Ok(BootstrapReport {
        replicates: config.replicates,
        rank_samples,
        skipped,
        quartiles,
    })
}

fn refit_ranks(
    records: &[ComparisonRecord],
    items: usize,
    use_covariates: bool,
) -> Result<RankVector> {
    if use_covariates {
        let design = crate::covariates::build_design(records, items)?;
        let fit = crate::covariates::fit_with_covariates(&design, &Constraint::SumZero)?;
        Ok(estimator::ranks(&fit.mu_hat))
    } else {
        let graph = ComparisonGraph::from_records(records, items)?;
        let fit = estimator::fit(&graph, &Constraint::SumZero, None)?;
        Ok(fit.ranks)
    }
}

/// Linear-interpolation quantile on a sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}
