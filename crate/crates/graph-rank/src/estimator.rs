//! Constrained least-squares merit estimation without covariates: the
//! pseudoinverse estimator, its variance and scale estimates, constraint
//! re-projection, derived ranks, and the inversion-free row-sum estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ComparisonGraph, EdgeWeights};
use crate::spectral::{pinv_laplacian, spectral_summary};

/// Identifiability constraint `v^T mu = 0`; `v` must not be a contrast
/// (`v^T 1 != 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `v = 1`: merits sum to zero.
    SumZero,
    /// `v = e_item`: the anchored item's merit is zero.
    Anchor { item: usize },
    /// Arbitrary `v` with `v^T 1 != 0`.
    Custom { vector: Vec<f64> },
}

impl Constraint {
    /// The constraint vector as a dense `K`-vector.
    pub fn vector(&self, items: usize) -> DVector<f64> {
        match self {
            Constraint::SumZero => DVector::from_element(items, 1.0),
            Constraint::Anchor { item } => {
                let mut v = DVector::zeros(items);
                v[*item] = 1.0;
                v
            }
            Constraint::Custom { vector } => DVector::from_column_slice(vector),
        }
    }

    /// Checks dimension and that `|v^T 1| > 1e-12 * ||v|| * sqrt(K)`.
    pub fn validate(&self, items: usize) -> Result<()> {
        match self {
            Constraint::SumZero => Ok(()),
            Constraint::Anchor { item } => {
                if *item >= items {
                    Err(Error::InvalidConstraint {
                        reason: format!("anchor item {item} out of range for {items} items"),
                    })
                } else {
                    Ok(())
                }
            }
            Constraint::Custom { vector } => {
                if vector.len() != items {
                    return Err(Error::InvalidConstraint {
                        reason: format!(
                            "constraint vector has length {}, expected {items}",
                            vector.len()
                        ),
                    });
                }
                let v = DVector::from_column_slice(vector);
                let dot_one = v.sum().abs();
                if dot_one <= 1e-12 * v.norm() * (items as f64).sqrt() {
                    return Err(Error::InvalidConstraint {
                        reason: "constraint vector is (numerically) a contrast: v'1 = 0".into(),
                    });
                }
                Ok(())
            }
        }
    }
}

/// Ranks derived from merits: `r_i = #{ j : mu_i <= mu_j }`, counting `j = i`,
/// so the largest merit gets rank 1 and ties share their maximal rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankVector(pub Vec<usize>);

impl RankVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when the ranks are a tie-free permutation of `1..=K`.
    pub fn is_permutation(&self) -> bool {
        let k = self.0.len();
        let mut seen = vec![false; k];
        for &r in &self.0 {
            if r == 0 || r > k || seen[r - 1] {
                return false;
            }
            seen[r - 1] = true;
        }
        true
    }
}

/// Ranks of a merit vector by the literal counting rule.
pub fn ranks(mu: &DVector<f64>) -> RankVector {
    let r = mu
        .iter()
        .map(|&mi| mu.iter().filter(|&&mj| mi <= mj).count())
        .collect();
    RankVector(r)
}

/// Divisor used for the residual-variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceDivisor {
    /// `Q(mu_hat) / n`, the plug-in estimator.
    #[default]
    Comparisons,
    /// `Q(mu_hat) / (n - (K - 1))`, a degrees-of-freedom correction for
    /// small samples.
    DegreesOfFreedom,
}

/// Graph diagnostics attached to a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub connected: bool,
    pub lambda2: f64,
    pub bottleneck_m: u64,
}

/// A fitted merit vector with its variance, scale estimate and diagnostics.
#[derive(Debug, Clone)]
pub struct MeritFit {
    /// Merit estimates satisfying `v^T mu_hat = 0`.
    pub mu_hat: DVector<f64>,
    pub constraint: Constraint,
    /// Residual variance estimate (zero for an exact fit).
    pub sigma2_hat: f64,
    /// Constraint-adjusted covariance `sigma2 * C_v N^+ C_v^T`.
    pub cov: DMatrix<f64>,
    /// The Laplacian pseudoinverse behind the fit (weighted when the fit is).
    pub pinv: DMatrix<f64>,
    /// Total number of comparisons.
    pub n: u64,
    pub diagnostics: FitDiagnostics,
    pub ranks: RankVector,
}

/// Projection `C_v = I - 1 v^T / (v^T 1)` onto the constraint set.
fn constraint_projector(v: &DVector<f64>) -> DMatrix<f64> {
    let k = v.len();
    let ones = DVector::from_element(k, 1.0);
    DMatrix::identity(k, k) - &ones * v.transpose() / v.sum()
}

/// Least-squares merit fit on a connected comparison graph.
///
/// `mu_hat = N^+ S - (v^T N^+ S / v^T 1) 1`, with `N` and `S` replaced by
/// their weighted counterparts when weights are supplied.
pub fn fit(
    g: &ComparisonGraph,
    constraint: &Constraint,
    weights: Option<&EdgeWeights>,
) -> Result<MeritFit> {
    fit_with_options(g, constraint, weights, VarianceDivisor::default())
}

/// [`fit`] with an explicit variance divisor.
pub fn fit_with_options(
    g: &ComparisonGraph,
    constraint: &Constraint,
    weights: Option<&EdgeWeights>,
    divisor: VarianceDivisor,
) -> Result<MeritFit> {
    let k = g.item_count();
    constraint.validate(k)?;
    if g.total_comparisons() == 0 {
        return Err(Error::NoComparisons);
    }
    let components = g.connected_components();
    if components.len() != 1 {
        return Err(Error::Disconnected { components });
    }

    let laplacian = g.laplacian(weights)?;
    let scores = match weights {
        Some(w) => g.weighted_scores(w)?,
        None => g.scores(),
    };
    let pinv = pinv_laplacian(&laplacian)?;
    let base = &pinv * &scores; // the v = 1 solution
    let v = constraint.vector(k);
    let shift = v.dot(&base) / v.sum();
    let mu_hat = &base - DVector::from_element(k, shift);

    let n = g.total_comparisons();
    let q = g.residual_sum_of_squares(&mu_hat, weights);
    let denom = match divisor {
        VarianceDivisor::Comparisons => n as f64,
        VarianceDivisor::DegreesOfFreedom => {
            let dof = n as f64 - (k as f64 - 1.0);
            if dof <= 0.0 {
                return Err(Error::Infeasible {
                    reason: format!("no residual degrees of freedom: n = {n}, K = {k}"),
                });
            }
            dof
        }
    };
    let sigma2_hat = q / denom;

    let projector = constraint_projector(&v);
    let cov = &projector * &pinv * projector.transpose() * sigma2_hat;

    let summary = spectral_summary(&laplacian)?;
    let bottleneck = g.bottleneck()?;
    let ranks = ranks(&mu_hat);

    Ok(MeritFit {
        mu_hat,
        constraint: constraint.clone(),
        sigma2_hat,
        cov,
        pinv,
        n,
        diagnostics: FitDiagnostics {
            connected: true,
            lambda2: summary.lambda2,
            bottleneck_m: bottleneck.m,
        },
        ranks,
    })
}

/// Re-projects a fit onto a new constraint without re-solving:
/// `mu_hat(u) = C_u C_v^+ mu_hat(v)`. Pairwise differences are unchanged.
pub fn reconstrain(fit: &MeritFit, constraint: &Constraint) -> Result<MeritFit> {
    let k = fit.mu_hat.len();
    constraint.validate(k)?;
    let v = fit.constraint.vector(k);
    let u = constraint.vector(k);
    let cu = constraint_projector(&u);
    // C_v^+ = I - v v^T / (v^T v), the Moore-Penrose inverse of C_v.
    let cv_pinv = DMatrix::identity(k, k) - &v * v.transpose() / v.norm_squared();
    let transform = &cu * cv_pinv;
    let mu_hat = &transform * &fit.mu_hat;
    let cov = &transform * &fit.cov * transform.transpose();
    let ranks = ranks(&mu_hat);
    Ok(MeritFit {
        mu_hat,
        constraint: constraint.clone(),
        sigma2_hat: fit.sigma2_hat,
        cov,
        pinv: fit.pinv.clone(),
        n: fit.n,
        diagnostics: fit.diagnostics.clone(),
        ranks,
    })
}

/// Variance of the difference `mu_hat_i - mu_hat_j`, which is free of the
/// constraint choice: `sigma2 * (N+_ii + N+_jj - 2 N+_ij)`.
pub fn pairwise_difference_variance(fit: &MeritFit, i: usize, j: usize) -> Result<f64> {
    let k = fit.mu_hat.len();
    if i == j {
        return Err(Error::SelfComparison { item: i });
    }
    for &index in [i, j].iter() {
        if index >= k {
            return Err(Error::IndexOutOfRange { index, items: k });
        }
    }
    Ok(fit.sigma2_hat * (fit.pinv[(i, i)] + fit.pinv[(j, j)] - 2.0 * fit.pinv[(i, j)]))
}

/// Row-sum estimator `mu_tilde_i = S_i / N_ii`; requires every vertex to have
/// at least one comparison.
pub fn row_sum_estimate(g: &ComparisonGraph) -> Result<DVector<f64>> {
    let k = g.item_count();
    let mut degrees = vec![0u64; k];
    let mut scores: DVector<f64> = DVector::zeros(k);
    for (i, j, data) in g.edges() {
        degrees[i] += data.count;
        degrees[j] += data.count;
        scores[i] += data.sum;
        scores[j] -= data.sum;
    }
    for (item, &d) in degrees.iter().enumerate() {
        if d == 0 {
            return Err(Error::IsolatedVertex { item });
        }
    }
    Ok(DVector::from_fn(k, |i, _| scores[i] / degrees[i] as f64))
}

/// Sum-zero merit solve without diagnostics, for simulation loops:
/// `mu_hat = (N + J/K)^{-1} S` (valid because `1^T S = 0`).
///
/// The caller must ensure the graph behind `laplacian` is connected.
pub(crate) fn solve_sum_zero(laplacian: &DMatrix<f64>, scores: &DVector<f64>) -> Option<DVector<f64>> {
    let k = laplacian.nrows();
    let jk = 1.0 / k as f64;
    let mut shifted = laplacian.clone();
    for i in 0..k {
        for j in 0..k {
            shifted[(i, j)] += jk;
        }
    }
    shifted.cholesky().map(|c| c.solve(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ComparisonRecord;
    use approx::assert_abs_diff_eq;

    fn complete_k3_graph() -> ComparisonGraph {
        // Y_01 = 1, Y_02 = 2, Y_12 = 1, single comparisons.
        ComparisonGraph::from_records(
            &[
                ComparisonRecord::new(0, 1, 1.0),
                ComparisonRecord::new(0, 2, 2.0),
                ComparisonRecord::new(1, 2, 1.0),
            ],
            3,
        )
        .unwrap()
    }

    #[test]
    fn complete_k3_fit_is_scores_over_k() {
        let fit = fit(&complete_k3_graph(), &Constraint::SumZero, None).unwrap();
        assert_abs_diff_eq!(
            fit.mu_hat,
            DVector::from_vec(vec![1.0, 0.0, -1.0]),
            epsilon = 1e-12
        );
        assert!(fit.sigma2_hat.abs() < 1e-12); // data are exactly additive
        assert_eq!(fit.ranks.0, vec![1, 2, 3]);
        assert_eq!(fit.n, 3);
        assert_eq!(fit.diagnostics.bottleneck_m, 1);
        assert_abs_diff_eq!(fit.diagnostics.lambda2, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn all_zero_outcomes_give_zero_fit() {
        let g = ComparisonGraph::from_records(
            &[
                ComparisonRecord::new(0, 1, 0.0),
                ComparisonRecord::new(1, 2, 0.0),
                ComparisonRecord::new(0, 2, 0.0),
            ],
            3,
        )
        .unwrap();
        let fit = fit(&g, &Constraint::SumZero, None).unwrap();
        assert!(fit.mu_hat.amax() < 1e-12);
        assert_eq!(fit.sigma2_hat, 0.0);
    }

    #[test]
    fn tree_graph_interpolates_edge_means() {
        // Line graph with n_01 = 1, n_12 = 3 and within-edge scatter.
        let records = vec![
            ComparisonRecord::new(0, 1, 1.0),
            ComparisonRecord::new(1, 2, 1.5),
            ComparisonRecord::new(1, 2, 1.0),
            ComparisonRecord::new(1, 2, 0.5),
        ];
        let g = ComparisonGraph::from_records(&records, 3).unwrap();
        let fit = fit(&g, &Constraint::SumZero, None).unwrap();
        assert_abs_diff_eq!(fit.mu_hat[0] - fit.mu_hat[1], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.mu_hat[1] - fit.mu_hat[2], 1.0, epsilon = 1e-10);
        // Q collects only within-edge deviations: (0.5^2 + 0 + 0.5^2).
        assert_abs_diff_eq!(fit.sigma2_hat, 0.5 / 4.0, epsilon = 1e-10);
    }

    #[test]
    fn anchored_complete_graph_closed_form() {
        // Equal multiplicities m on the complete graph: anchoring at item 0
        // gives mu_hat_i proportional to S_i - S_1. The constant is 1/(mK):
        // N^+ has diagonal (K-1)/(mK^2) and off-diagonal -1/(mK^2), so row
        // differences contract to (S_i - S_1)/(mK). (Sanity anchor: K = 2,
        // m = 1, a single outcome y has S = (y, -y) and the anchored solve
        // is exactly (0, -y).)
        let (k, m) = (4usize, 3u64);
        let mut records = Vec::new();
        let mu0 = [2.0, -1.0, 0.5, -1.5];
        for i in 0..k {
            for j in (i + 1)..k {
                for t in 0..m {
                    let wobble = 0.25 * ((t as f64) - 1.0) * (((i + j) % 3) as f64 - 1.0);
                    records.push(ComparisonRecord::new(i, j, mu0[i] - mu0[j] + wobble));
                }
            }
        }
        let g = ComparisonGraph::from_records(&records, k).unwrap();
        let s = g.scores();
        let anchored = fit(&g, &Constraint::Anchor { item: 0 }, None).unwrap();
        let factor = 1.0 / (m as f64 * k as f64);
        for i in 0..k {
            let expected = factor * (s[i] - s[0]);
            assert_abs_diff_eq!(anchored.mu_hat[i], expected, epsilon = 1e-10);
        }

        let pair = ComparisonGraph::from_records(&[ComparisonRecord::new(0, 1, 3.0)], 2).unwrap();
        let anchored_pair = fit(&pair, &Constraint::Anchor { item: 0 }, None).unwrap();
        assert_abs_diff_eq!(
            anchored_pair.mu_hat,
            DVector::from_vec(vec![0.0, -3.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn reconstrain_matches_direct_solve() {
        let g = complete_k3_graph();
        let sum_zero = fit(&g, &Constraint::SumZero, None).unwrap();

        let anchored = reconstrain(&sum_zero, &Constraint::Anchor { item: 0 }).unwrap();
        assert_abs_diff_eq!(
            anchored.mu_hat,
            DVector::from_vec(vec![0.0, -1.0, -2.0]),
            epsilon = 1e-12
        );

        let again = reconstrain(&sum_zero, &Constraint::SumZero).unwrap();
        assert_abs_diff_eq!(again.mu_hat, sum_zero.mu_hat, epsilon = 1e-12);

        // Custom u = (2, 1, 1): the oracle is the constrained re-solve. The
        // unconstrained family is (1, 0, -1) + c; u'mu = 0 forces c = -1/4.
        let custom = Constraint::Custom {
            vector: vec![2.0, 1.0, 1.0],
        };
        let reprojected = reconstrain(&sum_zero, &custom).unwrap();
        let resolved = fit(&g, &custom, None).unwrap();
        assert_abs_diff_eq!(reprojected.mu_hat, resolved.mu_hat, epsilon = 1e-12);
        assert_abs_diff_eq!(
            reprojected.mu_hat,
            DVector::from_vec(vec![0.75, -0.25, -1.25]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn contrast_constraint_is_rejected() {
        let g = complete_k3_graph();
        let contrast = Constraint::Custom {
            vector: vec![1.0, -1.0, 0.0],
        };
        assert!(matches!(
            fit(&g, &contrast, None),
            Err(Error::InvalidConstraint { .. })
        ));
    }

    #[test]
    fn disconnected_graph_is_rejected_with_components() {
        let g = ComparisonGraph::from_records(
            &[
                ComparisonRecord::new(0, 1, 1.0),
                ComparisonRecord::new(2, 3, 1.0),
            ],
            4,
        )
        .unwrap();
        match fit(&g, &Constraint::SumZero, None) {
            Err(Error::Disconnected { components }) => {
                assert_eq!(components.len(), 2);
            }
            other => panic!("expected disconnected, got {other:?}"),
        }
    }

    #[test]
    fn empty_graph_is_rejected() {
        let g = ComparisonGraph::from_records(&[], 3).unwrap();
        assert!(matches!(
            fit(&g, &Constraint::SumZero, None),
            Err(Error::NoComparisons)
        ));
    }

    #[test]
    fn pairwise_variance_complete_graph() {
        // On the complete graph with n_ij = 1: Var(mu_i - mu_j) = 2 sigma^2 / K.
        let k = 6usize;
        let mut records = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                records.push(ComparisonRecord::new(i, j, (i as f64) - (j as f64) + 0.3));
            }
        }
        let g = ComparisonGraph::from_records(&records, k).unwrap();
        let merit_fit = fit(&g, &Constraint::SumZero, None).unwrap();
        let expected = merit_fit.sigma2_hat * 2.0 / k as f64;
        assert_abs_diff_eq!(
            pairwise_difference_variance(&merit_fit, 1, 4).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert!(pairwise_difference_variance(&merit_fit, 2, 2).is_err());
    }

    #[test]
    fn pairwise_variance_equals_contrast_quadratic_form() {
        let g = complete_k3_graph();
        let anchored = fit(&g, &Constraint::Anchor { item: 1 }, None).unwrap();
        for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let mut e = DVector::zeros(3);
            e[i] = 1.0;
            e[j] = -1.0;
            let quad = (e.transpose() * &anchored.cov * &e)[(0, 0)];
            assert_abs_diff_eq!(
                pairwise_difference_variance(&anchored, i, j).unwrap(),
                quad,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(ranks(&DVector::from_vec(vec![-1.0, 3.0, 2.0])).0, vec![3, 1, 2]);
        assert_eq!(ranks(&DVector::from_vec(vec![5.0, 5.0, 5.0])).0, vec![3, 3, 3]);
        let mu0 = DVector::from_vec(vec![-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]);
        assert_eq!(ranks(&mu0).0, vec![8, 7, 6, 5, 4, 3, 2, 1]);
        assert!(ranks(&mu0).is_permutation());
        assert!(!ranks(&DVector::from_vec(vec![1.0, 1.0])).is_permutation());
    }

    #[test]
    fn row_sum_examples() {
        let g = complete_k3_graph();
        let mu = row_sum_estimate(&g).unwrap();
        assert_abs_diff_eq!(
            mu,
            DVector::from_vec(vec![1.5, 0.0, -1.5]),
            epsilon = 1e-12
        );

        let zero = ComparisonGraph::from_records(
            &[
                ComparisonRecord::new(0, 1, 0.0),
                ComparisonRecord::new(1, 2, 0.0),
                ComparisonRecord::new(0, 2, 0.0),
            ],
            3,
        )
        .unwrap();
        assert!(row_sum_estimate(&zero).unwrap().amax() < 1e-15);

        let pair =
            ComparisonGraph::from_records(&[ComparisonRecord::new(0, 1, 4.0)], 2).unwrap();
        assert_abs_diff_eq!(
            row_sum_estimate(&pair).unwrap(),
            DVector::from_vec(vec![4.0, -4.0]),
            epsilon = 1e-12
        );

        let isolated =
            ComparisonGraph::from_records(&[ComparisonRecord::new(0, 1, 1.0)], 3).unwrap();
        assert!(matches!(
            row_sum_estimate(&isolated),
            Err(Error::IsolatedVertex { item: 2 })
        ));
    }

    #[test]
    fn weighted_fit_with_unit_weights_matches_unweighted() {
        let g = complete_k3_graph();
        let mut weights = EdgeWeights::new();
        for (i, j, _) in g.edges() {
            weights.set(i, j, 1.0).unwrap();
        }
        let plain = fit(&g, &Constraint::SumZero, None).unwrap();
        let weighted = fit(&g, &Constraint::SumZero, Some(&weights)).unwrap();
        assert_eq!(plain.mu_hat, weighted.mu_hat);
        assert_eq!(plain.sigma2_hat, weighted.sigma2_hat);
    }

    #[test]
    fn degrees_of_freedom_divisor() {
        let records = vec![
            ComparisonRecord::new(0, 1, 1.0),
            ComparisonRecord::new(0, 1, 2.0),
            ComparisonRecord::new(1, 2, 0.0),
            ComparisonRecord::new(1, 2, 1.0),
            ComparisonRecord::new(0, 2, 2.0),
        ];
        let g = ComparisonGraph::from_records(&records, 3).unwrap();
        let plain = fit(&g, &Constraint::SumZero, None).unwrap();
        let dof = fit_with_options(
            &g,
            &Constraint::SumZero,
            None,
            VarianceDivisor::DegreesOfFreedom,
        )
        .unwrap();
        assert_abs_diff_eq!(
            dof.sigma2_hat,
            plain.sigma2_hat * 5.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn first_order_optimality_on_the_constraint_set() {
        let g = complete_k3_graph();
        let merit_fit = fit(&g, &Constraint::SumZero, None).unwrap();
        let q0 = g.residual_sum_of_squares(&merit_fit.mu_hat, None);
        let eps = 1e-4;
        for delta in [
            DVector::from_vec(vec![1.0, -1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, -1.0]),
            DVector::from_vec(vec![2.0, -1.0, -1.0]),
        ] {
            let q = g.residual_sum_of_squares(&(&merit_fit.mu_hat + delta * eps), None);
            assert!(q >= q0 - 1e-8);
        }
    }

    #[test]
    fn lean_solver_matches_full_fit() {
        let g = complete_k3_graph();
        let full = fit(&g, &Constraint::SumZero, None).unwrap();
        let lean = solve_sum_zero(&g.laplacian(None).unwrap(), &g.scores()).unwrap();
        assert_abs_diff_eq!(full.mu_hat, lean, epsilon = 1e-10);
    }
}
