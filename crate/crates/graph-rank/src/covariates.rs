//! Graph linear models with covariates: design construction, identifiability
//! diagnostics, the joint least-squares fit, and misspecification measures
//! for the covariate-omitting estimator.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::estimator::Constraint;
use crate::graph::{ComparisonGraph, ComparisonRecord};
use crate::spectral::{numerical_rank, pinv_laplacian, pinv_symmetric, principal_angle};

/// Covariate combination rule turning a per-item pair `(x_i, x_j)` into the
/// per-comparison covariate. Must be antisymmetric, `psi(u, v) = -psi(v, u)`,
/// so that reorienting a comparison negates its covariate along with the
/// outcome; this is spot-checked on random probes at construction.
#[derive(Clone)]
pub struct Psi {
    name: &'static str,
    combine: fn(&[f64], &[f64]) -> Vec<f64>,
}

impl Psi {
    /// The default rule `psi(u, v) = u - v`.
    pub fn difference() -> Self {
        Self {
            name: "diff",
            combine: |u, v| u.iter().zip(v).map(|(a, b)| a - b).collect(),
        }
    }

    /// Registers a custom rule after checking antisymmetry on random probes.
    pub fn new(name: &'static str, combine: fn(&[f64], &[f64]) -> Vec<f64>) -> Result<Self> {
        let mut rng = ChaCha12Rng::seed_from_u64(0x7073_6921);
        for _ in 0..8 {
            let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let uv = combine(&u, &v);
            let vu = combine(&v, &u);
            if uv.len() != vu.len()
                || uv.iter().zip(&vu).any(|(a, b)| (a + b).abs() > 1e-10)
            {
                return Err(Error::InvalidConfig {
                    reason: format!("combination rule '{name}' is not antisymmetric"),
                });
            }
        }
        Ok(Self { name, combine })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn combine(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (self.combine)(u, v)
    }
}

impl std::fmt::Debug for Psi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Psi({})", self.name)
    }
}

/// Stacked regression view of a comparison data set: outcomes `Y`, incidence
/// matrix `M` (one row per comparison, +1 at `i`, -1 at `j`) and covariate
/// matrix `X`, rows in lexicographic `(i, j, k)` order.
///
/// `M^T M` equals the graph Laplacian and `M^T Y` the score vector exactly.
#[derive(Debug, Clone)]
pub struct CovariateDesign {
    incidence: DMatrix<f64>,
    covariates: DMatrix<f64>,
    outcomes: DVector<f64>,
    graph: ComparisonGraph,
    items: usize,
}

impl CovariateDesign {
    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn outcomes(&self) -> &DVector<f64> {
        &self.outcomes
    }

    pub fn graph(&self) -> &ComparisonGraph {
        &self.graph
    }

    pub fn item_count(&self) -> usize {
        self.items
    }

    pub fn covariate_count(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn comparison_count(&self) -> usize {
        self.outcomes.len()
    }

    /// Centers every covariate column at its mean (in place on a copy).
    pub fn center_covariates(mut self) -> Self {
        let n = self.covariates.nrows() as f64;
        for c in 0..self.covariates.ncols() {
            let mean = self.covariates.column(c).sum() / n;
            for r in 0..self.covariates.nrows() {
                self.covariates[(r, c)] -= mean;
            }
        }
        self
    }
}

/// Builds the stacked design from records. All records must carry covariates
/// of one common length (or none at all, which yields `p = 0`).
pub fn build_design(records: &[ComparisonRecord], items: usize) -> Result<CovariateDesign> {
    if items < 2 {
        return Err(Error::TooFewItems { items });
    }
    if records.is_empty() {
        return Err(Error::NoComparisons);
    }
    let p = match records[0].x.as_ref() {
        Some(x) => x.len(),
        None => 0,
    };
    for r in records {
        match (&r.x, p) {
            (None, 0) => {}
            (Some(x), p) if x.len() == p => {}
            _ => return Err(Error::RaggedCovariates),
        }
    }

    let graph = ComparisonGraph::from_records_retained(records, items)?;
    let mut canonical: Vec<ComparisonRecord> =
        records.iter().map(|r| r.canonical()).collect();
    // Stable: within-edge order is arrival order, giving lexicographic
    // (i, j, k) rows.
    canonical.sort_by_key(|r| (r.i, r.j));

    let n = canonical.len();
    let mut incidence = DMatrix::zeros(n, items);
    let mut covariates = DMatrix::zeros(n, p);
    let mut outcomes = DVector::zeros(n);
    for (row, rec) in canonical.iter().enumerate() {
        incidence[(row, rec.i)] = 1.0;
        incidence[(row, rec.j)] = -1.0;
        outcomes[row] = rec.y;
        if let Some(x) = &rec.x {
            for (col, &value) in x.iter().enumerate() {
                covariates[(row, col)] = value;
            }
        }
    }

    Ok(CovariateDesign {
        incidence,
        covariates,
        outcomes,
        graph,
        items,
    })
}

/// Identifiability and angle diagnostics of a design.
#[derive(Debug, Clone)]
pub struct IdentifiabilityReport {
    /// Numerical rank of the incidence matrix (`K - 1` iff connected).
    pub rank_incidence: usize,
    /// Numerical rank of the covariates after projecting out the incidence
    /// span; must equal `p`.
    pub rank_residual_covariates: usize,
    pub identifiable: bool,
    /// When rank-deficient: a basis (in covariate space) of the directions
    /// `l` with `X l` inside the incidence span.
    pub confounded_directions: Vec<DVector<f64>>,
    /// Smallest principal angle between the incidence and covariate spans;
    /// `pi/2` when there are no covariates.
    pub angle: f64,
}

/// Checks `rank(M) = K - 1` and `rank((I - M M^+) X) = p`.
pub fn check_identifiability(design: &CovariateDesign) -> Result<IdentifiabilityReport> {
    let k = design.items;
    let p = design.covariate_count();
    let rank_incidence = numerical_rank(&design.incidence);

    if p == 0 {
        return Ok(IdentifiabilityReport {
            rank_incidence,
            rank_residual_covariates: 0,
            identifiable: rank_incidence == k - 1,
            confounded_directions: Vec::new(),
            angle: std::f64::consts::FRAC_PI_2,
        });
    }

    let residual = incidence_residual(design)?;
    // The rank tolerance must be relative to the covariate scale, not the
    // residual's own: an exactly confounded column leaves a residual of pure
    // rounding noise, which would otherwise look full-rank against itself.
    let x_sigma = design
        .covariates
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0f64, |m, &s| m.max(s));
    let n_rows = residual.nrows().max(p);
    let sigma_tol = x_sigma * (n_rows as f64 * f64::EPSILON).max(1e-10);
    let lambda_tol = sigma_tol * sigma_tol;

    // Work on the p-by-p residual Gram matrix: its null directions are the
    // covariate combinations absorbed by the incidence span.
    let gram = residual.transpose() * &residual;
    let eigen = nalgebra::SymmetricEigen::new(gram);
    let rank_residual_covariates = eigen
        .eigenvalues
        .iter()
        .filter(|&&l| l > lambda_tol)
        .count();
    let identifiable = rank_incidence == k - 1 && rank_residual_covariates == p;

    let mut confounded_directions = Vec::new();
    if rank_residual_covariates < p {
        for (idx, &lambda) in eigen.eigenvalues.iter().enumerate() {
            if lambda <= lambda_tol {
                confounded_directions.push(eigen.eigenvectors.column(idx).into_owned());
            }
        }
    }

    let angle = principal_angle(&design.incidence, &design.covariates)?;

    Ok(IdentifiabilityReport {
        rank_incidence,
        rank_residual_covariates,
        identifiable,
        confounded_directions,
        angle,
    })
}

/// `(I - M N^+ M^T) X` computed without forming the n-by-n projector.
fn incidence_residual(design: &CovariateDesign) -> Result<DMatrix<f64>> {
    let laplacian = design.graph.laplacian(None)?;
    let pinv = match pinv_laplacian(&laplacian) {
        Ok(p) => p,
        // A disconnected graph still has a well-defined projector; take the
        // eigen route on the Laplacian.
        Err(Error::Disconnected { .. }) => pinv_symmetric(&laplacian, None)?,
        Err(e) => return Err(e),
    };
    let mtx = design.incidence.transpose() * &design.covariates;
    Ok(&design.covariates - &design.incidence * (pinv * mtx))
}

/// Joint least-squares fit of merits and regression coefficients.
#[derive(Debug, Clone)]
pub struct CovariateFit {
    /// Merit estimates satisfying the constraint.
    pub mu_hat: DVector<f64>,
    /// Regression coefficients (constraint-free).
    pub beta_hat: DVector<f64>,
    /// Residual variance estimate, RSS / n.
    pub sigma2_hat: f64,
    /// `sigma2 * (H^T H)^+` with the merit block re-projected onto the
    /// constraint; the beta block is left untouched.
    pub cov: DMatrix<f64>,
    pub diagnostics: IdentifiabilityReport,
}

/// Fits merits and coefficients by the projected formulas: first
/// `beta_hat = (X^T (I - M N^+ M^T) X)^{-1} X^T (I - M N^+ M^T) Y`, then
/// `mu_hat = N^+ (S - M^T X beta_hat)` re-projected onto the constraint.
///
/// The joint normal-equation solve is kept in the tests as an oracle.
pub fn fit_with_covariates(
    design: &CovariateDesign,
    constraint: &Constraint,
) -> Result<CovariateFit> {
    let k = design.items;
    constraint.validate(k)?;
    let report = check_identifiability(design)?;
    if !report.identifiable {
        let reason = if report.rank_incidence < k - 1 {
            "comparison graph is disconnected (rank(M) < K - 1)".to_string()
        } else {
            format!(
                "{} covariate direction(s) lie inside the incidence span",
                design.covariate_count() - report.rank_residual_covariates
            )
        };
        return Err(Error::NotIdentifiable { reason });
    }

    let p = design.covariate_count();
    let n = design.comparison_count();
    let laplacian = design.graph.laplacian(None)?;
    let scores = design.graph.scores();
    let pinv = pinv_laplacian(&laplacian)?;

    let beta_hat = if p > 0 {
        let residual = incidence_residual(design)?;
        let gram = residual.transpose() * &residual;
        let rhs = residual.transpose() * &design.outcomes;
        gram.cholesky()
            .ok_or_else(|| Error::NotIdentifiable {
                reason: "residual covariate Gram matrix is singular".into(),
            })?
            .solve(&rhs)
    } else {
        DVector::zeros(0)
    };

    let adjusted = if p > 0 {
        &scores - design.incidence.transpose() * (&design.covariates * &beta_hat)
    } else {
        scores.clone()
    };
    let base = &pinv * adjusted;
    let v = constraint.vector(k);
    let shift = v.dot(&base) / v.sum();
    let mu_hat = &base - DVector::from_element(k, shift);

    let fitted = &design.incidence * &mu_hat
        + if p > 0 {
            &design.covariates * &beta_hat
        } else {
            DVector::zeros(n)
        };
    let rss = (&design.outcomes - fitted).norm_squared();
    let sigma2_hat = rss / n as f64;

    // (H^T H)^+ via the known kernel (1, 0)/sqrt(K), then re-project the
    // merit block: blockdiag(C_v, I) on both sides.
    let dim = k + p;
    let mut gram = DMatrix::zeros(dim, dim);
    gram.view_mut((0, 0), (k, k)).copy_from(&laplacian);
    if p > 0 {
        let mtx = design.incidence.transpose() * &design.covariates;
        gram.view_mut((0, k), (k, p)).copy_from(&mtx);
        gram.view_mut((k, 0), (p, k)).copy_from(&mtx.transpose());
        let xtx = design.covariates.transpose() * &design.covariates;
        gram.view_mut((k, k), (p, p)).copy_from(&xtx);
    }
    let mut kernel = DVector::zeros(dim);
    for i in 0..k {
        kernel[i] = 1.0 / (k as f64).sqrt();
    }
    let gram_pinv = pinv_symmetric(&gram, Some(&kernel))?;
    let ones = DVector::from_element(k, 1.0);
    let cv = DMatrix::identity(k, k) - &ones * v.transpose() / v.sum();
    let mut transform = DMatrix::identity(dim, dim);
    transform.view_mut((0, 0), (k, k)).copy_from(&cv);
    let cov = &transform * gram_pinv * transform.transpose() * sigma2_hat;

    Ok(CovariateFit {
        mu_hat,
        beta_hat,
        sigma2_hat,
        cov,
        diagnostics: report,
    })
}

/// Plug-in bias `b = N^+ M^T X beta` of the covariate-omitting estimator.
pub fn misspecification_bias(design: &CovariateDesign, beta: &DVector<f64>) -> Result<DVector<f64>> {
    if beta.len() != design.covariate_count() {
        return Err(Error::InvalidConfig {
            reason: format!(
                "beta has length {}, design has {} covariates",
                beta.len(),
                design.covariate_count()
            ),
        });
    }
    let laplacian = design.graph.laplacian(None)?;
    let pinv = pinv_laplacian(&laplacian)?;
    let mtx = design.incidence.transpose() * (&design.covariates * beta);
    Ok(pinv * mtx)
}

/// Conditional average Kullback-Leibler divergence between the normal model
/// with covariates (`mu_t`, `beta`) and the covariate-free normal model
/// (`mu_m`), at error variance `sigma2`:
///
/// `((mu_t - mu_m)^T N (mu_t - mu_m) + 2 beta^T X^T M (mu_t - mu_m)
///   + beta^T X^T X beta) / (2 n sigma2)`.
pub fn akl_normal(
    design: &CovariateDesign,
    mu_t: &DVector<f64>,
    beta: &DVector<f64>,
    mu_m: &DVector<f64>,
    sigma2: f64,
) -> Result<f64> {
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::InvalidConfig {
            reason: format!("sigma2 must be positive, got {sigma2}"),
        });
    }
    let k = design.items;
    if mu_t.len() != k || mu_m.len() != k || beta.len() != design.covariate_count() {
        return Err(Error::InvalidConfig {
            reason: "dimension mismatch in AKL inputs".into(),
        });
    }
    let n = design.comparison_count() as f64;
    let laplacian = design.graph.laplacian(None)?;
    let diff = mu_t - mu_m;
    let quad = (diff.transpose() * &laplacian * &diff)[(0, 0)];
    let cross = 2.0
        * (beta.transpose()
            * (design.covariates.transpose() * (&design.incidence * &diff)))[(0, 0)];
    let xbeta = &design.covariates * beta;
    Ok((quad + cross + xbeta.norm_squared()) / (2.0 * n * sigma2))
}

/// Hajek-Sidak style leverage ratio `max_i ||h_i||^2 / lambda_2(H^T H)`,
/// a diagnostic for the applicability of the normal limit (small is good).
pub fn hajek_sidak_ratio(design: &CovariateDesign) -> Result<f64> {
    let k = design.items;
    let p = design.covariate_count();
    let n = design.comparison_count();
    let dim = k + p;
    let mut gram = DMatrix::zeros(dim, dim);
    let laplacian = design.graph.laplacian(None)?;
    gram.view_mut((0, 0), (k, k)).copy_from(&laplacian);
    if p > 0 {
        let mtx = design.incidence.transpose() * &design.covariates;
        gram.view_mut((0, k), (k, p)).copy_from(&mtx);
        gram.view_mut((k, 0), (p, k)).copy_from(&mtx.transpose());
        let xtx = design.covariates.transpose() * &design.covariates;
        gram.view_mut((k, k), (p, p)).copy_from(&xtx);
    }
    let summary = crate::spectral::spectral_summary(&gram)?;
    let max_row = (0..n)
        .map(|r| {
            let m_norm = design.incidence.row(r).norm_squared();
            let x_norm = if p > 0 {
                design.covariates.row(r).norm_squared()
            } else {
                0.0
            };
            m_norm + x_norm
        })
        .fold(0.0f64, f64::max);
    Ok(max_row / summary.lambda2)
}
