//! Symmetric eigendecomposition, Laplacian Moore-Penrose inverses and
//! spectral diagnostics.
//!
//! The default pseudoinverse route for Laplacians is the rank-one update
//! identity `N^+ = (N + J/K)^{-1} - J/K` (one symmetric solve, no
//! eigendecomposition). The eigendecomposition route is kept as
//! [`pinv_symmetric`] for generic PSD matrices and as a cross-check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::components_from_adjacency;

/// Eigenvalue summary of a Laplacian together with the precision functionals
/// of its pseudoinverse.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Eigenvalues sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// Algebraic connectivity, the second-smallest eigenvalue.
    pub lambda2: f64,
    /// Unit eigenvector of `lambda2` (sign fixed so the first nonzero
    /// component is positive).
    pub fiedler: DVector<f64>,
    /// `trace(N^+) = sum of 1/lambda` over eigenvalues above tolerance.
    pub pinv_trace: f64,
    /// `1/lambda2`; infinite when the graph is disconnected.
    pub pinv_max_eigenvalue: f64,
}

/// Numerical rank tolerance: `dim * eps * lambda_max`.
fn rank_tolerance(dim: usize, lambda_max: f64) -> f64 {
    dim as f64 * f64::EPSILON * lambda_max.abs().max(1e-300)
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let scale = a.amax().max(1e-300);
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::NonSymmetric);
            }
        }
    }
    Ok(())
}

/// Moore-Penrose inverse of a connected-graph Laplacian via
/// `N^+ = (N + J/K)^{-1} - J/K`.
///
/// Fails with the connected components named when the Laplacian belongs to a
/// disconnected graph (the merit differences across components are not
/// estimable).
pub fn pinv_laplacian(n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(n)?;
    let k = n.nrows();
    let components = laplacian_components(n);
    if components.len() != 1 {
        return Err(Error::Disconnected { components });
    }

    let jk = 1.0 / k as f64;
    let mut shifted = n.clone();
    for i in 0..k {
        for j in 0..k {
            shifted[(i, j)] += jk;
        }
    }
    // N + J/K is positive definite exactly when the graph is connected.
    match shifted.cholesky() {
        Some(chol) => {
            let mut result = chol.inverse();
            for i in 0..k {
                for j in 0..k {
                    result[(i, j)] -= jk;
                }
            }
            Ok(result)
        }
        // Connected but numerically on the edge; the eigen route is slower
        // and more forgiving.
        None => Ok(pinv_eigen(n, rank_tolerance(k, max_eigen_bound(n)))),
    }
}

/// Connected components read off the off-diagonal sparsity pattern.
fn laplacian_components(n: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let k = n.nrows();
    let scale = n.amax().max(1e-300);
    let mut adjacency = vec![Vec::new(); k];
    for i in 0..k {
        for j in (i + 1)..k {
            if n[(i, j)].abs() > 1e-12 * scale {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    components_from_adjacency(&adjacency)
}

fn max_eigen_bound(a: &DMatrix<f64>) -> f64 {
    // Gershgorin bound, enough for a rank tolerance.
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Moore-Penrose inverse of a symmetric PSD matrix.
///
/// When `known_kernel` is a unit vector spanning the kernel (rank deficiency
/// one), the rank-one update `(A + qq^T)^{-1} - qq^T` is used; otherwise the
/// eigendecomposition route with tolerance `dim * eps * lambda_max`.
pub fn pinv_symmetric(a: &DMatrix<f64>, known_kernel: Option<&DVector<f64>>) -> Result<DMatrix<f64>> {
    check_symmetric(a)?;
    let dim = a.nrows();
    if let Some(q) = known_kernel {
        let norm = q.norm();
        if norm > 0.0 {
            let q = q / norm;
            let qqt = &q * q.transpose();
            let shifted = a + &qqt;
            if let Some(chol) = shifted.cholesky() {
                return Ok(chol.inverse() - qqt);
            }
            // Not rank dim-1 after all; fall through to the eigen route.
        }
    }
    let eigen = SymmetricEigen::new(a.clone());
    let lambda_max = eigen.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    Ok(pinv_from_eigen(&eigen, rank_tolerance(dim, lambda_max)))
}

fn pinv_eigen(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let eigen = SymmetricEigen::new(a.clone());
    pinv_from_eigen(&eigen, tol)
}

fn pinv_from_eigen(eigen: &SymmetricEigen<f64, nalgebra::Dyn>, tol: f64) -> DMatrix<f64> {
    let dim = eigen.eigenvalues.len();
    let mut result = DMatrix::zeros(dim, dim);
    for (idx, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let u = eigen.eigenvectors.column(idx);
            result += u * u.transpose() / lambda;
        }
    }
    result
}

/// Eigenvalues, algebraic connectivity, Fiedler vector and the precision
/// functionals `trace(N^+)` and `1/lambda2`.
pub fn spectral_summary(n: &DMatrix<f64>) -> Result<SpectralSummary> {
    check_symmetric(n)?;
    let dim = n.nrows();
    let eigen = SymmetricEigen::new(n.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[a]
            .partial_cmp(&eigen.eigenvalues[b])
            .unwrap()
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0).abs();
    let tol = rank_tolerance(dim, lambda_max);

    let lambda2 = if dim > 1 { eigenvalues[1] } else { 0.0 };
    let mut fiedler = if dim > 1 {
        eigen.eigenvectors.column(order[1]).into_owned()
    } else {
        DVector::zeros(dim)
    };
    if let Some(first) = fiedler.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            fiedler = -fiedler;
        }
    }

    let pinv_trace = eigenvalues
        .iter()
        .filter(|&&l| l > tol)
        .map(|&l| 1.0 / l)
        .sum();
    let pinv_max_eigenvalue = if lambda2 > tol { 1.0 / lambda2 } else { f64::INFINITY };

    Ok(SpectralSummary {
        eigenvalues,
        lambda2,
        fiedler,
        pinv_trace,
        pinv_max_eigenvalue,
    })
}

/// Orthonormal basis for the column span, from the singular vectors with
/// singular value above `dim * eps * sigma_max`.
fn column_span_basis(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, false);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    if sigma_max <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * sigma_max;
    let u = svd.u.as_ref().expect("u requested");
    let cols: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::zeros(a.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    Ok(basis)
}

/// Smallest principal angle between the column spans of `a` and `b`,
/// in `[0, pi/2]`. The cosine is the largest singular value of `Qa^T Qb`
/// for orthonormal bases `Qa`, `Qb`; near zero angle the arccos loses
/// precision, so the sine route through `(I - Qa Qa^T) Qb` is used there.
pub fn principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let qa = column_span_basis(a)?;
    let qb = column_span_basis(b)?;
    let cross = qa.transpose() * &qb;
    let svd = cross.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cos = sigma_max.clamp(0.0, 1.0);
    if cos * cos < 0.5 {
        return Ok(cos.acos());
    }
    let residual = &qb - &qa * cross;
    let svd = residual.svd(false, false);
    let sin = svd
        .singular_values
        .iter()
        .fold(f64::INFINITY, |m, &s| m.min(s))
        .clamp(0.0, 1.0);
    Ok(sin.asin())
}

/// Numerical rank with tolerance `max(rows, cols) * eps * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let svd = a.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    if sigma_max <= 0.0 {
        return 0;
    }
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * sigma_max;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Symmetric square root of a PSD matrix, eigenvalues below tolerance
/// truncated to zero. Used to draw from singular normal laws.
pub fn sqrt_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(a)?;
    let dim = a.nrows();
    let eigen = SymmetricEigen::new(a.clone());
    let lambda_max = eigen.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let tol = rank_tolerance(dim, lambda_max);
    let mut result = DMatrix::zeros(dim, dim);
    for (idx, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let u = eigen.eigenvectors.column(idx);
            result += u * u.transpose() * lambda.sqrt();
        }
    }
    Ok(result)
}
