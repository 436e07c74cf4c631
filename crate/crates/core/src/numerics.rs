//! Dense symmetric / PSD linear algebra shared by every other module.
//!
//! Decompositions are delegated to `faer` built without its thread pool, so
//! results depend only on the input bits. Rank decisions all go through a
//! single relative cutoff: an eigenvalue (or singular value) is kept when it
//! exceeds `rel_tol` times the largest one.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{invalid, Error, Result};

/// Default relative truncation threshold for eigen/singular values.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Largest tolerated `|S_ij - S_ji|`, relative to `max(1, max |S|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Positive part of a symmetric eigendecomposition, `S ≈ V diag(λ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct PsdEig {
    /// Descending, all strictly positive.
    pub eigenvalues: Vec<f64>,
    /// `p × r`, orthonormal columns matching `eigenvalues`.
    pub eigenvectors: Mat<f64>,
}

impl PsdEig {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Mat<f64> {
        let v = &self.eigenvectors;
        let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * self.eigenvalues[j]);
        &scaled * v.transpose()
    }
}

pub fn ensure_square(m: MatRef<'_, f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(invalid(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn ensure_symmetric(m: MatRef<'_, f64>, what: &str) -> Result<()> {
    ensure_square(m, what)?;
    let n = m.nrows();
    let mut scale = 1.0f64;
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(m[(i, j)].abs());
            if i > j {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
    }
    if !asym.is_finite() || asym > SYMMETRY_TOL * scale {
        return Err(invalid(format!(
            "{what} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Full spectrum of a symmetric matrix, eigenvalues descending.
pub fn sym_eig(s: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    ensure_symmetric(s, "matrix")?;
    let n = s.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| invalid(format!("eigendecomposition failed: {e:?}")))?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();
    // faer returns ascending order
    let values: Vec<f64> = (0..n).rev().map(|i| vals[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| vecs[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Eigenvalues only, descending.
pub fn sym_eigenvalues(s: MatRef<'_, f64>) -> Result<Vec<f64>> {
    ensure_symmetric(s, "matrix")?;
    if s.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut vals = s
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| invalid(format!("eigendecomposition failed: {e:?}")))?;
    vals.reverse();
    Ok(vals)
}

/// Eigenpairs of a symmetric matrix with eigenvalue above `rel_tol · λ_max`.
///
/// Returns an empty decomposition when `λ_max ≤ 0`.
pub fn psd_eig(s: MatRef<'_, f64>, rel_tol: f64) -> Result<PsdEig> {
    check_rel_tol(rel_tol)?;
    let (values, vectors) = sym_eig(s)?;
    let n = s.nrows();
    let lead = values.first().copied().unwrap_or(0.0);
    if lead <= 0.0 {
        return Ok(PsdEig {
            eigenvalues: Vec::new(),
            eigenvectors: Mat::zeros(n, 0),
        });
    }
    let cutoff = rel_tol * lead;
    let r = values.iter().take_while(|&&v| v > cutoff).count();
    Ok(PsdEig {
        eigenvalues: values[..r].to_vec(),
        eigenvectors: vectors.subcols(0, r).to_owned(),
    })
}

fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(invalid(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    Ok(())
}

/// Thin SVD truncated at `rel_tol · σ_max`: `(U r-cols, σ, V r-cols)`.
pub fn truncated_svd(m: MatRef<'_, f64>, rel_tol: f64) -> (Mat<f64>, Vec<f64>, Mat<f64>) {
    let (p, q) = (m.nrows(), m.ncols());
    if p == 0 || q == 0 {
        return (Mat::zeros(p, 0), Vec::new(), Mat::zeros(q, 0));
    }
    let svd = m
        .thin_svd()
        .expect("SVD of a finite matrix does not fail to converge");
    let sv = svd.S().column_vector();
    let k = sv.nrows();
    let lead = if k > 0 { sv[0] } else { 0.0 };
    let r = if lead > 0.0 {
        (0..k).take_while(|&i| sv[i] > rel_tol * lead).count()
    } else {
        0
    };
    let sigma: Vec<f64> = (0..r).map(|i| sv[i]).collect();
    (
        svd.U().subcols(0, r).to_owned(),
        sigma,
        svd.V().subcols(0, r).to_owned(),
    )
}

/// Moore–Penrose pseudo-inverse (`q × p` for a `p × q` input).
pub fn pseudo_inverse(m: MatRef<'_, f64>, rel_tol: f64) -> Mat<f64> {
    let (u, sigma, v) = truncated_svd(m, rel_tol);
    let v_scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] / sigma[j]);
    &v_scaled * u.transpose()
}

/// Solves `(S + ridge·I) X = B` for symmetric PSD `S`.
///
/// Cholesky factorization followed by two rounds of iterative refinement.
pub fn solve_regularized(s: MatRef<'_, f64>, b: MatRef<'_, f64>, ridge: f64) -> Result<Mat<f64>> {
    if !(ridge > 0.0) || !ridge.is_finite() {
        return Err(invalid(format!("ridge must be positive, got {ridge}")));
    }
    ensure_square(s, "system matrix")?;
    if b.nrows() != s.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} rows, system has {}",
            b.nrows(),
            s.nrows()
        )));
    }
    let n = s.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, b.ncols()));
    }
    let mut shifted = s.to_owned();
    for i in 0..n {
        shifted[(i, i)] += ridge;
    }
    let llt = shifted
        .llt(Side::Lower)
        .map_err(|_| invalid("regularized system is not positive definite"))?;
    let mut x = llt.solve(b);
    for _ in 0..2 {
        let r = b - &shifted * &x;
        x += llt.solve(&r);
    }
    Ok(x)
}

/// Largest singular value.
pub fn spectral_norm(m: MatRef<'_, f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = m
        .singular_values()
        .expect("SVD of a finite matrix does not fail to converge");
    sv.first().copied().unwrap_or(0.0)
}

/// Spectral norm of a symmetric matrix, `max |λ|`; cheaper than the SVD route.
pub fn sym_spectral_norm(s: MatRef<'_, f64>) -> Result<f64> {
    let vals = sym_eigenvalues(s)?;
    Ok(vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

pub fn trace_of(m: MatRef<'_, f64>) -> Result<f64> {
    ensure_square(m, "trace argument")?;
    Ok((0..m.nrows()).map(|i| m[(i, i)]).sum())
}

pub fn frobenius(m: MatRef<'_, f64>) -> f64 {
    m.norm_l2()
}

/// Matrix from a vector of columns of equal length.
pub fn col_matrix(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn column(m: MatRef<'_, f64>, j: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `M v` for a dense vector.
pub fn mat_vec(m: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.ncols(), v.len());
    let mut out = vec![0.0; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

/// `Mᵀ v` for a dense vector.
pub fn mat_t_vec(m: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.nrows(), v.len());
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)] * v[i]).sum())
        .collect()
}
