//! Exact approximation errors against the non-approximate optimum, the LLA
//! error bound, and structural checks on Gram matrices and projected features.
//!
//! Coefficient arguments are `n × c` matrices, one column per one-vs-rest
//! class function. Per-class errors are aggregated by root-sum-of-squares;
//! the bound uses Frobenius norms of the coefficient matrices, which keeps it
//! dominating the aggregated error.

use faer::{Mat, MatRef};

use crate::data::Dataset;
use crate::error::{mismatch, Result};
use crate::kernel::KernelConfig;
use crate::machines::{fit_weights, SolverConfig};
use crate::numerics::{self, pseudo_inverse};
use crate::nystrom::{gram_error_norms, GramErrorNorms, NystromModel};
use crate::sampling::{LandmarkSet, Strategy};

/// Round-off below this is reported; anything above it is clamped silently.
pub const NEGATIVE_SLACK: f64 = 1e-8;

/// Row-rank threshold for [`span_rank_certificate`], relative to `σ_max`.
pub const RANK_CERT_TOL: f64 = 1e-8;

pub const AGGREGATION: &str = "root-sum-of-squares over one-vs-rest classes";

fn check_coefficients(k: MatRef<'_, f64>, a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<()> {
    let n = k.nrows();
    if k.ncols() != n || a.nrows() != n || b.nrows() != n || a.ncols() != b.ncols() {
        return Err(mismatch(format!(
            "K is {}x{}, coefficients are {}x{} and {}x{}",
            k.nrows(),
            k.ncols(),
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Per-class inner products `xₖᵀ yₖ`.
fn col_dots(x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> Vec<f64> {
    (0..x.ncols())
        .map(|j| (0..x.nrows()).map(|i| x[(i, j)] * y[(i, j)]).sum())
        .collect()
}

/// Per-class squared errors before clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredError {
    pub raw: Vec<f64>,
}

impl SquaredError {
    /// Root-sum-of-squares of the clamped per-class errors.
    pub fn value(&self) -> f64 {
        self.raw.iter().map(|r| r.max(0.0)).sum::<f64>().sqrt()
    }

    /// Classes whose square round-off pushed below `−NEGATIVE_SLACK`.
    pub fn suspicious(&self) -> usize {
        self.raw.iter().filter(|&&r| r < -NEGATIVE_SLACK).count()
    }
}

/// `α̂ᵀK̃α̂ + α̃ᵀKα̃ − 2α̂ᵀK̃α̃` per class, with `K̃` applied as
/// `Gᵀ(G·)`.
pub fn err_lla_squared(
    alpha_hat: MatRef<'_, f64>,
    alpha_tilde: MatRef<'_, f64>,
    k: MatRef<'_, f64>,
    g: MatRef<'_, f64>,
) -> Result<SquaredError> {
    check_coefficients(k, alpha_hat, alpha_tilde)?;
    if g.ncols() != k.nrows() {
        return Err(mismatch("G and K disagree on n"));
    }
    let k_tilde_alpha = k * alpha_tilde;
    Ok(lla_squared_with(alpha_hat, alpha_tilde, k_tilde_alpha.as_ref(), g))
}

fn lla_squared_with(
    alpha_hat: MatRef<'_, f64>,
    alpha_tilde: MatRef<'_, f64>,
    k_alpha_tilde: MatRef<'_, f64>,
    g: MatRef<'_, f64>,
) -> SquaredError {
    let ga_hat = g * alpha_hat;
    let ga_tilde = g * alpha_tilde;
    let hh = col_dots(ga_hat.as_ref(), ga_hat.as_ref());
    let tt = col_dots(alpha_tilde, k_alpha_tilde);
    let ht = col_dots(ga_hat.as_ref(), ga_tilde.as_ref());
    SquaredError {
        raw: (0..hh.len()).map(|c| hh[c] + tt[c] - 2.0 * ht[c]).collect(),
    }
}

pub fn err_lla(
    alpha_hat: MatRef<'_, f64>,
    alpha_tilde: MatRef<'_, f64>,
    k: MatRef<'_, f64>,
    g: MatRef<'_, f64>,
) -> Result<f64> {
    Ok(err_lla_squared(alpha_hat, alpha_tilde, k, g)?.value())
}

/// `(α̃ − α̂)ᵀ K (α̃ − α̂)` per class.
pub fn err_gsa_squared(alpha_hat: MatRef<'_, f64>, alpha_tilde: MatRef<'_, f64>, k: MatRef<'_, f64>) -> Result<SquaredError> {
    check_coefficients(k, alpha_hat, alpha_tilde)?;
    let diff = alpha_tilde - alpha_hat;
    let kd = k * &diff;
    Ok(SquaredError {
        raw: col_dots(diff.as_ref(), kd.as_ref()),
    })
}

pub fn err_gsa(alpha_hat: MatRef<'_, f64>, alpha_tilde: MatRef<'_, f64>, k: MatRef<'_, f64>) -> Result<f64> {
    Ok(err_gsa_squared(alpha_hat, alpha_tilde, k)?.value())
}

/// `‖K − K̃‖₂^½ ‖α̃‖_F + ‖K‖₂^½ ‖α̂ − α̃‖_F` from precomputed spectral norms.
pub fn bound_from_norms(
    k_spectral: f64,
    residual_spectral: f64,
    alpha_hat: MatRef<'_, f64>,
    alpha_tilde: MatRef<'_, f64>,
) -> f64 {
    let diff = alpha_hat - alpha_tilde;
    residual_spectral.max(0.0).sqrt() * alpha_tilde.norm_l2() + k_spectral.max(0.0).sqrt() * diff.norm_l2()
}

pub fn bound_lla(
    k: MatRef<'_, f64>,
    g: MatRef<'_, f64>,
    alpha_hat: MatRef<'_, f64>,
    alpha_tilde: MatRef<'_, f64>,
) -> Result<f64> {
    check_coefficients(k, alpha_hat, alpha_tilde)?;
    let norms = gram_error_norms(k, g)?;
    let k_spectral = numerics::sym_spectral_norm(k)?;
    Ok(bound_from_norms(k_spectral, norms.spectral_norm, alpha_hat, alpha_tilde))
}

/// Diagnostic for the hinge-loss rate: `err_lla / ‖K − K̃‖₂^¼`; `None` when
/// the residual vanishes.
pub fn ksvm_rate_ratio(err_lla: f64, residual_spectral: f64) -> Option<f64> {
    (residual_spectral > 0.0).then(|| err_lla / residual_spectral.powf(0.25))
}

/// `‖K (K† k) − k‖`, computed as the distance from `k` to the retained
/// eigenspace of `K` (eigenvalues above `rel_tol · λ_max`).
pub fn column_inclusion_residual(k_full: MatRef<'_, f64>, kvec: &[f64], rel_tol: f64) -> Result<f64> {
    if kvec.len() != k_full.nrows() {
        return Err(mismatch("kernel column and K disagree on n"));
    }
    let eig = numerics::psd_eig(k_full, rel_tol)?;
    let coeffs = numerics::mat_t_vec(eig.eigenvectors.as_ref(), kvec);
    let proj = numerics::mat_vec(eig.eigenvectors.as_ref(), &coeffs);
    let r: Vec<f64> = kvec.iter().zip(&proj).map(|(a, b)| a - b).collect();
    Ok(numerics::norm2(&r))
}

/// [`column_inclusion_residual`] for every column of `kvecs` (`n × t`), with
/// one eigendecomposition of `K`.
pub fn column_inclusion_residuals(k_full: MatRef<'_, f64>, kvecs: MatRef<'_, f64>, rel_tol: f64) -> Result<Vec<f64>> {
    if kvecs.nrows() != k_full.nrows() {
        return Err(mismatch("kernel columns and K disagree on n"));
    }
    let eig = numerics::psd_eig(k_full, rel_tol)?;
    let v = eig.eigenvectors.as_ref();
    let proj = v * (v.transpose() * kvecs);
    let r = kvecs - &proj;
    Ok((0..r.ncols()).map(|j| r.col(j).norm_l2()).collect())
}

/// Cutoff for the range of `K` in the inclusion check: eigenvalues at the
/// level of double-precision round-off are treated as zero.
pub fn inclusion_rel_tol(n: usize) -> f64 {
    (n.max(1) as f64 * f64::EPSILON).min(0.5)
}

/// True iff `k` lies in the range of `K` up to `tol · max(1, ‖k‖)`.
pub fn column_inclusion_check(k_full: MatRef<'_, f64>, kvec: &[f64], tol: f64) -> Result<bool> {
    let r = column_inclusion_residual(k_full, kvec, inclusion_rel_tol(k_full.nrows()))?;
    Ok(r <= tol * numerics::norm2(kvec).max(1.0))
}

/// Numerical row rank of `G` (singular values above `1e-8 · σ_max`).
pub fn numerical_row_rank(g: MatRef<'_, f64>) -> usize {
    if g.nrows() == 0 || g.ncols() == 0 {
        return 0;
    }
    let sv = g
        .singular_values()
        .expect("SVD of a finite matrix does not fail to converge");
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > RANK_CERT_TOL * max).count()
}

/// Full row rank of `G`: the projected training points span the basis, so
/// GSA and LLA optimize over the same function space.
pub fn span_rank_certificate(g: MatRef<'_, f64>) -> bool {
    g.nrows() > 0 && numerical_row_rank(g) == g.nrows()
}

/// The non-approximate optimum `f*` on a training set, with the products the
/// error formulas reuse.
#[derive(Debug, Clone)]
pub struct ExactReference {
    pub k: Mat<f64>,
    /// `α̃`, `n × c`.
    pub alpha: Mat<f64>,
    /// `K α̃`.
    pub k_alpha: Mat<f64>,
    pub k_spectral: f64,
    /// The `m = n` model; predictions from it are the exact predictions.
    pub nystrom: NystromModel,
    pub weights: Mat<f64>,
}

impl ExactReference {
    /// Runs the shared pipeline with every training point as a landmark, in
    /// index order, and converts the weights through `G†`.
    pub fn compute(
        ds: &Dataset,
        kernel: KernelConfig,
        k: Mat<f64>,
        solver: &SolverConfig,
        rel_tol: f64,
    ) -> Result<Self> {
        let all = LandmarkSet::from_selection(ds, (0..ds.len()).collect(), Strategy::Uniform, 0)?;
        let nystrom = NystromModel::build(&ds.rows, all, kernel, Some(k.as_ref()), rel_tol)?;
        let weights = fit_weights(nystrom.features.as_ref(), &ds.labels, ds.n_classes(), solver)?;
        let alpha = pseudo_inverse(nystrom.features.as_ref(), rel_tol) * &weights;
        Self::from_alpha(k, alpha, nystrom, weights)
    }

    pub fn from_alpha(k: Mat<f64>, alpha: Mat<f64>, nystrom: NystromModel, weights: Mat<f64>) -> Result<Self> {
        check_coefficients(k.as_ref(), alpha.as_ref(), alpha.as_ref())?;
        let k_alpha = &k * &alpha;
        let k_spectral = numerics::sym_spectral_norm(k.as_ref())?;
        Ok(Self {
            k,
            alpha,
            k_alpha,
            k_spectral,
            nystrom,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }
}

/// Errors of one approximate model against the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxErrors {
    pub err_lla: f64,
    pub err_gsa: f64,
    pub bound_lla: f64,
    pub gram: GramErrorNorms,
    /// Squared errors that came out below `−NEGATIVE_SLACK` before clamping.
    pub clamped: usize,
}

impl ApproxErrors {
    pub fn bound_holds(&self, slack: f64) -> bool {
        self.bound_lla >= self.err_lla - slack
    }

    pub fn ksvm_ratio(&self) -> Option<f64> {
        ksvm_rate_ratio(self.err_lla, self.gram.spectral_norm)
    }
}

/// All exact errors for a model with features `G` and canonical coefficients
/// `α̂ = G†ŵ` (shared by LLA and GSA).
pub fn approximation_errors(
    reference: &ExactReference,
    g: MatRef<'_, f64>,
    alpha_hat: MatRef<'_, f64>,
) -> Result<ApproxErrors> {
    let k = reference.k.as_ref();
    check_coefficients(k, alpha_hat, reference.alpha.as_ref())?;
    let gram = gram_error_norms(k, g)?;
    let lla = lla_squared_with(alpha_hat, reference.alpha.as_ref(), reference.k_alpha.as_ref(), g);
    let gsa = err_gsa_squared(alpha_hat, reference.alpha.as_ref(), k)?;
    let bound = bound_from_norms(reference.k_spectral, gram.spectral_norm, alpha_hat, reference.alpha.as_ref());
    Ok(ApproxErrors {
        err_lla: lla.value(),
        err_gsa: gsa.value(),
        bound_lla: bound,
        gram,
        clamped: lla.suspicious() + gsa.suspicious(),
    })
}

/// One trial's report.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub strategy: Strategy,
    pub seed: u64,
    pub m: usize,
    pub s: usize,
    /// `m / n`.
    pub ratio: f64,
    /// `None` when exact analysis was skipped.
    pub errors: Option<ApproxErrors>,
    pub acc_lla: f64,
    pub acc_gsa: f64,
    pub acc_exact: Option<f64>,
}

impl ErrorReport {
    pub fn exact_analysis_skipped(&self) -> bool {
        self.errors.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nystrom::{project_train, standard_basis};
    use crate::rng::SeededRng;

    fn random(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
        let mut r = SeededRng::new(seed);
        Mat::from_fn(rows, cols, |_, _| r.normal())
    }

    fn sum_dot(x: MatRef<'_, f64>, y: MatRef<'_, f64>) -> f64 {
        col_dots(x, y).iter().sum()
    }

    fn gram_of(z: &Mat<f64>) -> Mat<f64> {
        z.transpose() * z
    }

    #[test]
    fn identical_coefficients_exact_gram_give_zero() {
        let z = random(6, 6, 1);
        let k = gram_of(&z);
        let a = random(6, 2, 2);
        assert!(err_lla(a.as_ref(), a.as_ref(), k.as_ref(), z.as_ref()).unwrap() < 1e-6);
        assert_eq!(err_gsa(a.as_ref(), a.as_ref(), k.as_ref()).unwrap(), 0.0);
        assert!(bound_lla(k.as_ref(), z.as_ref(), a.as_ref(), a.as_ref()).unwrap() < 1e-6);
    }

    #[test]
    fn zero_reference_collapses_to_feature_norm() {
        let z = random(5, 8, 3);
        let k = gram_of(&z);
        let g = random(3, 8, 4);
        let a = random(8, 1, 5);
        let zero = Mat::<f64>::zeros(8, 1);
        let e = err_lla(a.as_ref(), zero.as_ref(), k.as_ref(), g.as_ref()).unwrap();
        let ga = &g * &a;
        assert!((e - ga.norm_l2()).abs() < 1e-12);
    }

    #[test]
    fn gsa_identity_kernel_is_euclidean() {
        let k = Mat::<f64>::identity(7, 7);
        let a = random(7, 1, 6);
        let b = random(7, 1, 7);
        let e = err_gsa(a.as_ref(), b.as_ref(), k.as_ref()).unwrap();
        assert!((e - (&a - &b).norm_l2()).abs() < 1e-12);
    }

    #[test]
    fn bound_isolates_first_term() {
        let z = random(4, 6, 8);
        let k = gram_of(&z);
        let g = random(2, 6, 9);
        let a = random(6, 1, 10);
        let b = bound_lla(k.as_ref(), g.as_ref(), a.as_ref(), a.as_ref()).unwrap();
        let r = gram_error_norms(k.as_ref(), g.as_ref()).unwrap().spectral_norm;
        assert!((b - r.sqrt() * a.norm_l2()).abs() < 1e-10);
    }

    #[test]
    fn sign_symmetry_and_expansion_identity() {
        let z = random(6, 10, 11);
        let k = gram_of(&z);
        let g = random(3, 10, 12);
        let ah = random(10, 2, 13);
        let at = random(10, 2, 14);
        let e1: f64 = err_lla_squared(ah.as_ref(), at.as_ref(), k.as_ref(), g.as_ref()).unwrap().raw.iter().sum();
        let (nh, nt) = (-&ah, -&at);
        let e2: f64 = err_lla_squared(nh.as_ref(), nt.as_ref(), k.as_ref(), g.as_ref()).unwrap().raw.iter().sum();
        assert!((e1 - e2).abs() <= 1e-10 * e1.abs().max(1.0));
        let kt = g.transpose() * &g;
        let d = &ah - &at;
        let regrouped = sum_dot(d.as_ref(), (&kt * &d).as_ref()) + sum_dot(at.as_ref(), ((&k - &kt) * &at).as_ref());
        assert!((e1 - regrouped).abs() <= 1e-8 * e1.abs().max(1.0));
    }

    #[test]
    fn column_inclusion_cases() {
        let z = random(4, 9, 15);
        let k = gram_of(&z);
        let col: Vec<f64> = (0..9).map(|i| k[(i, 2)]).collect();
        assert!(column_inclusion_check(k.as_ref(), &col, 1e-8).unwrap());
        let eig = numerics::psd_eig(k.as_ref(), 1e-10).unwrap();
        let mut off: Vec<f64> = (0..9).map(|i| (0..9).map(|j| k[(i, j)]).sum()).collect();
        // a unit vector orthogonal to the rank-4 range of K
        let mut v: Vec<f64> = (0..9).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let c = numerics::mat_t_vec(eig.eigenvectors.as_ref(), &v);
        let p = numerics::mat_vec(eig.eigenvectors.as_ref(), &c);
        for (vi, pi) in v.iter_mut().zip(&p) {
            *vi -= pi;
        }
        let nv = numerics::norm2(&v);
        for (o, vi) in off.iter_mut().zip(&v) {
            *o += vi / nv;
        }
        assert!(!column_inclusion_check(k.as_ref(), &off, 1e-6).unwrap());
        let both = Mat::from_fn(9, 2, |i, j| if j == 0 { col[i] } else { off[i] });
        let r = column_inclusion_residuals(k.as_ref(), both.as_ref(), 1e-10).unwrap();
        assert!(r[0] < 1e-8 && (r[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rank_certificate() {
        let g = random(4, 20, 16);
        assert!(span_rank_certificate(g.as_ref()));
        let mut bad = g.clone();
        for j in 0..20 {
            bad[(2, j)] = 0.0;
        }
        assert!(!span_rank_certificate(bad.as_ref()));
        assert!(!span_rank_certificate(Mat::<f64>::zeros(0, 5).as_ref()));
    }

    #[test]
    fn multiclass_aggregate_is_rss_and_bounded() {
        for seed in 0..20 {
            let z = random(5, 12, 100 + seed);
            let k = gram_of(&z);
            let idx = [0usize, 3, 7];
            let k_mm = Mat::from_fn(3, 3, |i, j| k[(idx[i], idx[j])]);
            let k_mn = Mat::from_fn(3, 12, |i, j| k[(idx[i], j)]);
            let a = standard_basis(k_mm.as_ref(), 1e-10).unwrap();
            let g = project_train(a.as_ref(), k_mn.as_ref()).unwrap();
            let ah = random(12, 3, 300 + seed);
            let at = random(12, 3, 400 + seed);
            let e = err_lla(ah.as_ref(), at.as_ref(), k.as_ref(), g.as_ref()).unwrap();
            let b = bound_lla(k.as_ref(), g.as_ref(), ah.as_ref(), at.as_ref()).unwrap();
            let per_class: f64 = (0..3)
                .map(|c| {
                    let (x, y) = (ah.subcols(c, 1), at.subcols(c, 1));
                    err_lla(x, y, k.as_ref(), g.as_ref()).unwrap().powi(2)
                })
                .sum();
            assert!((e - per_class.sqrt()).abs() <= 1e-9 * e.max(1.0));
            assert!(b >= e - 1e-6);
        }
    }

    #[test]
    fn ksvm_ratio_is_optional() {
        assert_eq!(ksvm_rate_ratio(1.0, 0.0), None);
        assert_eq!(ksvm_rate_ratio(2.0, 16.0), Some(1.0));
    }
}
