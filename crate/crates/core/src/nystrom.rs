//! Standard Nyström basis and the projected feature matrices built on it.
//!
//! With `K_mm = V Σ² Vᵀ` (positive part), the basis map is `A = V Σ⁻¹`, so
//! the feature-space vectors `B = C A` are orthonormal: `Aᵀ K_mm A = I`.
//! Training points are represented by `G = Aᵀ K_mn` and the approximate Gram
//! matrix is `K̃ = Gᵀ G`, which is only formed for diagnostics.

use faer::{Mat, MatRef};

use crate::data::SparseVec;
use crate::error::{mismatch, Error, Result};
use crate::kernel::{gram, gram_sym, kernel_column, KernelConfig};
use crate::numerics::{self, psd_eig};
use crate::sampling::{LandmarkSet, Landmarks};

/// `A = V Σ⁻¹` from the positive spectrum of `K_mm`.
pub fn standard_basis(k_mm: MatRef<'_, f64>, rel_tol: f64) -> Result<Mat<f64>> {
    let eig = psd_eig(k_mm, rel_tol)?;
    if eig.rank() == 0 {
        return Err(Error::EmptyBasis);
    }
    let v = &eig.eigenvectors;
    Ok(Mat::from_fn(v.nrows(), v.ncols(), |i, j| {
        v[(i, j)] / eig.eigenvalues[j].sqrt()
    }))
}

/// `G = Aᵀ K_mn`.
pub fn project_train(basis: MatRef<'_, f64>, k_mn: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if basis.nrows() != k_mn.nrows() {
        return Err(mismatch(format!(
            "basis has {} rows, K_mn has {}",
            basis.nrows(),
            k_mn.nrows()
        )));
    }
    Ok(basis.transpose() * k_mn)
}

/// Landmark kernel blocks `(K_mn, K_mm)`.
///
/// Combination landmarks need the full training Gram matrix: `K_mn = Pᵀ K`,
/// `K_mm = Pᵀ K P` (symmetrized).
pub fn kernel_blocks(
    landmarks: &LandmarkSet,
    train: &[SparseVec],
    full_gram: Option<MatRef<'_, f64>>,
    kernel: &KernelConfig,
) -> Result<(Mat<f64>, Mat<f64>)> {
    match &landmarks.landmarks {
        Landmarks::Points { points, .. } => Ok((gram(points, train, kernel), gram_sym(points, kernel))),
        Landmarks::Combination { weights } => {
            let k = full_gram.ok_or_else(|| {
                Error::InvalidInput("combination landmarks require the full training Gram matrix".into())
            })?;
            let n = train.len();
            if weights.nrows() != n || k.nrows() != n || k.ncols() != n {
                return Err(mismatch(format!(
                    "weights {}x{}, Gram {}x{}, {n} training rows",
                    weights.nrows(),
                    weights.ncols(),
                    k.nrows(),
                    k.ncols()
                )));
            }
            let k_mn = weights.transpose() * k;
            let raw = &k_mn * weights;
            let m = raw.nrows();
            let k_mm = Mat::from_fn(m, m, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)]));
            Ok((k_mn, k_mm))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NystromModel {
    pub landmarks: LandmarkSet,
    pub kernel: KernelConfig,
    pub rel_tol: f64,
    /// `A`, `m × s`.
    pub basis: Mat<f64>,
    /// `G`, `s × n`.
    pub features: Mat<f64>,
    pub k_mn: Mat<f64>,
    pub k_mm: Mat<f64>,
    /// Training rows, kept for GSA prediction and combination landmarks.
    pub train_rows: Option<Vec<SparseVec>>,
}

impl NystromModel {
    /// Runs the landmark stage of training: kernel blocks, basis map and
    /// projected features.
    pub fn build(
        train: &[SparseVec],
        landmarks: LandmarkSet,
        kernel: KernelConfig,
        full_gram: Option<MatRef<'_, f64>>,
        rel_tol: f64,
    ) -> Result<Self> {
        let (k_mn, k_mm) = kernel_blocks(&landmarks, train, full_gram, &kernel)?;
        let basis = standard_basis(k_mm.as_ref(), rel_tol)?;
        let features = project_train(basis.as_ref(), k_mn.as_ref())?;
        Ok(Self {
            landmarks,
            kernel,
            rel_tol,
            basis,
            features,
            k_mn,
            k_mm,
            train_rows: Some(train.to_vec()),
        })
    }

    /// Effective rank `s`.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn n_landmarks(&self) -> usize {
        self.basis.nrows()
    }

    pub fn n_train(&self) -> usize {
        self.features.ncols()
    }

    /// Drops the retained training rows; combination-landmark models can no
    /// longer project unseen points afterwards.
    pub fn without_train_rows(mut self) -> Self {
        self.train_rows = None;
        self
    }

    /// `‖Aᵀ K_mm A − I‖_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let a = &self.basis;
        let mut gram = a.transpose() * &self.k_mm * a;
        for i in 0..gram.nrows() {
            gram[(i, i)] -= 1.0;
        }
        gram.norm_l2()
    }

    /// Kernel values between the landmarks and each of `points`, `m × |points|`.
    pub fn landmark_kernel(&self, points: &[SparseVec]) -> Result<Mat<f64>> {
        match &self.landmarks.landmarks {
            Landmarks::Points { points: c, .. } => Ok(gram(c, points, &self.kernel)),
            Landmarks::Combination { weights } => {
                let train = self.train_rows.as_ref().ok_or_else(|| {
                    Error::UnsupportedPrediction(
                        "combination landmarks need the retained training rows".into(),
                    )
                })?;
                Ok(weights.transpose() * gram(train, points, &self.kernel))
            }
        }
    }

    /// `t = Aᵀ k_C(z)`.
    pub fn project_test(&self, z: &SparseVec) -> Result<Vec<f64>> {
        let kc = match &self.landmarks.landmarks {
            Landmarks::Points { points, .. } => kernel_column(points, z, &self.kernel),
            Landmarks::Combination { .. } => numerics::column(self.landmark_kernel(std::slice::from_ref(z))?.as_ref(), 0),
        };
        Ok(numerics::mat_t_vec(self.basis.as_ref(), &kc))
    }

    /// Projections of many points at once, `s × |points|`.
    pub fn project_batch(&self, points: &[SparseVec]) -> Result<Mat<f64>> {
        Ok(self.basis.transpose() * self.landmark_kernel(points)?)
    }

    /// `K̃ = Gᵀ G`; diagnostic only.
    pub fn approx_gram(&self) -> Mat<f64> {
        self.features.transpose() * &self.features
    }
}

/// Norms of the Gram residual `R = K − GᵀG`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramErrorNorms {
    /// `trace(R)`, equal to `‖R‖_*` when `R` is PSD.
    pub trace_norm: f64,
    /// `‖R‖₂`.
    pub spectral_norm: f64,
    /// Smallest eigenvalue of `R`, the PSD certificate.
    pub min_eigenvalue: f64,
}

pub fn gram_residual(k: MatRef<'_, f64>, g: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if k.nrows() != k.ncols() || g.ncols() != k.nrows() {
        return Err(mismatch(format!(
            "K is {}x{}, G is {}x{}",
            k.nrows(),
            k.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let approx = g.transpose() * g;
    let n = k.nrows();
    // average the two triangles so the residual is exactly symmetric
    Ok(Mat::from_fn(n, n, |i, j| {
        k[(i, j)] - 0.5 * (approx[(i, j)] + approx[(j, i)])
    }))
}

pub fn gram_error_norms(k: MatRef<'_, f64>, g: MatRef<'_, f64>) -> Result<GramErrorNorms> {
    let r = gram_residual(k, g)?;
    let vals = numerics::sym_eigenvalues(r.as_ref())?;
    let spectral_norm = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(GramErrorNorms {
        trace_norm: numerics::trace_of(r.as_ref())?,
        spectral_norm,
        min_eigenvalue: vals.last().copied().unwrap_or(0.0),
    })
}

/// `|⟨p̃, q̃⟩ − k(p, q)|` with `p̃`, `q̃` the projections onto the basis span.
pub fn reconstruction_error(model: &NystromModel, p: &SparseVec, q: &SparseVec, k_pq: f64) -> Result<f64> {
    let tp = model.project_test(p)?;
    let tq = model.project_test(q)?;
    Ok((numerics::dot(&tp, &tq) - k_pq).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_sparse_str, Dataset};
    use crate::kernel::kernel_eval;
    use crate::numerics::DEFAULT_REL_TOL;
    use crate::rng::SeededRng;
    use crate::sampling::{sample_gaussian_sketch, sample_kmeans, sample_uniform};

    fn toy(n: usize, dim: usize, seed: u64) -> Dataset {
        let mut r = SeededRng::new(seed);
        let mut text = String::new();
        for i in 0..n {
            text.push_str(&format!("{}", i % 2));
            for f in 1..=dim {
                text.push_str(&format!(" {f}:{}", r.normal()));
            }
            text.push('\n');
        }
        parse_sparse_str(&text).unwrap()
    }

    fn diag(d: &[f64]) -> Mat<f64> {
        Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    #[test]
    fn basis_of_identity_and_diagonal() {
        let a = standard_basis(Mat::<f64>::identity(3, 3).as_ref(), DEFAULT_REL_TOL).unwrap();
        assert_eq!(a.ncols(), 3);
        // eigenvectors of I may be any orthonormal basis; AᵀA = I still holds
        assert!((a.transpose() * &a - Mat::<f64>::identity(3, 3)).norm_max() < 1e-12);

        let a = standard_basis(diag(&[4.0, 1.0]).as_ref(), DEFAULT_REL_TOL).unwrap();
        let abs = Mat::from_fn(2, 2, |i, j| a[(i, j)].abs());
        assert!((abs - diag(&[0.5, 1.0])).norm_max() < 1e-14);
    }

    #[test]
    fn zero_block_is_empty_basis() {
        assert!(matches!(
            standard_basis(Mat::<f64>::zeros(3, 3).as_ref(), DEFAULT_REL_TOL),
            Err(Error::EmptyBasis)
        ));
    }

    #[test]
    fn orthonormal_basis_on_real_gram() {
        let ds = toy(60, 4, 1);
        let cfg = KernelConfig::gaussian(1.5).unwrap();
        let set = sample_uniform(&ds, 10, 2).unwrap();
        let model = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL).unwrap();
        assert!(model.orthonormality_defect() <= 1e-8);
        assert!(model.rank() <= 10);
    }

    #[test]
    fn all_points_as_landmarks_recovers_gram() {
        let ds = toy(40, 3, 2);
        let cfg = KernelConfig::gaussian(0.8).unwrap();
        let k = gram_sym(&ds.rows, &cfg);
        let set = sample_uniform(&ds, 40, 5).unwrap();
        let model = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL).unwrap();
        assert!((model.approx_gram() - &k).norm_l2() <= 1e-6 * k.norm_l2());
        let norms = gram_error_norms(k.as_ref(), model.features.as_ref()).unwrap();
        assert!(norms.trace_norm.abs() <= 1e-6 && norms.spectral_norm <= 1e-6);

        // a training point projects onto its exact kernel row
        let t = model.project_test(&ds.rows[7]).unwrap();
        let row = numerics::mat_t_vec(model.features.as_ref(), &t);
        for (i, v) in row.iter().enumerate() {
            assert!((v - k[(i, 7)]).abs() <= 1e-6);
        }
    }

    #[test]
    fn single_training_landmark_has_unit_feature() {
        let ds = toy(10, 3, 3);
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let set = LandmarkSet::from_selection(&ds, vec![0], crate::sampling::Strategy::Uniform, 0).unwrap();
        let model = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL).unwrap();
        assert!((model.features[(0, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn landmark_projection_has_unit_norm() {
        let ds = toy(30, 3, 4);
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let set = sample_uniform(&ds, 5, 1).unwrap();
        let c0 = set.points().unwrap()[0].clone();
        let model = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL).unwrap();
        let t = model.project_test(&c0).unwrap();
        assert!((numerics::dot(&t, &t) - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn zero_point_projection() {
        let ds = toy(20, 3, 5);
        let cfg = KernelConfig::gaussian(1.3).unwrap();
        let set = sample_uniform(&ds, 4, 2).unwrap();
        let pts = set.points().unwrap().to_vec();
        let model = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL).unwrap();
        let t = model.project_test(&SparseVec::default()).unwrap();
        let consts: Vec<f64> = pts
            .iter()
            .map(|c| {
                let n2: f64 = c.values().iter().map(|v| v * v).sum();
                (-n2 / (2.0 * 1.3 * 1.3)).exp()
            })
            .collect();
        let direct = numerics::mat_t_vec(model.basis.as_ref(), &consts);
        for (a, b) in t.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn combination_landmarks_need_training_rows() {
        let ds = toy(25, 3, 6);
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let k = gram_sym(&ds.rows, &cfg);
        let set = sample_gaussian_sketch(25, 4, 3).unwrap();
        assert!(NystromModel::build(&ds.rows, set.clone(), cfg, None, DEFAULT_REL_TOL).is_err());
        let model = NystromModel::build(&ds.rows, set, cfg, Some(k.as_ref()), DEFAULT_REL_TOL).unwrap();
        assert!(model.orthonormality_defect() <= 1e-8);
        let z = ds.rows[3].clone();
        let t = model.project_test(&z).unwrap();
        // G column 3 is the projection of training point 3
        for (r, v) in t.iter().enumerate() {
            assert!((v - model.features[(r, 3)]).abs() <= 1e-10);
        }
        let bare = model.without_train_rows();
        assert!(matches!(bare.project_test(&z), Err(Error::UnsupportedPrediction(_))));
    }

    #[test]
    fn residual_is_psd_and_trace_is_eigen_sum() {
        let ds = toy(50, 4, 7);
        let cfg = KernelConfig::gaussian(1.2).unwrap();
        let k = gram_sym(&ds.rows, &cfg);
        for seed in 0..30 {
            let set = if seed % 2 == 0 {
                sample_uniform(&ds, 8, seed).unwrap()
            } else {
                sample_kmeans(&ds, 8, seed, 20).unwrap()
            };
            let model = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL).unwrap();
            let norms = gram_error_norms(k.as_ref(), model.features.as_ref()).unwrap();
            let k2 = numerics::sym_spectral_norm(k.as_ref()).unwrap();
            assert!(norms.min_eigenvalue >= -1e-8 * k2);
            let r = gram_residual(k.as_ref(), model.features.as_ref()).unwrap();
            let eig_sum: f64 = numerics::sym_eigenvalues(r.as_ref()).unwrap().iter().sum();
            assert!((norms.trace_norm - eig_sum).abs() <= 1e-8 * norms.trace_norm.max(1.0));
        }
    }

    #[test]
    fn reconstruction_zero_at_landmarks() {
        let ds = toy(30, 3, 8);
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let set = sample_uniform(&ds, 6, 4).unwrap();
        let pts = set.points().unwrap().to_vec();
        let model = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL).unwrap();
        for p in &pts {
            for q in &pts {
                let e = reconstruction_error(&model, p, q, kernel_eval(p, q, &cfg)).unwrap();
                assert!(e <= 1e-8);
            }
        }
    }

    #[test]
    fn reconstruction_error_bounded_by_residual_norms() {
        let ds = toy(30, 3, 9);
        let cfg = KernelConfig::gaussian(0.7).unwrap();
        let set = sample_uniform(&ds, 4, 4).unwrap();
        let model = NystromModel::build(&ds.rows, set, cfg, None, DEFAULT_REL_TOL).unwrap();
        let fresh = toy(10, 3, 99);
        for p in &fresh.rows {
            for q in &fresh.rows {
                let e = reconstruction_error(&model, p, q, kernel_eval(p, q, &cfg)).unwrap();
                let tp = model.project_test(p).unwrap();
                let tq = model.project_test(q).unwrap();
                let rp = (1.0 - numerics::dot(&tp, &tp)).max(0.0).sqrt();
                let rq = (1.0 - numerics::dot(&tq, &tq)).max(0.0).sqrt();
                assert!(e <= rp * rq + 1e-10);
            }
        }
    }
}
