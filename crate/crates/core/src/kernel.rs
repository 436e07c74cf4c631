//! Gaussian kernel evaluation and Gram / cross-Gram construction.

use faer::Mat;

use crate::data::SparseVec;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `exp(−‖x − y‖² / (2γ²))`
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// Bandwidth γ, in feature-distance units.
    pub gamma: f64,
}

impl KernelConfig {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(invalid(format!("kernel bandwidth must be positive, got {gamma}")));
        }
        Ok(Self {
            kind: KernelKind::Gaussian,
            gamma,
        })
    }

    /// Kernel value from a squared distance.
    #[inline]
    pub fn from_sq_distance(&self, d2: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => (-d2 / (2.0 * self.gamma * self.gamma)).exp(),
        }
    }

    /// `k(x, x)`; 1 for the Gaussian kernel.
    pub fn self_value(&self) -> f64 {
        self.from_sq_distance(0.0)
    }
}

pub fn kernel_eval(x: &SparseVec, y: &SparseVec, cfg: &KernelConfig) -> f64 {
    cfg.from_sq_distance(x.sq_distance(y))
}

fn densify(rows: &[SparseVec], dim: usize) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.to_dense(dim)).collect()
}

#[inline]
fn dense_sq_distance(a: &[f64], b: &[f64]) -> f64 {
    // increasing-index accumulation; adding the 0² terms of features absent
    // from both rows leaves the sum bitwise equal to the sparse merge
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn common_dim(a: &[SparseVec], b: &[SparseVec]) -> usize {
    a.iter().chain(b).map(SparseVec::max_index).max().unwrap_or(0)
}

/// Cross-Gram matrix `|A| × |B|` with entries `k(aᵢ, bⱼ)`.
pub fn gram(a: &[SparseVec], b: &[SparseVec], cfg: &KernelConfig) -> Mat<f64> {
    let dim = common_dim(a, b);
    let (da, db) = (densify(a, dim), densify(b, dim));
    Mat::from_fn(a.len(), b.len(), |i, j| {
        cfg.from_sq_distance(dense_sq_distance(&da[i], &db[j]))
    })
}

/// Symmetric Gram matrix of `a`; the lower triangle is mirrored so the
/// result is exactly symmetric.
pub fn gram_sym(a: &[SparseVec], cfg: &KernelConfig) -> Mat<f64> {
    let dim = common_dim(a, &[]);
    let da = densify(a, dim);
    let n = a.len();
    let mut k = Mat::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = cfg.self_value();
        for i in (j + 1)..n {
            let v = cfg.from_sq_distance(dense_sq_distance(&da[i], &da[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Kernel column `k(aᵢ, z)` as a plain vector.
pub fn kernel_column(a: &[SparseVec], z: &SparseVec, cfg: &KernelConfig) -> Vec<f64> {
    a.iter().map(|x| kernel_eval(x, z, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sym_eigenvalues;
    use crate::rng::SeededRng;

    fn random_rows(n: usize, dim: usize, density: f64, seed: u64) -> Vec<SparseVec> {
        let mut r = SeededRng::new(seed);
        (0..n)
            .map(|_| {
                let dense: Vec<f64> = (0..dim)
                    .map(|_| if r.uniform() < density { r.normal() } else { 0.0 })
                    .collect();
                SparseVec::from_dense(&dense)
            })
            .collect()
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        assert!(KernelConfig::gaussian(0.0).is_err());
        assert!(KernelConfig::gaussian(-1.0).is_err());
        assert!(KernelConfig::gaussian(f64::NAN).is_err());
    }

    #[test]
    fn identical_points_give_one() {
        let cfg = KernelConfig::gaussian(0.7).unwrap();
        let x = SparseVec::new(vec![2, 5], vec![1.5, -3.0]).unwrap();
        assert_eq!(kernel_eval(&x, &x, &cfg), 1.0);
    }

    #[test]
    fn distance_two_gamma_squared_gives_inverse_e() {
        let gamma = 1.3;
        let cfg = KernelConfig::gaussian(gamma).unwrap();
        // ‖x − y‖² = 2γ²
        let x = SparseVec::new(vec![1], vec![(2.0f64).sqrt() * gamma]).unwrap();
        let y = SparseVec::default();
        assert!((kernel_eval(&x, &y, &cfg) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((kernel_eval(&x, &y, &cfg) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn sparse_matches_dense_brute_force() {
        let cfg = KernelConfig::gaussian(2.0).unwrap();
        let rows = random_rows(20, 15, 0.4, 3);
        for a in &rows {
            for b in &rows {
                let (da, db) = (a.to_dense(15), b.to_dense(15));
                let d2: f64 = da.iter().zip(&db).map(|(x, y)| (x - y).powi(2)).sum();
                let brute = (-d2 / (2.0 * 4.0)).exp();
                assert!((kernel_eval(a, b, &cfg) - brute).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gram_entries_equal_kernel_eval_exactly() {
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let rows = random_rows(3, 4, 0.7, 5);
        let k = gram(&rows, &rows, &cfg);
        let ks = gram_sym(&rows, &cfg);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k[(i, j)], kernel_eval(&rows[i], &rows[j], &cfg));
                assert_eq!(ks[(i, j)], k[(i, j)]);
            }
        }
    }

    #[test]
    fn gram_properties() {
        let cfg = KernelConfig::gaussian(1.5).unwrap();
        let a = random_rows(30, 10, 0.5, 8);
        let b = random_rows(12, 12, 0.5, 9);
        let k = gram_sym(&a, &cfg);
        for i in 0..30 {
            assert_eq!(k[(i, i)], 1.0);
        }
        let min = *sym_eigenvalues(k.as_ref()).unwrap().last().unwrap();
        assert!(min >= -1e-8);
        let ab = gram(&a, &b, &cfg);
        let ba = gram(&b, &a, &cfg);
        for i in 0..30 {
            for j in 0..12 {
                assert_eq!(ab[(i, j)], ba[(j, i)]);
            }
        }
    }
}
