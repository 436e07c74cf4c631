//! The shared training pipeline for GSA, LLA and NCR.
//!
//! All three approaches train the same linear model `ŵ` on the projected
//! features `G`; they differ only at test time. LLA (and NCR, which is LLA
//! with the standard Nyström basis) scores `ŵᵀ Aᵀ k_C(z)`; GSA converts
//! `α̂ = G† ŵ` once and scores `α̂ᵀ k_X(z)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use faer::{Mat, MatRef};

use crate::data::{Dataset, SparseVec};
use crate::error::{invalid, mismatch, Error, Result};
use crate::kernel::{gram, KernelConfig};
use crate::numerics::{self, pseudo_inverse, solve_regularized};
use crate::nystrom::NystromModel;
use crate::rng::SeededRng;
use crate::sampling::LandmarkSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Kernel ridge regression.
    Squared,
    /// L2-regularized hinge loss (linear SVM).
    Hinge,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Hinge => "hinge",
        }
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" | "krr" => Ok(Loss::Squared),
            "hinge" | "svm" => Ok(Loss::Hinge),
            _ => Err(invalid(format!("unknown loss `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub loss: Loss,
    /// `λ₀ = nλ` for the squared loss.
    pub lambda0: f64,
    /// Box constraint of the hinge-loss dual.
    pub svm_c: f64,
    /// Coordinate-descent epochs for the hinge loss.
    pub max_iter: usize,
    /// Projected-gradient stopping threshold for the hinge loss.
    pub tol: f64,
    /// Seeds the epoch permutations of coordinate descent.
    pub seed: u64,
}

impl SolverConfig {
    pub fn ridge(lambda0: f64) -> Self {
        Self {
            loss: Loss::Squared,
            lambda0,
            svm_c: 1.0,
            max_iter: 1000,
            tol: 1e-6,
            seed: 0,
        }
    }

    pub fn svm(c: f64) -> Self {
        Self {
            loss: Loss::Hinge,
            lambda0: 1.0,
            svm_c: c,
            max_iter: 1000,
            tol: 1e-6,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.loss {
            Loss::Squared if !(self.lambda0 > 0.0) => Err(invalid("lambda0 must be positive")),
            Loss::Hinge if !(self.svm_c > 0.0) => Err(invalid("svm C must be positive")),
            Loss::Hinge if self.max_iter == 0 => Err(invalid("max_iter must be at least 1")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approach {
    Gsa,
    Lla,
    Ncr,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::Gsa => "gsa",
            Approach::Lla => "lla",
            Approach::Ncr => "ncr",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gsa" => Ok(Approach::Gsa),
            "lla" => Ok(Approach::Lla),
            "ncr" => Ok(Approach::Ncr),
            _ => Err(invalid(format!("unknown approach `{s}`"))),
        }
    }
}

/// `ŵ = (GGᵀ + λ₀I)⁻¹ G y`, one column per right-hand side.
pub fn solve_ridge_multi(g: MatRef<'_, f64>, targets: MatRef<'_, f64>, lambda0: f64) -> Result<Mat<f64>> {
    if targets.nrows() != g.ncols() {
        return Err(mismatch(format!(
            "{} targets for {} feature columns",
            targets.nrows(),
            g.ncols()
        )));
    }
    let ggt = g * g.transpose();
    let rhs = g * targets;
    solve_regularized(ggt.as_ref(), rhs.as_ref(), lambda0)
}

pub fn solve_ridge_linear(g: MatRef<'_, f64>, y: &[f64], lambda0: f64) -> Result<Vec<f64>> {
    let w = solve_ridge_multi(g, numerics::col_matrix(y).as_ref(), lambda0)?;
    Ok(numerics::column(w.as_ref(), 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution {
    pub w: Vec<f64>,
    /// Dual variables, each in `[0, C]`.
    pub alpha: Vec<f64>,
    pub epochs: usize,
    /// Largest projected-gradient magnitude in the final epoch.
    pub max_violation: f64,
}

/// Dual objective `Σαᵢ − ½‖Σ αᵢ yᵢ gᵢ‖²`.
pub fn svm_dual_objective(g: MatRef<'_, f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let coef: Vec<f64> = alpha.iter().zip(y).map(|(a, yi)| a * yi).collect();
    let w = numerics::mat_vec(g, &coef);
    alpha.iter().sum::<f64>() - 0.5 * numerics::dot(&w, &w)
}

/// Dual coordinate descent for the L2-regularized hinge loss without bias:
/// `max Σαᵢ − ½‖Σαᵢyᵢgᵢ‖²` over `0 ≤ αᵢ ≤ C`, `gᵢ` the columns of `G`.
///
/// Each epoch visits the coordinates in a seeded random order. Stops when the
/// largest projected-gradient magnitude of an epoch is at most `tol`, or
/// after `max_iter` epochs.
pub fn solve_svm_linear(
    g: MatRef<'_, f64>,
    y: &[f64],
    c: f64,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<SvmSolution> {
    let (s, n) = (g.nrows(), g.ncols());
    if y.len() != n {
        return Err(mismatch(format!("{} labels for {n} points", y.len())));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(invalid("SVM labels must be +1 or -1"));
    }
    if !(c > 0.0) {
        return Err(invalid("svm C must be positive"));
    }
    let cols: Vec<Vec<f64>> = (0..n).map(|i| numerics::column(g, i)).collect();
    let qii: Vec<f64> = cols.iter().map(|gi| numerics::dot(gi, gi)).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; s];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SeededRng::new(seed);
    let mut epochs = 0;
    let mut max_violation = f64::INFINITY;

    while epochs < max_iter {
        epochs += 1;
        rng.shuffle(&mut order);
        max_violation = 0.0f64;
        for &i in &order {
            if qii[i] == 0.0 {
                // the coordinate does not touch w; the dual gains linearly
                alpha[i] = c;
                continue;
            }
            let grad = y[i] * numerics::dot(&w, &cols[i]) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                grad.min(0.0)
            } else if alpha[i] >= c {
                grad.max(0.0)
            } else {
                grad
            };
            max_violation = max_violation.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - grad / qii[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                for (wk, gk) in w.iter_mut().zip(&cols[i]) {
                    *wk += step * gk;
                }
            }
        }
        if max_violation <= tol {
            break;
        }
    }
    Ok(SvmSolution {
        w,
        alpha,
        epochs,
        max_violation,
    })
}

/// `α̂ = G† ŵ`.
pub fn lla_to_gsa_alpha(g: MatRef<'_, f64>, w: &[f64], rel_tol: f64) -> Vec<f64> {
    numerics::mat_vec(pseudo_inverse(g, rel_tol).as_ref(), w)
}

/// Analytic NCR solution for KRR: `β = (K_mn K_nm + λ₀ K_mm)† K_mn y`,
/// predicting `βᵀ k_C(z)`.
///
/// Evaluated as the least-squares solution `β = B† [y; 0]` with
/// `B = [K_nm; √λ₀ K_mm^½]`, since `BᵀB` is the bracketed matrix and
/// `Bᵀ[y; 0] = K_mn y`. Forming `BᵀB` explicitly squares its condition
/// number and loses the directions of small landmark eigenvalues.
pub fn ncr_krr_analytic(
    k_mn: MatRef<'_, f64>,
    k_mm: MatRef<'_, f64>,
    y: &[f64],
    lambda0: f64,
    rel_tol: f64,
) -> Result<Vec<f64>> {
    let (m, n) = (k_mm.nrows(), y.len());
    if k_mn.nrows() != m || k_mn.ncols() != n {
        return Err(mismatch("K_mn, K_mm and y disagree in size"));
    }
    if !(lambda0 > 0.0) {
        return Err(invalid("lambda0 must be positive"));
    }
    let (vals, vecs) = numerics::sym_eig(k_mm)?;
    let root = Mat::from_fn(m, m, |i, j| vecs[(i, j)] * (lambda0 * vals[j].max(0.0)).sqrt()) * vecs.transpose();
    let b = Mat::from_fn(n + m, m, |i, j| if i < n { k_mn[(j, i)] } else { root[(i - n, j)] });
    let rhs: Vec<f64> = y.iter().copied().chain(std::iter::repeat(0.0).take(m)).collect();
    Ok(numerics::mat_vec(pseudo_inverse(b.as_ref(), rel_tol).as_ref(), &rhs))
}

/// GSA for KRR through the Woodbury identity:
/// `α = (1/λ₀)(y − Gᵀ (GGᵀ + λ₀I)⁻¹ G y)`, solving `(GᵀG + λ₀I) α = y`.
pub fn gsa_krr_woodbury(g: MatRef<'_, f64>, y: &[f64], lambda0: f64) -> Result<Vec<f64>> {
    let inner = solve_ridge_linear(g, y, lambda0)?;
    let back = numerics::mat_t_vec(g, &inner);
    Ok(y.iter().zip(&back).map(|(yi, b)| (yi - b) / lambda0).collect())
}

/// One-vs-rest targets, `n × c` with entries ±1.
pub fn one_vs_rest_targets(labels: &[usize], n_classes: usize) -> Mat<f64> {
    Mat::from_fn(labels.len(), n_classes, |i, k| {
        if labels[i] == k {
            1.0
        } else {
            -1.0
        }
    })
}

/// Step 5 of the pipeline: per-class linear solutions on `G`, `s × c`.
pub fn fit_weights(g: MatRef<'_, f64>, labels: &[usize], n_classes: usize, solver: &SolverConfig) -> Result<Mat<f64>> {
    solver.validate()?;
    if labels.len() != g.ncols() {
        return Err(mismatch(format!(
            "{} labels for {} training columns",
            labels.len(),
            g.ncols()
        )));
    }
    let targets = one_vs_rest_targets(labels, n_classes);
    match solver.loss {
        Loss::Squared => solve_ridge_multi(g, targets.as_ref(), solver.lambda0),
        Loss::Hinge => {
            let mut w = Mat::zeros(g.nrows(), n_classes);
            for k in 0..n_classes {
                let y = numerics::column(targets.as_ref(), k);
                let sol = solve_svm_linear(
                    g,
                    &y,
                    solver.svm_c,
                    solver.max_iter,
                    solver.tol,
                    solver.seed ^ k as u64,
                )?;
                for (r, v) in sol.w.iter().enumerate() {
                    w[(r, k)] = *v;
                }
            }
            Ok(w)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub approach: Approach,
    pub nystrom: Arc<NystromModel>,
    pub solver: SolverConfig,
    /// `ŵ` per class, `s × c`.
    pub weights: Mat<f64>,
    /// `α̂ = G† ŵ` per class, `n × c` (GSA only).
    pub alpha: Option<Mat<f64>>,
    /// `G†`, `n × s` (GSA only).
    pub g_pinv: Option<Mat<f64>>,
}

impl TrainedModel {
    /// Wraps shared weights for one approach; GSA additionally converts them
    /// to dual coefficients through `G†`.
    pub fn from_weights(
        approach: Approach,
        nystrom: Arc<NystromModel>,
        weights: Mat<f64>,
        solver: SolverConfig,
    ) -> Result<Self> {
        if weights.nrows() != nystrom.rank() {
            return Err(mismatch(format!(
                "weights have {} rows, basis rank is {}",
                weights.nrows(),
                nystrom.rank()
            )));
        }
        let (alpha, g_pinv) = match approach {
            Approach::Gsa => {
                if nystrom.train_rows.is_none() {
                    return Err(Error::UnsupportedPrediction(
                        "GSA needs the retained training rows".into(),
                    ));
                }
                let pinv = pseudo_inverse(nystrom.features.as_ref(), nystrom.rel_tol);
                (Some(&pinv * &weights), Some(pinv))
            }
            Approach::Lla | Approach::Ncr => (None, None),
        };
        Ok(Self {
            approach,
            nystrom,
            solver,
            weights,
            alpha,
            g_pinv,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.weights.ncols()
    }

    /// Scores for a batch of points, `|points| × c`.
    pub fn decision_scores(&self, points: &[SparseVec]) -> Result<Mat<f64>> {
        match self.approach {
            Approach::Lla | Approach::Ncr => {
                let t = self.nystrom.project_batch(points)?;
                Ok(t.transpose() * &self.weights)
            }
            Approach::Gsa => {
                let train = self.nystrom.train_rows.as_ref().ok_or_else(|| {
                    Error::UnsupportedPrediction("GSA needs the retained training rows".into())
                })?;
                let alpha = self.alpha.as_ref().expect("GSA models carry alpha");
                let kx = gram(points, train, &self.nystrom.kernel);
                Ok(kx * alpha)
            }
        }
    }

    /// Scores and the arg-max class (ties to the lowest id) for one point.
    pub fn predict(&self, z: &SparseVec) -> Result<(Vec<f64>, usize)> {
        let scores = self.decision_scores(std::slice::from_ref(z))?;
        let row: Vec<f64> = (0..scores.ncols()).map(|k| scores[(0, k)]).collect();
        let class = argmax(&row);
        Ok((row, class))
    }

    pub fn predict_classes(&self, points: &[SparseVec]) -> Result<Vec<usize>> {
        Ok(classes_from_scores(self.decision_scores(points)?.as_ref()))
    }

    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        Ok(accuracy(&self.predict_classes(&ds.rows)?, &ds.labels))
    }
}

/// First index of the maximum (NaN never wins).
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

pub fn classes_from_scores(scores: MatRef<'_, f64>) -> Vec<usize> {
    (0..scores.nrows())
        .map(|i| argmax(&(0..scores.ncols()).map(|k| scores[(i, k)]).collect::<Vec<_>>()))
        .collect()
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Training phase end to end: landmark blocks, basis, `G`, per-class `ŵ`,
/// plus the GSA conversion when requested.
pub fn train(
    ds: &Dataset,
    kernel: KernelConfig,
    landmarks: LandmarkSet,
    full_gram: Option<MatRef<'_, f64>>,
    solver: &SolverConfig,
    approach: Approach,
    rel_tol: f64,
) -> Result<TrainedModel> {
    let nystrom = Arc::new(NystromModel::build(&ds.rows, landmarks, kernel, full_gram, rel_tol)?);
    let weights = fit_weights(nystrom.features.as_ref(), &ds.labels, ds.n_classes(), solver)?;
    TrainedModel::from_weights(approach, nystrom, weights, *solver)
}

/// Full-kernel KRR reference `α = (K + λ₀I)⁻¹ Y`, `n × c`.
pub fn exact_krr(k: MatRef<'_, f64>, labels: &[usize], n_classes: usize, lambda0: f64) -> Result<Mat<f64>> {
    let targets = one_vs_rest_targets(labels, n_classes);
    solve_regularized(k, targets.as_ref(), lambda0)
}

/// KRR objective of the kernelized problem on Gram matrix `k`, scaled by `n`:
/// `‖K α − y‖² + λ₀ αᵀ K α`.
pub fn krr_kernel_objective(k: MatRef<'_, f64>, alpha: &[f64], y: &[f64], lambda0: f64) -> f64 {
    let ka = numerics::mat_vec(k, alpha);
    let fit: f64 = ka.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    fit + lambda0 * numerics::dot(alpha, &ka)
}

/// The same objective with `K̃ = GᵀG` applied as `Gᵀ(G·)`.
pub fn krr_lowrank_objective(g: MatRef<'_, f64>, alpha: &[f64], y: &[f64], lambda0: f64) -> f64 {
    let ga = numerics::mat_vec(g, alpha);
    let ka = numerics::mat_t_vec(g, &ga);
    let fit: f64 = ka.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    fit + lambda0 * numerics::dot(&ga, &ga)
}

/// Linear ridge objective `(1/n)‖Gᵀw − y‖² + (λ₀/n)‖w‖²`.
pub fn ridge_objective(g: MatRef<'_, f64>, w: &[f64], y: &[f64], lambda0: f64) -> f64 {
    let n = y.len() as f64;
    let pred = numerics::mat_t_vec(g, w);
    let fit: f64 = pred.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (fit + lambda0 * numerics::dot(w, w)) / n
}
