//! Landmark generation: uniform, Gaussian sketch, leverage score, k-means.
//!
//! Uniform and leverage sampling select training points, so their landmark
//! sets satisfy `C = X P` with a selection matrix `P`. The Gaussian sketch is
//! stored directly as a dense combination matrix `P`. k-means centroids are
//! new points and carry no `P`.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};

use crate::data::{Dataset, SparseVec};
use crate::error::{invalid, Error, Result};
use crate::numerics::{self, DEFAULT_REL_TOL};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Uniform,
    Gaussian,
    Leverage,
    KMeans,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Uniform,
        Strategy::Gaussian,
        Strategy::Leverage,
        Strategy::KMeans,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Gaussian => "gaussian",
            Strategy::Leverage => "leverage",
            Strategy::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| invalid(format!("unknown sampling strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Landmarks {
    /// Explicit input-space points. `selection` holds the training indices
    /// they were drawn from, when they were.
    Points {
        points: Vec<SparseVec>,
        selection: Option<Vec<usize>>,
    },
    /// Feature-space combinations `C = X P`, `P` is `n × m`.
    Combination { weights: Mat<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub landmarks: Landmarks,
    pub strategy: Strategy,
    pub source_seed: u64,
}

impl LandmarkSet {
    pub fn from_points(points: Vec<SparseVec>, strategy: Strategy, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("landmark set is empty"));
        }
        Ok(Self {
            landmarks: Landmarks::Points {
                points,
                selection: None,
            },
            strategy,
            source_seed: seed,
        })
    }

    /// Landmarks equal to the training points `indices` of `ds`.
    pub fn from_selection(ds: &Dataset, indices: Vec<usize>, strategy: Strategy, seed: u64) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("landmark set is empty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= ds.len()) {
            return Err(invalid(format!("landmark index {bad} out of range")));
        }
        let points = indices.iter().map(|&i| ds.rows[i].clone()).collect();
        Ok(Self {
            landmarks: Landmarks::Points {
                points,
                selection: Some(indices),
            },
            strategy,
            source_seed: seed,
        })
    }

    pub fn from_weights(weights: Mat<f64>, strategy: Strategy, seed: u64) -> Result<Self> {
        if weights.ncols() == 0 {
            return Err(invalid("landmark set is empty"));
        }
        for j in 0..weights.ncols() {
            if (0..weights.nrows()).all(|i| weights[(i, j)] == 0.0) {
                return Err(invalid(format!("combination column {j} is all zero")));
            }
        }
        Ok(Self {
            landmarks: Landmarks::Combination { weights },
            strategy,
            source_seed: seed,
        })
    }

    pub fn len(&self) -> usize {
        match &self.landmarks {
            Landmarks::Points { points, .. } => points.len(),
            Landmarks::Combination { weights } => weights.ncols(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether `C = X P` holds for some recorded `P`.
    pub fn is_combination_of_training(&self) -> bool {
        match &self.landmarks {
            Landmarks::Points { selection, .. } => selection.is_some(),
            Landmarks::Combination { .. } => true,
        }
    }

    /// The `n × m` matrix `P` with `C = X P`, when recorded.
    pub fn combination_matrix(&self, n: usize) -> Option<Mat<f64>> {
        match &self.landmarks {
            Landmarks::Points {
                selection: Some(sel),
                ..
            } => {
                let mut p = Mat::zeros(n, sel.len());
                for (j, &i) in sel.iter().enumerate() {
                    p[(i, j)] = 1.0;
                }
                Some(p)
            }
            Landmarks::Points { selection: None, .. } => None,
            Landmarks::Combination { weights } => Some(weights.clone()),
        }
    }

    pub fn points(&self) -> Option<&[SparseVec]> {
        match &self.landmarks {
            Landmarks::Points { points, .. } => Some(points),
            Landmarks::Combination { .. } => None,
        }
    }
}

fn check_count(m: usize, n: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid("landmark count must be at least 1"));
    }
    if m > n {
        return Err(invalid(format!("cannot draw {m} landmarks from {n} points")));
    }
    Ok(())
}

/// `m` distinct training points, the first `m` of a seeded Fisher–Yates shuffle.
pub fn sample_uniform(ds: &Dataset, m: usize, seed: u64) -> Result<LandmarkSet> {
    check_count(m, ds.len())?;
    let idx = SeededRng::new(seed).sample_distinct(ds.len(), m);
    LandmarkSet::from_selection(ds, idx, Strategy::Uniform, seed)
}

/// Gaussian sketch `P` (`n × m`) with i.i.d. N(0, 1/m) entries, filled
/// column by column.
pub fn sample_gaussian_sketch(n: usize, m: usize, seed: u64) -> Result<LandmarkSet> {
    check_count(m, n)?;
    let mut rng = SeededRng::new(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let mut p = Mat::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            p[(i, j)] = rng.normal() * scale;
        }
    }
    LandmarkSet::from_weights(p, Strategy::Gaussian, seed)
}

/// Rank-`k` leverage scores `ℓᵢ = Σ_{j<k} V_ij²` of a PSD Gram matrix.
///
/// When the numerical rank `r` is below `k`, the scores use all `r`
/// eigenvectors and sum to `r`.
pub fn leverage_scores(k_full: MatRef<'_, f64>, k: usize) -> Result<Vec<f64>> {
    let (vals, vecs) = numerics::sym_eig(k_full)?;
    let n = k_full.nrows();
    let lead = vals.first().copied().unwrap_or(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    if lead < 0.0 || min < -1e-8 * lead.max(f64::MIN_POSITIVE) {
        return Err(invalid(format!(
            "Gram matrix is not PSD (min eigenvalue {min:e})"
        )));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("target rank {k} outside 1..={n}")));
    }
    let rank = vals
        .iter()
        .take_while(|&&v| v > DEFAULT_REL_TOL * lead)
        .count();
    let k = k.min(rank);
    Ok((0..n)
        .map(|i| (0..k).map(|j| vecs[(i, j)] * vecs[(i, j)]).sum())
        .collect())
}

/// `m` draws with replacement, probability ∝ leverage score; duplicates are
/// dropped in order of first appearance, so fewer than `m` landmarks may
/// result.
pub fn sample_leverage(ds: &Dataset, k_full: MatRef<'_, f64>, k: usize, m: usize, seed: u64) -> Result<LandmarkSet> {
    let n = ds.len();
    if k_full.nrows() != n || k_full.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Gram matrix is {}x{}, dataset has {n} rows",
            k_full.nrows(),
            k_full.ncols()
        )));
    }
    check_count(m, n)?;
    let scores = leverage_scores(k_full, k)?;
    let idx = draw_weighted(&scores, m, seed);
    LandmarkSet::from_selection(ds, idx, Strategy::Leverage, seed)
}

/// Inverse-CDF draws from unnormalized weights, deduplicated.
fn draw_weighted(weights: &[f64], m: usize, seed: u64) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w.max(0.0);
        cdf.push(acc);
    }
    let mut rng = SeededRng::new(seed);
    let mut seen = vec![false; weights.len()];
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let u = rng.uniform() * acc;
        let i = cdf.partition_point(|&c| c <= u).min(weights.len() - 1);
        if !seen[i] {
            seen[i] = true;
            out.push(i);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// `m` dense centroids of length `dim`.
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to assigned centroids, after each sweep.
    pub objective: Vec<f64>,
    pub sweeps: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm on the dense rows of `ds`.
///
/// Initial centroids are `m` distinct random points. A sweep assigns every
/// point to its nearest centroid (ties to the lowest index) and recomputes
/// means; an empty cluster is reseeded at the point farthest from its
/// assigned centroid. Stops at an assignment fixpoint or after `max_iter`
/// sweeps.
pub fn kmeans(ds: &Dataset, m: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = ds.len();
    check_count(m, n)?;
    let dim = ds.dim;
    let pts: Vec<Vec<f64>> = ds.rows.iter().map(|r| r.to_dense(dim)).collect();
    let init = SeededRng::new(seed).sample_distinct(n, m);
    let mut centroids: Vec<Vec<f64>> = init.iter().map(|&i| pts[i].clone()).collect();
    let mut assignments = vec![usize::MAX; n];
    let mut objective = Vec::new();
    let mut sweeps = 0;

    while sweeps < max_iter.max(1) {
        sweeps += 1;
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, p) in pts.iter().enumerate() {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, cen)| (c, sq_dist(p, cen)))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
            dists[i] = d;
        }
        objective.push(dists.iter().sum());
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for (p, &a) in pts.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..m {
            if counts[c] > 0 {
                let inv = counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s / inv).collect();
            } else {
                let far = (0..n)
                    .fold((0, -1.0), |acc, i| if dists[i] > acc.1 { (i, dists[i]) } else { acc })
                    .0;
                centroids[c] = pts[far].clone();
                dists[far] = 0.0;
            }
        }
    }

    Ok(KMeansResult {
        centroids,
        assignments,
        objective,
        sweeps,
    })
}

/// k-means centroids as explicit landmark points (no `C = X P` relation).
pub fn sample_kmeans(ds: &Dataset, m: usize, seed: u64, max_iter: usize) -> Result<LandmarkSet> {
    let res = kmeans(ds, m, seed, max_iter)?;
    let points = res
        .centroids
        .iter()
        .map(|c| SparseVec::from_dense(c))
        .collect();
    LandmarkSet::from_points(points, Strategy::KMeans, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_sparse_str;
    use crate::kernel::{gram, gram_sym, KernelConfig};

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut r = SeededRng::new(seed);
        let mut text = String::new();
        for i in 0..n {
            text.push_str(&format!(
                "{} 1:{} 2:{} 3:{}\n",
                i % 2,
                r.normal(),
                r.normal(),
                r.normal()
            ));
        }
        parse_sparse_str(&text).unwrap()
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("nope".parse::<Strategy>().is_err());
    }

    #[test]
    fn uniform_all_points_is_permutation() {
        let ds = toy(12, 1);
        let set = sample_uniform(&ds, 12, 3).unwrap();
        let p = set.combination_matrix(12).unwrap();
        for i in 0..12 {
            let row: f64 = (0..12).map(|j| p[(i, j)]).sum();
            let col: f64 = (0..12).map(|j| p[(j, i)]).sum();
            assert_eq!((row, col), (1.0, 1.0));
        }
    }

    #[test]
    fn uniform_is_seeded_and_pinned() {
        let ds = toy(10, 1);
        let a = sample_uniform(&ds, 3, 7).unwrap();
        let b = sample_uniform(&ds, 3, 7).unwrap();
        assert_eq!(a, b);
        let Landmarks::Points { selection: Some(sel), .. } = &a.landmarks else {
            panic!("uniform landmarks record their selection")
        };
        // pinned from the documented xoshiro256** / Fisher–Yates procedure
        assert_eq!(sel, &vec![PINNED_UNIFORM[0], PINNED_UNIFORM[1], PINNED_UNIFORM[2]]);
        assert!(sample_uniform(&ds, 11, 7).is_err());
        assert!(sample_uniform(&ds, 0, 7).is_err());
    }

    // cross-checked against an independent Python transcription of the procedure
    const PINNED_UNIFORM: [usize; 3] = [1, 8, 3];

    #[test]
    fn gaussian_sketch_moments_and_rank() {
        let (n, m) = (400, 50);
        let set = sample_gaussian_sketch(n, m, 5).unwrap();
        let p = set.combination_matrix(n).unwrap();
        let entries: Vec<f64> = (0..m).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| p[(i, j)]).collect();
        let mean = entries.iter().sum::<f64>() / entries.len() as f64;
        assert!(mean.abs() <= 3.0 / ((n * m) as f64).sqrt());
        let var = entries.iter().map(|e| e * e * m as f64).sum::<f64>() / entries.len() as f64;
        assert!((var - 1.0).abs() <= 0.1, "variance {var}");
        assert_eq!(set, sample_gaussian_sketch(n, m, 5).unwrap());

        let small = sample_gaussian_sketch(50, 5, 9).unwrap();
        let (_, sv, _) = numerics::truncated_svd(small.combination_matrix(50).unwrap().as_ref(), 1e-10);
        assert_eq!(sv.len(), 5);
        assert!(sample_gaussian_sketch(10, 0, 1).is_err());
    }

    #[test]
    fn leverage_identity_is_uniform_and_sums_to_k() {
        let k = Mat::<f64>::identity(8, 8);
        let scores = leverage_scores(k.as_ref(), 3).unwrap();
        // eigenvectors of I are arbitrary, but the rank-k scores still sum to k
        assert!((scores.iter().sum::<f64>() - 3.0).abs() < 1e-8);
        let full = leverage_scores(k.as_ref(), 8).unwrap();
        for s in full {
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn leverage_rank_one_matches_projection() {
        let v = [1.0, -2.0, 0.5, 3.0];
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let k = Mat::from_fn(4, 4, |i, j| v[i] * v[j]);
        let scores = leverage_scores(k.as_ref(), 1).unwrap();
        for i in 0..4 {
            // diagonal of the projector v vᵀ / ‖v‖²
            assert!((scores[i] - v[i] * v[i] / norm2).abs() < 1e-10);
        }
    }

    #[test]
    fn leverage_rejects_indefinite() {
        let ds = toy(3, 2);
        let k = Mat::from_fn(3, 3, |i, j| if i == j { if i == 0 { -1.0 } else { 1.0 } } else { 0.0 });
        assert!(sample_leverage(&ds, k.as_ref(), 1, 2, 1).is_err());
    }

    #[test]
    fn leverage_samples_are_distinct_training_points() {
        let ds = toy(40, 3);
        let cfg = KernelConfig::gaussian(1.0).unwrap();
        let k = gram_sym(&ds.rows, &cfg);
        let set = sample_leverage(&ds, k.as_ref(), 10, 10, 4).unwrap();
        let Landmarks::Points { selection: Some(sel), .. } = &set.landmarks else { panic!() };
        let mut s = sel.clone();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), sel.len());
        assert!(sel.len() <= 10);
    }

    #[test]
    fn selection_blocks_match_combination_form() {
        let ds = toy(30, 4);
        let cfg = KernelConfig::gaussian(1.2).unwrap();
        let k = gram_sym(&ds.rows, &cfg);
        let set = sample_uniform(&ds, 7, 2).unwrap();
        let pts = set.points().unwrap();
        let p = set.combination_matrix(30).unwrap();
        let kmn = gram(pts, &ds.rows, &cfg);
        let kmm = gram_sym(pts, &cfg);
        assert!((p.transpose() * &k - &kmn).norm_max() <= 1e-10);
        assert!((p.transpose() * &k * &p - &kmm).norm_max() <= 1e-10);
    }

    #[test]
    fn kmeans_all_points_are_centroids() {
        let ds = toy(9, 6);
        let res = kmeans(&ds, 9, 1, 50).unwrap();
        let mut cents = res.centroids.clone();
        let mut pts: Vec<Vec<f64>> = ds.rows.iter().map(|r| r.to_dense(3)).collect();
        let key = |v: &Vec<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        cents.sort_by_key(key);
        pts.sort_by_key(key);
        assert_eq!(cents, pts);
    }

    #[test]
    fn kmeans_recovers_blob_means() {
        let mut r = SeededRng::new(12);
        let mut text = String::new();
        let mut sums = [[0.0f64; 2]; 2];
        for i in 0..100 {
            let blob = i % 2;
            let c = if blob == 0 { -10.0 } else { 10.0 };
            let (x, y) = (c + 0.5 * r.normal(), c + 0.5 * r.normal());
            sums[blob][0] += x;
            sums[blob][1] += y;
            text.push_str(&format!("{blob} 1:{x} 2:{y}\n"));
        }
        let ds = parse_sparse_str(&text).unwrap();
        let res = kmeans(&ds, 2, 3, 100).unwrap();
        for cen in &res.centroids {
            let blob = if cen[0] < 0.0 { 0 } else { 1 };
            for f in 0..2 {
                assert!((cen[f] - sums[blob][f] / 50.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn kmeans_objective_non_increasing() {
        let ds = toy(200, 8);
        for seed in 0..5 {
            let res = kmeans(&ds, 7, seed, 100).unwrap();
            for w in res.objective.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
            }
        }
        assert!(sample_kmeans(&ds, 201, 1, 10).is_err());
        let set = sample_kmeans(&ds, 5, 1, 10).unwrap();
        assert!(!set.is_combination_of_training());
    }
}
