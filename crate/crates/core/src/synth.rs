//! Seeded synthetic datasets.

use crate::data::{Dataset, SparseVec};
use crate::error::{invalid, Result};
use crate::rng::SeededRng;

/// Shape of the splice-junction-like generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnaLikeConfig {
    pub n: usize,
    /// Sequence length; each position becomes three binary features.
    pub positions: usize,
    /// Half-width of the motif window around the sequence centre.
    pub motif_half_width: usize,
    /// Probability that a motif position shows its consensus nucleotide.
    pub motif_strength: f64,
    /// Probability that a label is replaced by a uniformly drawn one.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for DnaLikeConfig {
    /// 3125 points: a 64/16/20 split leaves 2000 for training.
    fn default() -> Self {
        Self {
            n: 3125,
            positions: 60,
            motif_half_width: 5,
            motif_strength: 0.75,
            label_noise: 0.05,
            seed: 2021,
        }
    }
}

/// Nucleotide `b ∈ {A, C, G, T}` as indicator bits `100, 010, 001, 000`.
fn push_nucleotide(indices: &mut Vec<u32>, position: usize, b: usize) {
    if b < 3 {
        indices.push((3 * position + b + 1) as u32);
    }
}

/// Three classes (two junction types and "neither", in proportions
/// 1 : 1 : 2) over `3 · positions` binary features. Each junction class has
/// its own consensus around the sequence centre; the background
/// composition varies smoothly with position.
pub fn dna_like(cfg: &DnaLikeConfig) -> Result<Dataset> {
    if cfg.n < 3 || cfg.positions == 0 || 2 * cfg.motif_half_width + 1 > cfg.positions {
        return Err(invalid("dna-like generator needs n ≥ 3 and a motif window inside the sequence"));
    }
    if !(0.0..=1.0).contains(&cfg.motif_strength) || !(0.0..=1.0).contains(&cfg.label_noise) {
        return Err(invalid("probabilities must lie in [0, 1]"));
    }
    let mut rng = SeededRng::new(cfg.seed);
    let background: Vec<[f64; 4]> = (0..cfg.positions)
        .map(|_| {
            let w: Vec<f64> = (0..4).map(|_| 0.5 + rng.uniform()).collect();
            let total: f64 = w.iter().sum();
            [w[0] / total, w[1] / total, w[2] / total, w[3] / total]
        })
        .collect();
    let centre = cfg.positions / 2;
    let window = (centre - cfg.motif_half_width)..=(centre + cfg.motif_half_width);
    let consensus: Vec<Vec<usize>> = (0..2)
        .map(|_| window.clone().map(|_| rng.below(4)).collect())
        .collect();

    let mut rows = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let class = match rng.below(4) {
            0 => 0,
            1 => 1,
            _ => 2,
        };
        let mut indices = Vec::with_capacity(cfg.positions);
        for p in 0..cfg.positions {
            let motif = if class < 2 && window.contains(&p) {
                Some(consensus[class][p - window.start()])
            } else {
                None
            };
            let b = match motif {
                Some(b) if rng.uniform() < cfg.motif_strength => b,
                _ => {
                    let u = rng.uniform();
                    let probs = &background[p];
                    let mut acc = 0.0;
                    let mut pick = 3;
                    for (k, &q) in probs.iter().enumerate() {
                        acc += q;
                        if u < acc {
                            pick = k;
                            break;
                        }
                    }
                    pick
                }
            };
            push_nucleotide(&mut indices, p, b);
        }
        let label = if rng.uniform() < cfg.label_noise {
            rng.below(3)
        } else {
            class
        };
        let values = vec![1.0; indices.len()];
        rows.push(SparseVec::new(indices, values)?);
        labels.push(label);
    }
    Dataset::new(
        rows,
        labels,
        3 * cfg.positions,
        vec!["1".into(), "2".into(), "3".into()],
    )
}

/// `n` points in the plane from `classes` isotropic Gaussian blobs whose
/// centres sit evenly on a circle of radius `separation`.
pub fn blobs(n: usize, classes: usize, separation: f64, spread: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || n < classes {
        return Err(invalid("blobs need at least two classes and one point per class"));
    }
    if !(spread > 0.0) {
        return Err(invalid("blob spread must be positive"));
    }
    let mut rng = SeededRng::new(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let angle = std::f64::consts::TAU * c as f64 / classes as f64;
        let x = separation * angle.cos() + spread * rng.normal();
        let y = separation * angle.sin() + spread * rng.normal();
        rows.push(SparseVec::from_dense(&[x, y]));
        labels.push(c);
    }
    Dataset::new(rows, labels, 2, (0..classes).map(|c| c.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::split;

    #[test]
    fn dna_like_shape() {
        let ds = dna_like(&DnaLikeConfig::default()).unwrap();
        assert_eq!(ds.len(), 3125);
        assert_eq!(ds.n_classes(), 3);
        assert!(ds.dim <= 180);
        for r in &ds.rows {
            assert!(r.values().iter().all(|&v| v == 1.0));
            // at most one indicator per position
            let mut pos: Vec<u32> = r.indices().iter().map(|i| (i - 1) / 3).collect();
            pos.dedup();
            assert_eq!(pos.len(), r.nnz());
        }
        let (train, val, test) = split(&ds, (0.64, 0.16, 0.2), 0).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (2000, 500, 625));
        let counts: Vec<usize> = (0..3).map(|c| ds.labels.iter().filter(|&&l| l == c).count()).collect();
        assert!(counts[2] > counts[0] && counts[2] > counts[1]);
    }

    #[test]
    fn generators_are_seeded() {
        let cfg = DnaLikeConfig {
            n: 50,
            ..DnaLikeConfig::default()
        };
        assert_eq!(dna_like(&cfg).unwrap(), dna_like(&cfg).unwrap());
        let other = DnaLikeConfig { seed: 1, ..cfg };
        assert_ne!(dna_like(&cfg).unwrap(), dna_like(&other).unwrap());
        assert_eq!(blobs(20, 3, 2.0, 0.5, 4).unwrap(), blobs(20, 3, 2.0, 0.5, 4).unwrap());
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = DnaLikeConfig {
            positions: 4,
            ..DnaLikeConfig::default()
        };
        assert!(dna_like(&cfg).is_err());
        assert!(blobs(10, 1, 1.0, 1.0, 0).is_err());
        assert!(blobs(10, 2, 1.0, 0.0, 0).is_err());
    }
}
