//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};
use spa_core::machines::{Approach, Loss};
use spa_core::numerics::DEFAULT_REL_TOL;
use spa_core::sampling::Strategy;

/// Where the sweep reads its data from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// A sparse `label index:value ...` text file.
    File(PathBuf),
    /// The seeded splice-junction-like generator.
    SynthDna,
    /// Planar Gaussian blobs, mostly for tests and demos.
    SynthBlobs,
}

impl DatasetSource {
    fn parse(s: &str) -> Self {
        match s {
            "synth:dna" => DatasetSource::SynthDna,
            "synth:blobs" => DatasetSource::SynthBlobs,
            path => DatasetSource::File(PathBuf::from(path)),
        }
    }

    fn render(&self) -> String {
        match self {
            DatasetSource::File(p) => p.display().to_string(),
            DatasetSource::SynthDna => "synth:dna".into(),
            DatasetSource::SynthBlobs => "synth:blobs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub dataset_name: String,
    pub synth_n: usize,
    pub synth_seed: u64,
    pub gamma: f64,
    /// Per-feature z-scoring fitted on the training split.
    pub standardize: bool,
    pub loss: Loss,
    pub lambda0: f64,
    /// When non-empty, λ₀ is picked from this grid by validation accuracy of
    /// the full-kernel model.
    pub lambda0_grid: Vec<f64>,
    pub svm_c: f64,
    pub svm_c_grid: Vec<f64>,
    /// Coordinate-descent epochs for the hinge loss.
    pub max_iter: usize,
    pub tol: f64,
    pub strategies: Vec<Strategy>,
    pub ratios: Vec<f64>,
    pub seeds: usize,
    pub seed_start: u64,
    pub approaches: Vec<Approach>,
    pub output_dir: PathBuf,
    /// Exact analysis (full Gram matrix, reference solution) only for
    /// `n_train ≤ exact_cap`.
    pub exact_cap: usize,
    pub split: (f64, f64, f64),
    pub split_seed: u64,
    pub rel_tol: f64,
    pub kmeans_iters: usize,
    pub workers: usize,
    /// Wall-clock timings break byte-identical reruns, so they are opt-in.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::SynthDna,
            dataset_name: "dna".into(),
            synth_n: 3125,
            synth_seed: 2021,
            gamma: 200.0,
            standardize: false,
            loss: Loss::Squared,
            lambda0: 1e-3,
            lambda0_grid: Vec::new(),
            svm_c: 1.0,
            svm_c_grid: Vec::new(),
            max_iter: 1000,
            tol: 1e-6,
            strategies: Strategy::ALL.to_vec(),
            ratios: (1..=10).map(|p| p as f64 / 100.0).collect(),
            seeds: 30,
            seed_start: 0,
            approaches: vec![Approach::Gsa, Approach::Lla],
            output_dir: PathBuf::from("results"),
            exact_cap: 3000,
            split: (0.64, 0.16, 0.2),
            split_seed: 0,
            rel_tol: DEFAULT_REL_TOL,
            kmeans_iters: 20,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            record_wall_time: false,
        }
    }
}

/// Keys in canonical order. Those marked `false` do not enter the config
/// hash: they change where or how fast results are produced, not what they
/// are.
const KEYS: &[(&str, bool)] = &[
    ("dataset", true),
    ("dataset_name", true),
    ("synth_n", true),
    ("synth_seed", true),
    ("gamma", true),
    ("standardize", true),
    ("loss", true),
    ("lambda0", true),
    ("lambda0_grid", true),
    ("svm_c", true),
    ("svm_c_grid", true),
    ("max_iter", true),
    ("tol", true),
    ("strategies", true),
    ("ratios", true),
    ("seeds", true),
    ("seed_start", true),
    ("approaches", true),
    ("exact_cap", true),
    ("split", true),
    ("split_seed", true),
    ("rel_tol", true),
    ("kmeans_iters", true),
    ("record_wall_time", true),
    ("output_dir", false),
    ("workers", false),
];

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

fn one<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "dataset" => self.dataset = DatasetSource::parse(v),
            "dataset_name" => self.dataset_name = v.to_string(),
            "synth_n" => self.synth_n = one(v)?,
            "synth_seed" => self.synth_seed = one(v)?,
            "gamma" => self.gamma = one(v)?,
            "standardize" => self.standardize = one(v)?,
            "loss" => self.loss = one(v)?,
            "lambda0" => self.lambda0 = one(v)?,
            "lambda0_grid" => self.lambda0_grid = list(v)?,
            "svm_c" => self.svm_c = one(v)?,
            "svm_c_grid" => self.svm_c_grid = list(v)?,
            "max_iter" => self.max_iter = one(v)?,
            "tol" => self.tol = one(v)?,
            "strategies" => self.strategies = list(v)?,
            "ratios" => self.ratios = list(v)?,
            "seeds" => self.seeds = one(v)?,
            "seed_start" => self.seed_start = one(v)?,
            "approaches" => self.approaches = list(v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "exact_cap" => self.exact_cap = one(v)?,
            "split" => {
                let f: Vec<f64> = list(v)?;
                if f.len() != 3 {
                    return Err(format!("`{v}`: expected train,val,test fractions"));
                }
                self.split = (f[0], f[1], f[2]);
            }
            "split_seed" => self.split_seed = one(v)?,
            "rel_tol" => self.rel_tol = one(v)?,
            "kmeans_iters" => self.kmeans_iters = one(v)?,
            "workers" => self.workers = one(v)?,
            "record_wall_time" => self.record_wall_time = one(v)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "dataset" => self.dataset.render(),
            "dataset_name" => self.dataset_name.clone(),
            "synth_n" => self.synth_n.to_string(),
            "synth_seed" => self.synth_seed.to_string(),
            "gamma" => self.gamma.to_string(),
            "standardize" => self.standardize.to_string(),
            "loss" => self.loss.name().to_string(),
            "lambda0" => self.lambda0.to_string(),
            "lambda0_grid" => join(&self.lambda0_grid),
            "svm_c" => self.svm_c.to_string(),
            "svm_c_grid" => join(&self.svm_c_grid),
            "max_iter" => self.max_iter.to_string(),
            "tol" => self.tol.to_string(),
            "strategies" => join(&self.strategies),
            "ratios" => join(&self.ratios),
            "seeds" => self.seeds.to_string(),
            "seed_start" => self.seed_start.to_string(),
            "approaches" => join(&self.approaches),
            "output_dir" => self.output_dir.display().to_string(),
            "exact_cap" => self.exact_cap.to_string(),
            "split" => format!("{},{},{}", self.split.0, self.split.1, self.split.2),
            "split_seed" => self.split_seed.to_string(),
            "rel_tol" => self.rel_tol.to_string(),
            "kmeans_iters" => self.kmeans_iters.to_string(),
            "workers" => self.workers.to_string(),
            "record_wall_time" => self.record_wall_time.to_string(),
            _ => unreachable!("every key in KEYS is rendered"),
        }
    }

    /// Parses a config file body and then the overrides, collecting every
    /// problem before failing.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    if let Err(e) = cfg.set(k, v) {
                        errors.push(format!("line {}: {e}", i + 1));
                    }
                }
                None => errors.push(format!("line {}: expected `key = value`", i + 1)),
            }
        }
        for o in overrides {
            match o.split_once('=') {
                Some((k, v)) => {
                    if let Err(e) = cfg.set(k, v) {
                        errors.push(format!("override `{o}`: {e}"));
                    }
                }
                None => errors.push(format!("override `{o}`: expected key=value")),
            }
        }
        errors.extend(cfg.problems());
        if !errors.is_empty() {
            bail!("invalid configuration:\n  {}", errors.join("\n  "));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, overrides)
    }

    /// Every validation failure, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.gamma > 0.0) {
            p.push("gamma must be positive".into());
        }
        if !(self.lambda0 > 0.0) || self.lambda0_grid.iter().any(|&l| !(l > 0.0)) {
            p.push("lambda0 values must be positive".into());
        }
        if !(self.svm_c > 0.0) || self.svm_c_grid.iter().any(|&c| !(c > 0.0)) {
            p.push("svm_c values must be positive".into());
        }
        if self.max_iter == 0 {
            p.push("max_iter must be at least 1".into());
        }
        if self.ratios.is_empty() || self.ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            p.push("ratios must be a non-empty list inside (0, 1]".into());
        }
        if self.seeds == 0 {
            p.push("seeds must be at least 1".into());
        }
        if self.strategies.is_empty() {
            p.push("strategies must not be empty".into());
        }
        if self.approaches.is_empty() {
            p.push("approaches must not be empty".into());
        }
        let (a, b, c) = self.split;
        if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
            p.push("split fractions must be positive and sum to 1".into());
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            p.push("rel_tol must lie in (0, 1)".into());
        }
        if self.workers == 0 {
            p.push("workers must be at least 1".into());
        }
        if self.dataset_name.is_empty() || self.dataset_name.contains(|ch: char| ch == ',' || ch.is_whitespace()) {
            p.push("dataset_name must be a non-empty word".into());
        }
        if let DatasetSource::File(path) = &self.dataset {
            if !path.is_file() {
                p.push(format!("dataset file {} does not exist", path.display()));
            }
        }
        p
    }

    /// Every key with its effective value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k));
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the result-relevant keys.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, hashed) in KEYS {
            if *hashed {
                h.update(format!("{k} = {}\n", self.get(k)));
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.ratios = vec![0.05, 1.0];
        cfg.lambda0_grid = vec![0.1, 1e-3];
        let back = ExperimentConfig::parse(&cfg.to_text(), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_win_and_errors_are_collected() {
        let text = "gamma = 3\nseeds = 4 # comment\n";
        let cfg = ExperimentConfig::parse(text, &["seeds=2".into()]).unwrap();
        assert_eq!((cfg.gamma, cfg.seeds), (3.0, 2));
        let err = ExperimentConfig::parse("gamma = -1\nbogus = 1\nratios = 2\n", &["noequals".into()])
            .unwrap_err()
            .to_string();
        for needle in ["bogus", "noequals", "gamma", "ratios"] {
            assert!(err.contains(needle), "{err}");
        }
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        b.workers = 7;
        assert_eq!(a.hash(), b.hash());
        b.gamma = 1.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
