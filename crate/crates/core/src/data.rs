//! Sparse datasets in SVM-light / LIBSVM text format, plus seeded splitting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{invalid, Error, Result};
use crate::rng::SeededRng;

/// Sparse feature vector with 1-based, strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVec {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(invalid("index and value lists differ in length"));
        }
        if indices.first() == Some(&0) {
            return Err(invalid("feature indices are 1-based"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("feature indices must be strictly increasing"));
        }
        Ok(Self { indices, values })
    }

    /// Keeps the nonzero entries of a dense vector; position `i` becomes index `i + 1`.
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                indices.push(i as u32 + 1);
                values.push(v);
            }
        }
        Self { indices, values }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Largest feature index, 0 for the empty vector.
    pub fn max_index(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize)
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i as usize - 1] = v;
        }
        out
    }

    /// ‖self − other‖², accumulated in increasing feature-index order.
    pub fn sq_distance(&self, other: &SparseVec) -> f64 {
        let (a, b) = (self, other);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.nnz() || j < b.nnz() {
            let ia = a.indices.get(i).copied().unwrap_or(u32::MAX);
            let ib = b.indices.get(j).copied().unwrap_or(u32::MAX);
            let d = if ia == ib {
                let d = a.values[i] - b.values[j];
                i += 1;
                j += 1;
                d
            } else if ia < ib {
                i += 1;
                a.values[i - 1]
            } else {
                j += 1;
                b.values[j - 1]
            };
            acc += d * d;
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<SparseVec>,
    /// Dense class ids `0..class_names.len()`.
    pub labels: Vec<usize>,
    /// Number of features (largest index seen).
    pub dim: usize,
    /// Original label strings, indexed by class id.
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(rows: Vec<SparseVec>, labels: Vec<usize>, dim: usize, class_names: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if class_names.len() < 2 {
            return Err(invalid("a dataset needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(invalid(format!("label id {bad} out of range")));
        }
        if let Some(r) = rows.iter().find(|r| r.max_index() > dim) {
            return Err(invalid(format!(
                "feature index {} exceeds dimension {dim}",
                r.max_index()
            )));
        }
        Ok(Self {
            rows,
            labels,
            dim,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows `indices`, in the given order; class metadata is shared.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
            class_names: self.class_names.clone(),
        }
    }

    /// One-vs-rest targets: +1 for `class`, −1 otherwise.
    pub fn binary_targets(&self, class: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect()
    }

    /// Per-feature standardization (zero mean, unit variance) fitted on `self`.
    pub fn standardizer(&self) -> Standardizer {
        let n = self.len().max(1) as f64;
        let mut mean = vec![0.0; self.dim];
        let mut sq = vec![0.0; self.dim];
        for r in &self.rows {
            for (&i, &v) in r.indices().iter().zip(r.values()) {
                mean[i as usize - 1] += v;
                sq[i as usize - 1] += v * v;
            }
        }
        let scale = mean
            .iter_mut()
            .zip(&sq)
            .map(|(m, s)| {
                *m /= n;
                let var = (s / n - *m * *m).max(0.0);
                if var > 0.0 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    /// SVM-light text, labels written with their original strings.
    pub fn to_svmlight(&self) -> String {
        let mut out = String::new();
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            out.push_str(&self.class_names[label]);
            for (&i, &v) in row.indices().iter().zip(row.values()) {
                let _ = write!(out, " {i}:{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Applies the transform; the result is dense in every feature with nonzero mean.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let rows = ds
            .rows
            .iter()
            .map(|r| {
                let dense: Vec<f64> = r
                    .to_dense(self.mean.len())
                    .iter()
                    .zip(self.mean.iter().zip(&self.scale))
                    .map(|(v, (m, s))| (v - m) * s)
                    .collect();
                SparseVec::from_dense(&dense)
            })
            .collect();
        Dataset {
            rows,
            labels: ds.labels.clone(),
            dim: ds.dim,
            class_names: ds.class_names.clone(),
        }
    }
}

/// Parses SVM-light text: `<label> <index>:<value> ...` per line, `#` starts a comment.
pub fn parse_sparse_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut class_of: HashMap<u64, usize> = HashMap::new();
    let mut dim = 0usize;
    let mut last_line = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let mut tokens = content.split_whitespace();
        let label = tokens.next().expect("nonempty line has a token");
        let numeric: f64 = label
            .parse()
            .map_err(|_| err(format!("label `{label}` is not a number")))?;
        if !numeric.is_finite() {
            return Err(err(format!("label `{label}` is not finite")));
        }
        // +1 and 1 name the same class
        let key = (numeric + 0.0).to_bits();
        let class = *class_of.entry(key).or_insert_with(|| {
            class_names.push(label.to_string());
            class_names.len() - 1
        });

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("token `{tok}` is not <index>:<value>")))?;
            let i: u32 = i
                .parse()
                .map_err(|_| err(format!("bad feature index in `{tok}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| err(format!("bad feature value in `{tok}`")))?;
            if i == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if !v.is_finite() {
                return Err(err(format!("non-finite value in `{tok}`")));
            }
            if indices.last().is_some_and(|&prev| prev >= i) {
                return Err(err(format!("index {i} is not increasing")));
            }
            indices.push(i);
            values.push(v);
        }
        dim = dim.max(indices.last().map_or(0, |&i| i as usize));
        rows.push(SparseVec { indices, values });
        labels.push(class);
    }

    if rows.is_empty() {
        return Err(Error::Parse {
            line: last_line.max(1),
            message: "no data lines".into(),
        });
    }
    if class_names.len() < 2 {
        return Err(Error::Parse {
            line: last_line,
            message: "fewer than two distinct labels".into(),
        });
    }
    Dataset::new(rows, labels, dim, class_names)
}

pub fn parse_sparse_str(text: &str) -> Result<Dataset> {
    parse_sparse_dataset(text.as_bytes())
}

/// Train / validation / test index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitManifest {
    /// Seeded partition of `0..n`. Validation and test get `floor(n·frac)`
    /// points (with a 1e-9 guard against representation error); train takes
    /// the remainder. Each part is sorted ascending.
    pub fn new(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Self> {
        let (ft, fv, fs) = fractions;
        if !(ft > 0.0 && fv > 0.0 && fs > 0.0) {
            return Err(invalid("split fractions must be positive"));
        }
        if ((ft + fv + fs) - 1.0).abs() > 1e-9 {
            return Err(invalid("split fractions must sum to 1"));
        }
        let n_val = (n as f64 * fv + 1e-9).floor() as usize;
        let n_test = (n as f64 * fs + 1e-9).floor() as usize;
        let n_train = n.saturating_sub(n_val + n_test);
        if n_train == 0 || n_val == 0 || n_test == 0 {
            return Err(invalid(format!(
                "split of {n} points leaves an empty part ({n_train}/{n_val}/{n_test})"
            )));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        SeededRng::new(seed).shuffle(&mut perm);
        let mut train = perm[..n_train].to_vec();
        let mut val = perm[n_train..n_train + n_val].to_vec();
        let mut test = perm[n_train + n_val..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        Ok(Self { train, val, test })
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn apply(&self, ds: &Dataset) -> (Dataset, Dataset, Dataset) {
        (ds.subset(&self.train), ds.subset(&self.val), ds.subset(&self.test))
    }

    pub fn to_text(&self) -> String {
        let line = |name: &str, idx: &[usize]| {
            let body: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            format!("{name}: {}\n", body.join(" "))
        };
        line("train", &self.train) + &line("val", &self.val) + &line("test", &self.test)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut parts: HashMap<&str, Vec<usize>> = HashMap::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (name, body) = line.split_once(':').ok_or_else(|| Error::Parse {
                line: k + 1,
                message: "expected `<part>: <indices>`".into(),
            })?;
            let idx = body
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: k + 1,
                    message: e.to_string(),
                })?;
            parts.insert(name.trim(), idx);
        }
        let mut take = |name: &str| {
            parts
                .remove(name)
                .ok_or_else(|| invalid(format!("split manifest lacks `{name}`")))
        };
        Ok(Self {
            train: take("train")?,
            val: take("val")?,
            test: take("test")?,
        })
    }
}

/// Convenience wrapper over [`SplitManifest::new`] + [`SplitManifest::apply`].
pub fn split(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    Ok(SplitManifest::new(ds.len(), fractions, seed)?.apply(ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_small_file() {
        let ds = parse_sparse_str("+1 1:0.5 3:2.0\n-1 2:1.0\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim, 3);
        assert_eq!(ds.class_names, vec!["+1", "-1"]);
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.rows[0].to_dense(3), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn comments_blank_lines_and_equivalent_labels() {
        let ds = parse_sparse_str("# header\n1 1:1 # trailing\n\n+1 2:1\n2 1:3\n").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels, vec![0, 0, 1]);
        assert_eq!(ds.n_classes(), 2);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let line_of = |text: &str| match parse_sparse_str(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(line_of("1 3:a\n"), 1);
        assert_eq!(line_of("1 1:1\n2 3:1 2:1\n"), 2);
        assert_eq!(line_of("1 1:1\n2 0:1\n"), 2);
        assert_eq!(line_of("1 1:1\nx 1:1\n"), 2);
        assert_eq!(line_of("1 1:1\n2 4\n"), 2);
        assert_eq!(line_of(""), 1);
        assert!(matches!(parse_sparse_str("1 1:1\n1 2:1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn split_sizes() {
        let m = SplitManifest::new(100, (0.64, 0.16, 0.20), 1).unwrap();
        assert_eq!(m.sizes(), (64, 16, 20));
        let m = SplitManifest::new(10, (0.5, 0.25, 0.25), 1).unwrap();
        assert_eq!(m.sizes(), (6, 2, 2));
        assert!(SplitManifest::new(3, (0.8, 0.1, 0.1), 1).is_err());
        assert!(SplitManifest::new(100, (0.5, 0.2, 0.2), 1).is_err());
    }

    #[test]
    fn split_is_seeded_partition() {
        let a = SplitManifest::new(50, (0.6, 0.2, 0.2), 7).unwrap();
        let b = SplitManifest::new(50, (0.6, 0.2, 0.2), 7).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_ne!(a, SplitManifest::new(50, (0.6, 0.2, 0.2), 8).unwrap());
        assert_eq!(SplitManifest::from_text(&a.to_text()).unwrap(), a);
    }

    #[test]
    fn sparse_distance_matches_dense() {
        let a = SparseVec::new(vec![1, 4, 7], vec![0.5, -1.0, 2.0]).unwrap();
        let b = SparseVec::new(vec![2, 4], vec![3.0, 1.0]).unwrap();
        let (da, db) = (a.to_dense(7), b.to_dense(7));
        let dense: f64 = da.iter().zip(&db).map(|(x, y)| (x - y) * (x - y)).sum();
        assert_eq!(a.sq_distance(&b), dense);
        assert_eq!(a.sq_distance(&a), 0.0);
    }

    #[test]
    fn standardizer_centers_features() {
        let ds = parse_sparse_str("1 1:1 2:4\n2 1:3\n1 1:5 2:2\n").unwrap();
        let z = ds.standardizer().apply(&ds);
        for f in 0..2 {
            let mean: f64 = z.rows.iter().map(|r| r.to_dense(2)[f]).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        let row = proptest::collection::btree_map(1u32..40, -1e3f64..1e3, 0..6);
        proptest::collection::vec((row, 0usize..3), 2..20).prop_map(|items| {
            let rows: Vec<SparseVec> = items
                .iter()
                .map(|(m, _)| SparseVec::new(m.keys().copied().collect(), m.values().copied().collect()).unwrap())
                .collect();
            let mut labels: Vec<usize> = items.iter().map(|(_, l)| *l).collect();
            labels[0] = 0;
            labels[1] = 1;
            // relabel into first-appearance order, as the parser does
            let mut order = Vec::new();
            for &l in &labels {
                if !order.contains(&l) {
                    order.push(l);
                }
            }
            let labels = labels.iter().map(|l| order.iter().position(|o| o == l).unwrap()).collect();
            let names = order.iter().map(|l| format!("{}", *l as i64 - 1)).collect();
            let dim = rows.iter().map(|r| r.max_index()).max().unwrap();
            Dataset::new(rows, labels, dim, names).unwrap()
        })
    }

    proptest! {
        #[test]
        fn svmlight_round_trip(ds in arb_dataset()) {
            prop_assume!(ds.dim > 0);
            let text = ds.to_svmlight();
            let back = parse_sparse_str(&text).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
