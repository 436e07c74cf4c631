//! The landmark-ratio sweep: one job per (strategy, ratio, seed), each
//! training GSA and LLA (and optionally NCR) through the shared pipeline and
//! scoring them against the exact reference.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use faer::Mat;
use spa_core::analysis::{approximation_errors, ExactReference, AGGREGATION};
use spa_core::data::{parse_sparse_dataset, Dataset, SplitManifest};
use spa_core::kernel::{gram, gram_sym, KernelConfig};
use spa_core::machines::{
    accuracy, classes_from_scores, exact_krr, fit_weights, ncr_krr_analytic, one_vs_rest_targets, Approach, Loss,
    SolverConfig, TrainedModel,
};
use spa_core::numerics;
use spa_core::nystrom::NystromModel;
use spa_core::sampling::{
    sample_gaussian_sketch, sample_kmeans, sample_leverage, sample_uniform, LandmarkSet, Strategy,
};
use spa_core::synth::{blobs, dna_like, DnaLikeConfig};

use crate::config::{DatasetSource, ExperimentConfig};
use crate::stats::summarize;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 16] = [
    "dataset",
    "strategy",
    "approach",
    "ratio",
    "m",
    "s",
    "seed",
    "acc",
    "err_lla",
    "err_gsa",
    "bound_lla",
    "gram_trace_err",
    "gram_spectral_err",
    "wall_ms",
    "config_hash",
    "schema_version",
];

/// Slack for counting bound violations.
pub const BOUND_SLACK: f64 = 1e-6;

/// One CSV row: a (trial, approach) pair. The error columns describe the
/// trial and repeat across its approaches; they are empty when exact
/// analysis was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub dataset: String,
    pub strategy: Strategy,
    pub approach: Approach,
    pub ratio: f64,
    pub m: usize,
    pub s: usize,
    pub seed: u64,
    pub acc: f64,
    pub err_lla: Option<f64>,
    pub err_gsa: Option<f64>,
    pub bound_lla: Option<f64>,
    pub gram_trace_err: Option<f64>,
    pub gram_spectral_err: Option<f64>,
    pub wall_ms: u64,
    pub config_hash: String,
}

impl TrialRow {
    fn sort_key(&self) -> (&'static str, f64, u64, &'static str) {
        (self.strategy.name(), self.ratio, self.seed, self.approach.name())
    }

    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.dataset.clone(),
            self.strategy.to_string(),
            self.approach.to_string(),
            self.ratio.to_string(),
            self.m.to_string(),
            self.s.to_string(),
            self.seed.to_string(),
            self.acc.to_string(),
            opt(self.err_lla),
            opt(self.err_gsa),
            opt(self.bound_lla),
            opt(self.gram_trace_err),
            opt(self.gram_spectral_err),
            self.wall_ms.to_string(),
            self.config_hash.clone(),
            SCHEMA_VERSION.to_string(),
        ]
    }

    /// Value of a numeric metric column by name.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "acc" => Some(self.acc),
            "err_lla" => self.err_lla,
            "err_gsa" => self.err_gsa,
            "bound_lla" => self.bound_lla,
            "gram_trace_err" => self.gram_trace_err,
            "gram_spectral_err" => self.gram_spectral_err,
            _ => None,
        }
    }
}

/// Sweep inputs computed once per run.
pub struct Prepared {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub split: SplitManifest,
    pub kernel: KernelConfig,
    /// Full training Gram matrix, present when `n ≤ exact_cap`.
    pub k: Option<Arc<Mat<f64>>>,
    pub solver: SolverConfig,
    /// `(candidate, validation accuracy)` when a grid was searched.
    pub selection: Vec<(f64, f64)>,
    pub reference: Option<ExactReference>,
    pub acc_exact: Option<f64>,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    Ok(match &cfg.dataset {
        DatasetSource::File(path) => {
            let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            parse_sparse_dataset(std::io::BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))?
        }
        DatasetSource::SynthDna => dna_like(&DnaLikeConfig {
            n: cfg.synth_n,
            seed: cfg.synth_seed,
            ..DnaLikeConfig::default()
        })?,
        DatasetSource::SynthBlobs => blobs(cfg.synth_n, 3, 2.0, 1.0, cfg.synth_seed)?,
    })
}

fn base_solver(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        loss: cfg.loss,
        lambda0: cfg.lambda0,
        svm_c: cfg.svm_c,
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        seed: 0,
    }
}

/// Picks the first grid value with the best validation accuracy of the
/// full-kernel model.
fn select_by_validation(
    cfg: &ExperimentConfig,
    train: &Dataset,
    val: &Dataset,
    kernel: KernelConfig,
    k: &Mat<f64>,
) -> Result<(SolverConfig, Vec<(f64, f64)>, Option<ExactReference>)> {
    let mut solver = base_solver(cfg);
    let kv = gram(&val.rows, &train.rows, &kernel);
    let mut table = Vec::new();
    let mut best: Option<(f64, f64, Option<ExactReference>)> = None;
    match cfg.loss {
        Loss::Squared => {
            for &l in &cfg.lambda0_grid {
                let alpha = exact_krr(k.as_ref(), &train.labels, train.n_classes(), l)?;
                let acc = accuracy(&classes_from_scores((&kv * &alpha).as_ref()), &val.labels);
                table.push((l, acc));
                if best.as_ref().map_or(true, |b| acc > b.1) {
                    best = Some((l, acc, None));
                }
            }
            if let Some((l, _, _)) = best {
                solver.lambda0 = l;
            }
            Ok((solver, table, None))
        }
        Loss::Hinge => {
            for &c in &cfg.svm_c_grid {
                let s = SolverConfig { svm_c: c, ..solver };
                let r = ExactReference::compute(train, kernel, k.clone(), &s, cfg.rel_tol)?;
                let acc = accuracy(&classes_from_scores((&kv * &r.alpha).as_ref()), &val.labels);
                table.push((c, acc));
                if best.as_ref().map_or(true, |b| acc > b.1) {
                    best = Some((c, acc, Some(r)));
                }
            }
            let reference = best.map(|(c, _, r)| {
                solver.svm_c = c;
                r
            });
            Ok((solver, table, reference.flatten()))
        }
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let ds = load_dataset(cfg)?;
    let split = SplitManifest::new(ds.len(), cfg.split, cfg.split_seed)?;
    let (mut train, mut val, mut test) = split.apply(&ds);
    if cfg.standardize {
        let st = train.standardizer();
        (train, val, test) = (st.apply(&train), st.apply(&val), st.apply(&test));
    }
    let kernel = KernelConfig::gaussian(cfg.gamma)?;
    let n = train.len();
    let exact = n <= cfg.exact_cap;
    if !exact {
        let needs_k: Vec<&str> = cfg
            .strategies
            .iter()
            .filter(|s| matches!(s, Strategy::Gaussian | Strategy::Leverage))
            .map(|s| s.name())
            .collect();
        if !needs_k.is_empty() {
            bail!(
                "strategies {} need the full Gram matrix but n_train = {n} exceeds exact_cap = {}",
                needs_k.join(","),
                cfg.exact_cap
            );
        }
        if !cfg.lambda0_grid.is_empty() || !cfg.svm_c_grid.is_empty() {
            bail!("validation grids need the full Gram matrix but n_train = {n} exceeds exact_cap");
        }
    }
    let k = exact.then(|| gram_sym(&train.rows, &kernel));
    let (solver, selection, mut reference) = match &k {
        Some(k) if !cfg.lambda0_grid.is_empty() || !cfg.svm_c_grid.is_empty() => {
            select_by_validation(cfg, &train, &val, kernel, k)?
        }
        _ => (base_solver(cfg), Vec::new(), None),
    };
    if reference.is_none() {
        if let Some(k) = &k {
            reference = Some(ExactReference::compute(&train, kernel, k.clone(), &solver, cfg.rel_tol)?);
        }
    }
    let acc_exact = reference.as_ref().map(|r| {
        let scores = gram(&test.rows, &train.rows, &kernel) * &r.alpha;
        accuracy(&classes_from_scores(scores.as_ref()), &test.labels)
    });
    Ok(Prepared {
        train,
        val,
        test,
        split,
        kernel,
        k: k.map(Arc::new),
        solver,
        selection,
        reference,
        acc_exact,
    })
}

/// `m = ⌈ratio · n⌉`, with a guard so that e.g. `0.07 · 2000` is 140.
pub fn landmark_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

pub fn draw_landmarks(
    strategy: Strategy,
    train: &Dataset,
    k: Option<&Mat<f64>>,
    m: usize,
    seed: u64,
    kmeans_iters: usize,
) -> Result<LandmarkSet> {
    let need_k = || k.ok_or_else(|| anyhow!("{strategy} sampling needs the full Gram matrix"));
    Ok(match strategy {
        Strategy::Uniform => sample_uniform(train, m, seed)?,
        Strategy::Gaussian => {
            need_k()?;
            sample_gaussian_sketch(train.len(), m, seed)?
        }
        // rank parameter of the scores set to the landmark budget
        Strategy::Leverage => sample_leverage(train, need_k()?.as_ref(), m, m, seed)?,
        Strategy::KMeans => sample_kmeans(train, m, seed, kmeans_iters)?,
    })
}

/// NCR test scores from the analytic KRR solution, `|test| × c`.
fn ncr_scores(nystrom: &NystromModel, train: &Dataset, test: &Dataset, lambda0: f64) -> Result<Mat<f64>> {
    let targets = one_vs_rest_targets(&train.labels, train.n_classes());
    let kc = nystrom.landmark_kernel(&test.rows)?;
    let mut scores = Mat::zeros(test.len(), train.n_classes());
    for c in 0..train.n_classes() {
        let y = numerics::column(targets.as_ref(), c);
        let beta = ncr_krr_analytic(nystrom.k_mn.as_ref(), nystrom.k_mm.as_ref(), &y, lambda0, nystrom.rel_tol)?;
        let col = numerics::mat_t_vec(kc.as_ref(), &beta);
        for (t, v) in col.into_iter().enumerate() {
            scores[(t, c)] = v;
        }
    }
    Ok(scores)
}

pub struct TrialSpec {
    pub strategy: Strategy,
    pub ratio: f64,
    pub seed: u64,
}

/// Result of one trial before it is split into rows.
pub struct TrialOutcome {
    pub rows: Vec<TrialRow>,
    pub clamped: usize,
    pub bound_violation: bool,
}

pub fn run_trial(cfg: &ExperimentConfig, prep: &Prepared, spec: &TrialSpec, hash: &str) -> Result<TrialOutcome> {
    let start = Instant::now();
    let n = prep.train.len();
    let m = landmark_count(spec.ratio, n);
    let k = prep.k.as_deref();
    let set = draw_landmarks(spec.strategy, &prep.train, k, m, spec.seed, cfg.kmeans_iters)?;
    let nystrom = Arc::new(NystromModel::build(
        &prep.train.rows,
        set,
        prep.kernel,
        k.map(|k| k.as_ref()),
        cfg.rel_tol,
    )?);
    let solver = SolverConfig {
        seed: spec.seed,
        ..prep.solver
    };
    let weights = fit_weights(nystrom.features.as_ref(), &prep.train.labels, prep.train.n_classes(), &solver)?;
    let gsa = TrainedModel::from_weights(Approach::Gsa, nystrom.clone(), weights.clone(), solver)?;
    let lla = TrainedModel::from_weights(Approach::Lla, nystrom.clone(), weights, solver)?;

    let errors = match &prep.reference {
        Some(r) => Some(approximation_errors(
            r,
            nystrom.features.as_ref(),
            gsa.alpha.as_ref().expect("GSA models carry alpha").as_ref(),
        )?),
        None => None,
    };
    let mut accs = Vec::new();
    for &approach in &cfg.approaches {
        let acc = match approach {
            Approach::Gsa => gsa.accuracy(&prep.test)?,
            Approach::Lla => lla.accuracy(&prep.test)?,
            Approach::Ncr => match solver.loss {
                Loss::Squared => {
                    let scores = ncr_scores(&nystrom, &prep.train, &prep.test, solver.lambda0)?;
                    accuracy(&classes_from_scores(scores.as_ref()), &prep.test.labels)
                }
                // NCR is LLA with the standard basis; only the KRR case has a
                // separate closed form
                Loss::Hinge => lla.accuracy(&prep.test)?,
            },
        };
        accs.push((approach, acc));
    }
    let wall_ms = if cfg.record_wall_time {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    let rows = accs
        .into_iter()
        .map(|(approach, acc)| TrialRow {
            dataset: cfg.dataset_name.clone(),
            strategy: spec.strategy,
            approach,
            ratio: spec.ratio,
            m,
            s: nystrom.rank(),
            seed: spec.seed,
            acc,
            err_lla: errors.map(|e| e.err_lla),
            err_gsa: errors.map(|e| e.err_gsa),
            bound_lla: errors.map(|e| e.bound_lla),
            gram_trace_err: errors.map(|e| e.gram.trace_norm),
            gram_spectral_err: errors.map(|e| e.gram.spectral_norm),
            wall_ms,
            config_hash: hash.to_string(),
        })
        .collect();
    Ok(TrialOutcome {
        rows,
        clamped: errors.map_or(0, |e| e.clamped),
        bound_violation: errors.is_some_and(|e| !e.bound_holds(BOUND_SLACK)),
    })
}

pub struct SweepOutcome {
    pub prepared: Prepared,
    pub rows: Vec<TrialRow>,
    pub config_hash: String,
    pub clamped: usize,
    pub bound_violations: usize,
    pub trials: usize,
}

/// Runs every trial on a bounded worker pool. Rows come back sorted by
/// strategy, ratio, seed and approach, independent of scheduling.
pub fn run_sweep(cfg: &ExperimentConfig, progress: bool) -> Result<SweepOutcome> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        bail!("invalid configuration:\n  {}", problems.join("\n  "));
    }
    let prepared = prepare(cfg)?;
    let hash = cfg.hash();
    let mut jobs = Vec::new();
    for &strategy in &cfg.strategies {
        for &ratio in &cfg.ratios {
            for i in 0..cfg.seeds as u64 {
                jobs.push(TrialSpec {
                    strategy,
                    ratio,
                    seed: cfg.seed_start + i,
                });
            }
        }
    }
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<TrialOutcome>)>> = Mutex::new(Vec::with_capacity(jobs.len()));
    let workers = cfg.workers.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let outcome = run_trial(cfg, &prepared, &jobs[i], &hash);
                let failed = outcome.is_err();
                results.lock().expect("result lock").push((i, outcome));
                let finished = done.fetch_add(1, Ordering::SeqCst) + 1;
                if progress {
                    eprintln!(
                        "[{finished}/{}] {} ratio={} seed={}",
                        jobs.len(),
                        jobs[i].strategy,
                        jobs[i].ratio,
                        jobs[i].seed
                    );
                }
                if failed {
                    // stop handing out work; the error is reported below
                    next.store(jobs.len(), Ordering::SeqCst);
                }
            });
        }
    });
    let mut results = results.into_inner().expect("result lock");
    results.sort_by_key(|(i, _)| *i);
    let mut rows = Vec::new();
    let mut clamped = 0;
    let mut bound_violations = 0;
    for (i, r) in results {
        let j = &jobs[i];
        let out = r.with_context(|| format!("trial {} ratio={} seed={}", j.strategy, j.ratio, j.seed))?;
        clamped += out.clamped;
        bound_violations += usize::from(out.bound_violation);
        rows.extend(out.rows);
    }
    rows.sort_by(|a, b| a.sort_key().partial_cmp(&b.sort_key()).expect("ratios are finite"));
    Ok(SweepOutcome {
        prepared,
        rows,
        config_hash: hash,
        clamped,
        bound_violations,
        trials: jobs.len(),
    })
}

pub fn trials_csv(rows: &[TrialRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    Ok(w.into_inner().map_err(|e| anyhow!("flushing CSV: {e}"))?)
}

/// Reads a trials CSV, failing with the list of missing columns when the
/// schema does not match.
pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let missing: Vec<&str> = CSV_COLUMNS
        .iter()
        .copied()
        .filter(|c| !headers.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        bail!("schema error in {}: missing columns {}", path.display(), missing.join(", "));
    }
    let col = |name: &str| headers.iter().position(|h| h == name).expect("checked above");
    let idx: BTreeMap<&str, usize> = CSV_COLUMNS.iter().map(|&c| (c, col(c))).collect();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |c: &str| rec.get(idx[c]).unwrap_or("");
        let ctx = || format!("{} record {}", path.display(), line + 1);
        let num = |c: &str| -> Result<f64> { get(c).parse::<f64>().with_context(|| format!("{}: column {c}", ctx())) };
        let opt = |c: &str| -> Result<Option<f64>> {
            let v = get(c);
            if v.is_empty() {
                Ok(None)
            } else {
                Ok(Some(v.parse::<f64>().with_context(|| format!("{}: column {c}", ctx()))?))
            }
        };
        rows.push(TrialRow {
            dataset: get("dataset").to_string(),
            strategy: get("strategy").parse().with_context(ctx)?,
            approach: get("approach").parse().with_context(ctx)?,
            ratio: num("ratio")?,
            m: get("m").parse().with_context(ctx)?,
            s: get("s").parse().with_context(ctx)?,
            seed: get("seed").parse().with_context(ctx)?,
            acc: num("acc")?,
            err_lla: opt("err_lla")?,
            err_gsa: opt("err_gsa")?,
            bound_lla: opt("bound_lla")?,
            gram_trace_err: opt("gram_trace_err")?,
            gram_spectral_err: opt("gram_spectral_err")?,
            wall_ms: get("wall_ms").parse().with_context(ctx)?,
            config_hash: get("config_hash").to_string(),
        });
    }
    Ok(rows)
}

pub const AGGREGATE_METRICS: [&str; 6] = [
    "acc",
    "err_lla",
    "err_gsa",
    "bound_lla",
    "gram_trace_err",
    "gram_spectral_err",
];

/// Per-(dataset, strategy, approach, ratio) summaries over seeds, as CSV.
pub fn aggregates_csv(rows: &[TrialRow]) -> Result<Vec<u8>> {
    let mut groups: Vec<(String, Strategy, Approach, f64, usize, Vec<&TrialRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|g| {
            g.0 == r.dataset && g.1 == r.strategy && g.2 == r.approach && g.3 == r.ratio
        }) {
            Some(g) => g.5.push(r),
            None => groups.push((r.dataset.clone(), r.strategy, r.approach, r.ratio, r.m, vec![r])),
        }
    }
    groups.sort_by(|a, b| {
        (a.0.as_str(), a.1.name(), a.2.name(), a.3)
            .partial_cmp(&(b.0.as_str(), b.1.name(), b.2.name(), b.3))
            .expect("ratios are finite")
    });
    let mut header = vec![
        "dataset".to_string(),
        "strategy".into(),
        "approach".into(),
        "ratio".into(),
        "m".into(),
        "count".into(),
    ];
    for metric in AGGREGATE_METRICS {
        for stat in ["median", "mean", "std"] {
            header.push(format!("{metric}_{stat}"));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for (dataset, strategy, approach, ratio, m, members) in &groups {
        let mut rec = vec![
            dataset.clone(),
            strategy.to_string(),
            approach.to_string(),
            ratio.to_string(),
            m.to_string(),
            members.len().to_string(),
        ];
        for metric in AGGREGATE_METRICS {
            let vals: Vec<f64> = members.iter().filter_map(|r| r.metric(metric)).collect();
            match summarize(&vals) {
                Some(s) => rec.extend([s.median.to_string(), s.mean.to_string(), s.std.to_string()]),
                None => rec.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow!("flushing CSV: {e}"))?)
}

pub fn manifest_text(cfg: &ExperimentConfig, out: &SweepOutcome) -> String {
    let p = &out.prepared;
    let mut s = String::new();
    let _ = writeln!(s, "# effective configuration, defaults included");
    s.push_str(&cfg.to_text());
    let _ = writeln!(s, "\n# run");
    let _ = writeln!(s, "config_hash = {}", out.config_hash);
    let _ = writeln!(s, "schema_version = {SCHEMA_VERSION}");
    let (a, b, c) = p.split.sizes();
    let _ = writeln!(s, "n_train = {a}\nn_val = {b}\nn_test = {c}");
    let _ = writeln!(s, "n_features = {}\nn_classes = {}", p.train.dim, p.train.n_classes());
    let _ = writeln!(s, "landmark_rule = m = ceil(ratio * n_train)");
    let _ = writeln!(s, "rows = one per (strategy, ratio, seed, approach)");
    let _ = writeln!(s, "trials = {}\nrow_count = {}", out.trials, out.rows.len());
    match p.solver.loss {
        Loss::Squared => {
            let _ = writeln!(s, "lambda0_used = {}", p.solver.lambda0);
        }
        Loss::Hinge => {
            let _ = writeln!(s, "svm_c_used = {}", p.solver.svm_c);
            let _ = writeln!(
                s,
                "svm_note = C-parameterized L2-regularized hinge SVM (dual coordinate descent) stands in for nu-SVM; max_iter counts coordinate-descent epochs"
            );
        }
    }
    for (v, acc) in &p.selection {
        let _ = writeln!(s, "validation_accuracy[{v}] = {acc}");
    }
    match &p.reference {
        Some(r) => {
            let _ = writeln!(s, "exact_analysis = performed");
            let _ = writeln!(s, "reference = pipeline with all training points as landmarks, alpha = pinv(G) w");
            let _ = writeln!(s, "reference_rank = {}", r.nystrom.rank());
            let _ = writeln!(s, "error_aggregation = {AGGREGATION}");
            let _ = writeln!(s, "clamped_negative_squares = {}", out.clamped);
            let _ = writeln!(s, "bound_violations = {}", out.bound_violations);
        }
        None => {
            let _ = writeln!(s, "exact_analysis = skipped (n_train > exact_cap)");
        }
    }
    if let Some(acc) = p.acc_exact {
        let _ = writeln!(s, "acc_exact = {acc}");
    }
    s
}

pub struct OutputPaths {
    pub trials: PathBuf,
    pub aggregates: PathBuf,
    pub manifest: PathBuf,
    pub split: PathBuf,
}

pub fn write_outputs(cfg: &ExperimentConfig, out: &SweepOutcome) -> Result<OutputPaths> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating output dir {}", dir.display()))?;
    let paths = OutputPaths {
        trials: dir.join("trials.csv"),
        aggregates: dir.join("aggregates.csv"),
        manifest: dir.join("run_manifest.txt"),
        split: dir.join("split_manifest.txt"),
    };
    let write = |p: &Path, bytes: &[u8]| fs::write(p, bytes).with_context(|| format!("writing {}", p.display()));
    write(&paths.trials, &trials_csv(&out.rows)?)?;
    write(&paths.aggregates, &aggregates_csv(&out.rows)?)?;
    write(&paths.manifest, manifest_text(cfg, out).as_bytes())?;
    write(&paths.split, out.prepared.split.to_text().as_bytes())?;
    Ok(paths)
}
