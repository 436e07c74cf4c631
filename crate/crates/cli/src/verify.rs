//! `spa verify`: the property suites of the core modules, run on small
//! seeded synthetic instances.

use std::sync::Arc;

use anyhow::Result;
use faer::Mat;
use spa_core::analysis::{
    approximation_errors, column_inclusion_residual, inclusion_rel_tol, span_rank_certificate, ExactReference,
};
use spa_core::data::{Dataset, SparseVec};
use spa_core::kernel::{gram, gram_sym, kernel_column, KernelConfig};
use spa_core::machines::{
    classes_from_scores, exact_krr, fit_weights, gsa_krr_woodbury, krr_lowrank_objective, ncr_krr_analytic,
    one_vs_rest_targets, solve_svm_linear, Approach, SolverConfig, TrainedModel,
};
use spa_core::numerics::{self, DEFAULT_REL_TOL};
use spa_core::nystrom::{gram_error_norms, reconstruction_error, NystromModel};
use spa_core::persist::{read_trained_model, trained_model_bytes};
use spa_core::rng::SeededRng;
use spa_core::sampling::{LandmarkSet, Strategy};
use spa_core::synth::blobs;

use crate::sweep::draw_landmarks;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct Instance {
    ds: Dataset,
    kernel: KernelConfig,
    k: Mat<f64>,
}

fn instance(seed: u64) -> Result<Instance> {
    let mut rng = SeededRng::new(seed);
    let n = 40 + rng.below(41);
    let ds = blobs(n, 2 + rng.below(2), 2.0, 1.0, seed)?;
    let kernel = KernelConfig::gaussian(0.8 + rng.uniform())?;
    let k = gram_sym(&ds.rows, &kernel);
    Ok(Instance { ds, kernel, k })
}

fn model(inst: &Instance, strategy: Strategy, m: usize, seed: u64) -> Result<NystromModel> {
    let set = draw_landmarks(strategy, &inst.ds, Some(&inst.k), m, seed, 20)?;
    Ok(NystromModel::build(&inst.ds.rows, set, inst.kernel, Some(inst.k.as_ref()), DEFAULT_REL_TOL)?)
}

fn check(name: &'static str, worst: f64, limit: f64) -> Check {
    Check {
        name,
        passed: worst <= limit,
        detail: format!("worst {worst:.3e} (limit {limit:.0e})"),
    }
}

pub fn run_checks(instances: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut ortho = 0.0f64;
    let mut psd = 0.0f64;
    let mut trace = 0.0f64;
    let mut inclusion = 0.0f64;
    let mut pair_gap = 0.0f64;
    let mut ncr = 0.0f64;
    let mut objective = 0.0f64;
    let mut feature_match = 0.0f64;
    let mut bound = f64::NEG_INFINITY;
    for seed in 0..instances {
        let inst = instance(seed)?;
        let n = inst.ds.len();
        let m = 5 + (seed as usize % 8);
        for strategy in Strategy::ALL {
            let nm = model(&inst, strategy, m, seed)?;
            ortho = ortho.max(nm.orthonormality_defect());
            let norms = gram_error_norms(inst.k.as_ref(), nm.features.as_ref())?;
            let eig_sum: f64 = numerics::sym_eigenvalues(spa_core::nystrom::gram_residual(inst.k.as_ref(), nm.features.as_ref())?.as_ref())?
                .iter()
                .sum();
            let k_norm = numerics::sym_spectral_norm(inst.k.as_ref())?;
            psd = psd.max(-norms.min_eigenvalue / k_norm);
            trace = trace.max((norms.trace_norm - eig_sum).abs());
        }

        let mut rng = SeededRng::new(1000 + seed);
        for _ in 0..10 {
            let z = SparseVec::from_dense(&[3.0 * rng.normal(), 3.0 * rng.normal()]);
            let kz = kernel_column(&inst.ds.rows, &z, &inst.kernel);
            let r = column_inclusion_residual(inst.k.as_ref(), &kz, inclusion_rel_tol(n))?;
            inclusion = inclusion.max(r / numerics::norm2(&kz).max(1.0));
        }

        let uni = model(&inst, Strategy::Uniform, m, seed)?;
        let pts = uni.landmarks.points().expect("uniform landmarks are points").to_vec();
        for p in &pts {
            for q in &pts {
                let kpq = spa_core::kernel::kernel_eval(p, q, &inst.kernel);
                pair_gap = pair_gap.max(reconstruction_error(&uni, p, q, kpq)?);
            }
        }

        let lambda0 = [0.1, 1.0, 10.0][seed as usize % 3];
        let solver = SolverConfig::ridge(lambda0);
        let targets = one_vs_rest_targets(&inst.ds.labels, inst.ds.n_classes());
        let w = fit_weights(uni.features.as_ref(), &inst.ds.labels, inst.ds.n_classes(), &solver)?;
        let lla_scores = uni.project_batch(&inst.ds.rows)?.transpose() * &w;
        let kc = uni.landmark_kernel(&inst.ds.rows)?;
        for c in 0..inst.ds.n_classes() {
            let y = numerics::column(targets.as_ref(), c);
            let beta = ncr_krr_analytic(uni.k_mn.as_ref(), uni.k_mm.as_ref(), &y, lambda0, DEFAULT_REL_TOL)?;
            let s = numerics::mat_t_vec(kc.as_ref(), &beta);
            for (i, v) in s.iter().enumerate() {
                ncr = ncr.max((v - lla_scores[(i, c)]).abs());
            }
            let wc = numerics::column(w.as_ref(), c);
            let alpha = numerics::mat_vec(numerics::pseudo_inverse(uni.features.as_ref(), DEFAULT_REL_TOL).as_ref(), &wc);
            let wood = gsa_krr_woodbury(uni.features.as_ref(), &y, lambda0)?;
            let a = krr_lowrank_objective(uni.features.as_ref(), &alpha, &y, lambda0);
            let b = krr_lowrank_objective(uni.features.as_ref(), &wood, &y, lambda0);
            objective = objective.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
            if span_rank_certificate(uni.features.as_ref()) {
                let ga = numerics::mat_vec(uni.features.as_ref(), &alpha);
                for (x, y) in ga.iter().zip(&wc) {
                    feature_match = feature_match.max((x - y).abs());
                }
            }
        }

        let reference = ExactReference::compute(&inst.ds, inst.kernel, inst.k.clone(), &solver, DEFAULT_REL_TOL)?;
        let gsa = TrainedModel::from_weights(Approach::Gsa, Arc::new(uni.clone()), w, solver)?;
        let e = approximation_errors(&reference, uni.features.as_ref(), gsa.alpha.as_ref().unwrap().as_ref())?;
        bound = bound.max(e.err_lla - e.bound_lla);
    }
    out.push(check("orthonormal basis (A^T K_mm A = I)", ortho, 1e-8));
    out.push(check("Gram residual is PSD (relative min eigenvalue)", psd, 1e-8));
    out.push(check("trace of residual equals eigenvalue sum", trace, 1e-8));
    out.push(check("kernel columns lie in range(K)", inclusion, 1e-6));
    out.push(check("landmark pairs reconstructed exactly", pair_gap, 1e-8));
    out.push(check("NCR analytic KRR equals LLA", ncr, 1e-6));
    out.push(check("pinv(G) w attains the Woodbury objective", objective, 1e-8));
    out.push(check("G alpha = w under full row rank", feature_match, 1e-8));
    out.push(check("error bound dominates LLA error", bound, 1e-6));

    // exact case
    let inst = instance(99)?;
    let n = inst.ds.len();
    let solver = SolverConfig::ridge(0.5);
    let all = LandmarkSet::from_selection(&inst.ds, (0..n).collect(), Strategy::Uniform, 0)?;
    let full = NystromModel::build(&inst.ds.rows, all, inst.kernel, Some(inst.k.as_ref()), DEFAULT_REL_TOL)?;
    let reference = ExactReference::compute(&inst.ds, inst.kernel, inst.k.clone(), &solver, DEFAULT_REL_TOL)?;
    let w = fit_weights(full.features.as_ref(), &inst.ds.labels, inst.ds.n_classes(), &solver)?;
    let gsa = TrainedModel::from_weights(Approach::Gsa, Arc::new(full.clone()), w, solver)?;
    let e = approximation_errors(&reference, full.features.as_ref(), gsa.alpha.as_ref().unwrap().as_ref())?;
    out.push(check("exact case: err_lla and err_gsa vanish", e.err_lla.max(e.err_gsa), 1e-6));
    let test = blobs(60, inst.ds.n_classes(), 2.0, 1.0, 4242)?;
    let exact = exact_krr(inst.k.as_ref(), &inst.ds.labels, inst.ds.n_classes(), 0.5)?;
    let exact_pred = classes_from_scores((gram(&test.rows, &inst.ds.rows, &inst.kernel) * &exact).as_ref());
    let gsa_pred = gsa.predict_classes(&test.rows)?;
    out.push(Check {
        name: "exact case: GSA predictions equal full-kernel KRR",
        passed: gsa_pred == exact_pred,
        detail: format!("{} test points", test.len()),
    });

    // SVM KKT conditions
    let mut kkt = 0.0f64;
    for seed in 0..instances {
        let mut rng = SeededRng::new(5000 + seed);
        let g = Mat::from_fn(4, 25, |_, _| rng.normal());
        let y: Vec<f64> = (0..25).map(|_| if rng.uniform() < 0.5 { 1.0 } else { -1.0 }).collect();
        let c = 0.5;
        let sol = solve_svm_linear(g.as_ref(), &y, c, 5000, 1e-9, seed)?;
        for i in 0..25 {
            let grad = y[i] * numerics::dot(&sol.w, &numerics::column(g.as_ref(), i)) - 1.0;
            let viol = if sol.alpha[i] <= 0.0 {
                (-grad).max(0.0)
            } else if sol.alpha[i] >= c {
                grad.max(0.0)
            } else {
                grad.abs()
            };
            kkt = kkt.max(viol);
        }
    }
    out.push(check("SVM dual solution satisfies KKT", kkt, 1e-6));

    let bytes = trained_model_bytes(&gsa);
    out.push(Check {
        name: "trained model survives a persistence round trip",
        passed: read_trained_model(bytes.as_slice())? == gsa,
        detail: format!("{} bytes", bytes.len()),
    });
    Ok(out)
}
