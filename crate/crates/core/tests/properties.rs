use faer::Mat;
use proptest::prelude::*;
use spa_core::data::SparseVec;
use spa_core::kernel::{gram_sym, KernelConfig};
use spa_core::machines::{solve_svm_linear, svm_dual_objective};
use spa_core::numerics::DEFAULT_REL_TOL;
use spa_core::nystrom::{gram_error_norms, NystromModel};
use spa_core::rng::SeededRng;
use spa_core::sampling::LandmarkSet;
use spa_core::sampling::Strategy;

fn points(n: usize, seed: u64) -> Vec<SparseVec> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|_| SparseVec::from_dense(&[rng.normal(), rng.normal()]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_residual_is_psd(n in 5usize..40, m in 1usize..8, seed in 0u64..1000, gamma in 0.3f64..3.0) {
        let rows = points(n, seed);
        let kernel = KernelConfig::gaussian(gamma).unwrap();
        let k = gram_sym(&rows, &kernel);
        let m = m.min(n);
        let set = LandmarkSet::from_points(rows[..m].to_vec(), Strategy::Uniform, seed).unwrap();
        let nm = NystromModel::build(&rows, set, kernel, None, DEFAULT_REL_TOL).unwrap();
        let norms = gram_error_norms(k.as_ref(), nm.features.as_ref()).unwrap();
        prop_assert!(norms.min_eigenvalue >= -1e-8 * n as f64);
        prop_assert!(norms.trace_norm >= -1e-8);
        prop_assert!(norms.spectral_norm <= n as f64 + 1e-8);
    }

    #[test]
    fn svm_expansion_and_box(n in 4usize..20, s in 1usize..5, seed in 0u64..1000, c in 0.05f64..5.0) {
        let mut rng = SeededRng::new(seed);
        let g = Mat::from_fn(s, n, |_, _| rng.normal());
        let y: Vec<f64> = (0..n).map(|_| if rng.uniform() < 0.5 { 1.0 } else { -1.0 }).collect();
        let sol = solve_svm_linear(g.as_ref(), &y, c, 10_000, 1e-8, seed).unwrap();
        for &a in &sol.alpha {
            prop_assert!((0.0..=c).contains(&a));
        }
        for r in 0..s {
            let expanded: f64 = (0..n).map(|i| sol.alpha[i] * y[i] * g[(r, i)]).sum();
            prop_assert!((expanded - sol.w[r]).abs() <= 1e-9 * (1.0 + expanded.abs()));
        }
    }

    #[test]
    fn svm_label_and_feature_sign_symmetry(n in 4usize..16, seed in 0u64..1000) {
        let mut rng = SeededRng::new(seed);
        let g = Mat::from_fn(3, n, |_, _| rng.normal());
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let flipped_y: Vec<f64> = y.iter().map(|v| -v).collect();
        let flipped_g = Mat::from_fn(3, n, |i, j| -g[(i, j)]);
        let a = solve_svm_linear(g.as_ref(), &y, 1.0, 10_000, 1e-9, seed).unwrap();
        let b = solve_svm_linear(flipped_g.as_ref(), &flipped_y, 1.0, 10_000, 1e-9, seed).unwrap();
        let da = svm_dual_objective(g.as_ref(), &y, &a.alpha);
        let db = svm_dual_objective(flipped_g.as_ref(), &flipped_y, &b.alpha);
        prop_assert!((da - db).abs() <= 1e-7 * da.abs().max(1.0));
    }
}
