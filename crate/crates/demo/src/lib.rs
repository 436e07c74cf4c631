//! wasm-bindgen front end for `www/index.html`.
//!
//! Every export works on the same seeded planar-blob data and returns a flat
//! `Float64Array`; the layouts are documented per function.

use std::sync::Arc;

use spa_core::analysis::{approximation_errors, ExactReference};
use spa_core::data::{Dataset, SparseVec};
use spa_core::kernel::{gram_sym, KernelConfig};
use spa_core::machines::{fit_weights, Approach, SolverConfig, TrainedModel};
use spa_core::numerics::{sym_eigenvalues, DEFAULT_REL_TOL};
use spa_core::nystrom::NystromModel;
use spa_core::sampling::sample_uniform;
use spa_core::synth::blobs;
use wasm_bindgen::prelude::*;

const CLASSES: usize = 3;
const SEPARATION: f64 = 2.0;
const SPREAD: f64 = 1.0;

fn data(n: usize, seed: u64) -> spa_core::Result<Dataset> {
    blobs(n, CLASSES, SEPARATION, SPREAD, seed)
}

fn uniform_model(ds: &Dataset, kernel: KernelConfig, m: usize, seed: u64) -> spa_core::Result<NystromModel> {
    let set = sample_uniform(ds, m.clamp(1, ds.len()), seed)?;
    NystromModel::build(&ds.rows, set, kernel, None, DEFAULT_REL_TOL)
}

/// `[x, y, label]` per training point.
pub fn points_native(n: usize, seed: u64) -> spa_core::Result<Vec<f64>> {
    let ds = data(n, seed)?;
    Ok(ds
        .rows
        .iter()
        .zip(&ds.labels)
        .flat_map(|(r, &l)| {
            let d = r.to_dense(2);
            [d[0], d[1], l as f64]
        })
        .collect())
}

/// `[ratio, m, err_lla, err_gsa, bound_lla]` per ratio, uniform landmarks,
/// squared loss.
pub fn error_curve_native(n: usize, gamma: f64, lambda0: f64, seed: u64, ratios: &[f64]) -> spa_core::Result<Vec<f64>> {
    let ds = data(n, seed)?;
    let kernel = KernelConfig::gaussian(gamma)?;
    let k = gram_sym(&ds.rows, &kernel);
    let solver = SolverConfig::ridge(lambda0);
    let reference = ExactReference::compute(&ds, kernel, k, &solver, DEFAULT_REL_TOL)?;
    let mut out = Vec::with_capacity(ratios.len() * 5);
    for &ratio in ratios {
        let m = ((ratio * n as f64).ceil() as usize).clamp(1, n);
        let nm = Arc::new(uniform_model(&ds, kernel, m, seed)?);
        let w = fit_weights(nm.features.as_ref(), &ds.labels, CLASSES, &solver)?;
        let gsa = TrainedModel::from_weights(Approach::Gsa, nm.clone(), w, solver)?;
        let alpha = gsa.alpha.as_ref().expect("GSA models carry alpha");
        let e = approximation_errors(&reference, nm.features.as_ref(), alpha.as_ref())?;
        out.extend([ratio, m as f64, e.err_lla, e.err_gsa, e.bound_lla]);
    }
    Ok(out)
}

/// `[xmin, xmax, ymin, ymax]` followed by `res × res` predicted classes,
/// row-major from the top-left corner, then `[x, y]` per landmark.
pub fn decision_map_native(
    n: usize,
    m: usize,
    gamma: f64,
    lambda0: f64,
    seed: u64,
    approach: Approach,
    res: usize,
) -> spa_core::Result<Vec<f64>> {
    let ds = data(n, seed)?;
    let kernel = KernelConfig::gaussian(gamma)?;
    let nm = Arc::new(uniform_model(&ds, kernel, m, seed)?);
    let solver = SolverConfig::ridge(lambda0);
    let w = fit_weights(nm.features.as_ref(), &ds.labels, CLASSES, &solver)?;
    let model = TrainedModel::from_weights(approach, nm.clone(), w, solver)?;

    let pts: Vec<Vec<f64>> = ds.rows.iter().map(|r| r.to_dense(2)).collect();
    let span = |i: usize| {
        let lo = pts.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
        (lo - 0.5, hi + 0.5)
    };
    let ((x0, x1), (y0, y1)) = (span(0), span(1));
    let res = res.max(2);
    let grid: Vec<SparseVec> = (0..res * res)
        .map(|idx| {
            let (row, col) = (idx / res, idx % res);
            let x = x0 + (x1 - x0) * col as f64 / (res - 1) as f64;
            let y = y1 - (y1 - y0) * row as f64 / (res - 1) as f64;
            SparseVec::from_dense(&[x, y])
        })
        .collect();
    let classes = model.predict_classes(&grid)?;
    let mut out = vec![x0, x1, y0, y1];
    out.extend(classes.into_iter().map(|c| c as f64));
    if let Some(lm) = nm.landmarks.points() {
        for p in lm {
            out.extend(p.to_dense(2));
        }
    }
    Ok(out)
}

/// Eigenvalues of `K` (descending, length `n`) followed by those of `K̃`.
pub fn spectrum_native(n: usize, m: usize, gamma: f64, seed: u64) -> spa_core::Result<Vec<f64>> {
    let ds = data(n, seed)?;
    let kernel = KernelConfig::gaussian(gamma)?;
    let k = gram_sym(&ds.rows, &kernel);
    let nm = uniform_model(&ds, kernel, m, seed)?;
    let mut out = sym_eigenvalues(k.as_ref())?;
    out.extend(sym_eigenvalues(nm.approx_gram().as_ref())?);
    Ok(out)
}

fn js(e: spa_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn points(n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    points_native(n, seed.into()).map_err(js)
}

#[wasm_bindgen]
pub fn error_curve(n: usize, gamma: f64, lambda0: f64, seed: u32, ratios: Vec<f64>) -> Result<Vec<f64>, JsError> {
    error_curve_native(n, gamma, lambda0, seed.into(), &ratios).map_err(js)
}

#[wasm_bindgen]
pub fn decision_map(
    n: usize,
    m: usize,
    gamma: f64,
    lambda0: f64,
    seed: u32,
    approach: &str,
    res: usize,
) -> Result<Vec<f64>, JsError> {
    let approach: Approach = approach.parse().map_err(js)?;
    decision_map_native(n, m, gamma, lambda0, seed.into(), approach, res).map_err(js)
}

#[wasm_bindgen]
pub fn spectrum(n: usize, m: usize, gamma: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    spectrum_native(n, m, gamma, seed.into()).map_err(js)
}
