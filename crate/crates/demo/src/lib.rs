//! WebAssembly bindings for the browser demo.
//!
//! Points cross the boundary as flat `[x0, y0, x1, y1, ...]` arrays. The
//! plain functions are what the exports wrap, so they are testable natively.
//! Exported seeds are `u32` so JavaScript can pass ordinary numbers.

use knnrex::data::gen_ring;
use knnrex::estimators::{synthesize_population, EstimatorConfig};
use knnrex::evaluation::hellinger_union;
use knnrex::rng::derive;
use knnrex::PointSet;
use wasm_bindgen::prelude::*;

const DIM: usize = 2;
const SAMPLE_STREAM: u64 = 0;
const SYNTH_STREAM: u64 = 1;
const TRUTH_STREAM: u64 = 2;

fn points(flat: &[f64]) -> Result<PointSet, String> {
    PointSet::from_flat(DIM, flat.to_vec()).map_err(|e| e.to_string())
}

/// `n` points from the noisy unit ring.
pub fn ring(n: usize, seed: u64) -> Result<Vec<f64>, String> {
    let p = gen_ring(n, &mut derive(seed, SAMPLE_STREAM)).map_err(|e| e.to_string())?;
    Ok(p.into_flat())
}

/// `method` is one of `knn-rex`, `fixed`, `bmp`.
pub fn synthesize(
    sample: &[f64],
    method: &str,
    k: usize,
    m: usize,
    h: f64,
    l: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let cfg = match method {
        "knn-rex" => EstimatorConfig::knn_rex(k, m),
        "fixed" => EstimatorConfig::fixed(h),
        "bmp" => EstimatorConfig::bmp(k, h),
        other => return Err(format!("unknown method `{other}`")),
    };
    let x = points(sample)?;
    let y = synthesize_population(&x, &cfg, l, &mut derive(seed, SYNTH_STREAM))
        .map_err(|e| e.to_string())?;
    Ok(y.into_flat())
}

/// Binned Hellinger distance between a population and a fresh ring draw of
/// the same size.
pub fn score_against_ring(population: &[f64], bins: usize, seed: u64) -> Result<f64, String> {
    let y = points(population)?;
    let truth =
        gen_ring(y.len().max(1), &mut derive(seed, TRUTH_STREAM)).map_err(|e| e.to_string())?;
    hellinger_union(&truth, &y, bins).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = ringSample)]
pub fn ring_js(n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    ring(n, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = synthesize)]
pub fn synthesize_js(
    sample: &[f64],
    method: &str,
    k: usize,
    m: usize,
    h: f64,
    l: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    synthesize(sample, method, k, m, h, l, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scoreAgainstRing)]
pub fn score_js(population: &[f64], bins: usize, seed: u32) -> Result<f64, JsError> {
    score_against_ring(population, bins, seed.into()).map_err(|e| JsError::new(&e))
}
