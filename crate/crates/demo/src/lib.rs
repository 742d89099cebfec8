//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export has a plain Rust counterpart returning [`abstain::Result`],
//! which is what the native tests exercise.

use abstain::calibration::{emit_score_partition, emit_simplex_partition};
use abstain::loss::bayes_predict;
use abstain::{SimplexVector, SurrogateKind, SurrogateSpec};
use wasm_bindgen::prelude::*;

pub fn parse_kind(kind: &str) -> abstain::Result<SurrogateKind> {
    match kind {
        "cs" => Ok(SurrogateKind::Cs),
        "ova" => Ok(SurrogateKind::Ova),
        "bep" => Ok(SurrogateKind::Bep),
        other => Err(abstain::Error::Domain(format!("unknown surrogate `{other}`"))),
    }
}

/// Bayes regions on the 3-class simplex grid (1-based targets, 4 = reject),
/// in the order `p1 = 0..=res`, then `p2 = 0..=res - p1`.
pub fn simplex_regions(alpha: f64, resolution: usize) -> abstain::Result<Vec<u8>> {
    Ok(emit_simplex_partition(alpha, resolution)?
        .iter()
        .map(|c| c.region as u8)
        .collect())
}

/// Predictor regions over a `resolution²` grid on `[-range, range]²`,
/// row-major in `u1`.
pub fn score_regions(kind: &str, tau: f64, range: f64, resolution: usize) -> abstain::Result<Vec<u8>> {
    Ok(emit_score_partition(parse_kind(kind)?, tau, range, resolution)?
        .iter()
        .map(|c| c.region as u8)
        .collect())
}

/// Two-class BEP surrogate `ψ^α` as a function of the signed margin
/// `z = B(y)·u` on `points` evenly spaced values in `[z_min, z_max]`.
pub fn hinge_values(alpha: f64, z_min: f64, z_max: f64, points: usize) -> abstain::Result<Vec<f64>> {
    if points < 2 || z_max.partial_cmp(&z_min) != Some(std::cmp::Ordering::Greater) {
        return Err(abstain::Error::Domain("need at least two points on a nonempty interval".into()));
    }
    let spec = SurrogateSpec::new(SurrogateKind::Bep, 2, alpha, 0.5)?;
    let b = spec.code_map().map(|c| c.code(0)[0]).unwrap_or(1.0);
    let step = (z_max - z_min) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let z = z_min + i as f64 * step;
            spec.psi_alpha(0, &[b * z])
        })
        .collect()
}

/// Bayes decision at one point of the simplex (1-based target, 4 = reject).
pub fn bayes_region(p: [f64; 3], alpha: f64) -> abstain::Result<u8> {
    let p = SimplexVector::new(p.to_vec())?;
    Ok(bayes_predict(&p, alpha).target(3) as u8)
}

fn js(e: abstain::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = simplexPartition)]
pub fn simplex_partition(alpha: f64, resolution: usize) -> Result<Vec<u8>, JsError> {
    simplex_regions(alpha, resolution).map_err(js)
}

#[wasm_bindgen(js_name = scorePartition)]
pub fn score_partition(kind: &str, tau: f64, range: f64, resolution: usize) -> Result<Vec<u8>, JsError> {
    score_regions(kind, tau, range, resolution).map_err(js)
}

#[wasm_bindgen(js_name = hingeCurve)]
pub fn hinge_curve(alpha: f64, z_min: f64, z_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    hinge_values(alpha, z_min, z_max, points).map_err(js)
}

#[wasm_bindgen(js_name = bayesDecision)]
pub fn bayes_decision(p1: f64, p2: f64, p3: f64, alpha: f64) -> Result<u8, JsError> {
    bayes_region([p1, p2, p3], alpha).map_err(js)
}
