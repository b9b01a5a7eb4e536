//! Browser bindings for the `www/` demo page. Every export returns a flat
//! `Float64Array` of fixed-width rows so the page can plot without parsing.

use pinning::annealed::{annealed_solution, crossover_delta0, DEFAULT_EPS2};
use pinning::excursion::{build_law, ExcursionLaw, SlowVariation};
use pinning::quenched::{
    contact_profile as profile, forward_recursion, sample_disorder, ModelParams,
};
use wasm_bindgen::prelude::*;

/// Table size used for every law built here.
const CAP: usize = 2048;

fn law(c: f64) -> Result<ExcursionLaw, JsError> {
    build_law(c, SlowVariation::Constant { a: 1.0 }, CAP, 1e-12)
        .map_err(|e| JsError::new(&e.to_string()))
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Rows `(Delta, f_a, delta*)` on a log grid of `Delta` in `[delta_min, delta_max]`.
#[wasm_bindgen]
pub fn annealed_curve(
    c: f64,
    beta: f64,
    delta_min: f64,
    delta_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    let law = law(c)?;
    let mut out = Vec::with_capacity(3 * points);
    for d in log_grid(delta_min, delta_max, points) {
        let s = annealed_solution(&law, beta, d, DEFAULT_EPS2)
            .map_err(|e| JsError::new(&e.to_string()))?;
        out.extend([d, s.f_a, s.delta_star]);
    }
    Ok(out)
}

/// Rows `(beta, Delta0)`; `Delta0` is NaN where the crossover has no root.
#[wasm_bindgen]
pub fn delta0_curve(
    c: f64,
    beta_min: f64,
    beta_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    let law = law(c)?;
    Ok(log_grid(beta_min, beta_max, points)
        .into_iter()
        .flat_map(|b| [b, crossover_delta0(&law, b).map_or(f64::NAN, |x| x.delta0)])
        .collect())
}

/// `P(x_n = 0)` for `n = 0..=N` under one disorder realization.
#[wasm_bindgen]
pub fn contact_profile(
    c: f64,
    beta: f64,
    delta: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    if n == 0 || n > 8192 {
        return Err(JsError::new("N must lie in 1..=8192"));
    }
    let law = law(c)?;
    let disorder = sample_disorder(seed, 0, n);
    let tables = forward_recursion(&law, &ModelParams::new(beta, delta, n), &disorder)
        .map_err(|e| JsError::new(&e.to_string()))?;
    Ok(profile(&tables))
}
