//! wasm-bindgen exports for the static demo page in `www/`.
//!
//! Every export returns a JSON string of named columns so the page can plot
//! it without further decoding.

use serde_json::json;
use spde_core::brownian::{NoiseMode, TimeGrid};
use spde_core::ensemble::Ensemble;
use spde_core::error::SpdeError;
use spde_core::initial::InitialLaw;
use spde_core::multiplicative::{solve_ensemble, CoefficientFamily, PicardOptions, ProblemSpec};
use spde_core::sectorial::SpectralOperator;
use spde_core::volterra::{e_bound, e_series};
use wasm_bindgen::prelude::*;

fn js(e: SpdeError) -> JsError {
    JsError::new(&e.to_string())
}

/// Second moment of dX = −λX dt + v dw, X(0) = ξ, simulated with exact
/// Gaussian convolutions, next to its closed form.
pub fn ou_curve(lambda: f64, v: f64, xi: f64, t_end: f64, steps: usize, paths: u32, seed: u64) -> Result<serde_json::Value, SpdeError> {
    let prob = ProblemSpec::new(
        SpectralOperator::new(vec![lambda])?,
        CoefficientFamily::Zero.into(),
        CoefficientFamily::Constant { value: v }.into(),
        InitialLaw::Deterministic { value: vec![xi] },
        t_end,
        2.0,
    )?;
    let grid = TimeGrid::new(t_end, steps)?;
    let opts = PicardOptions {
        mode: NoiseMode::ExactGauss,
        ..Default::default()
    };
    let sol = solve_ensemble(&prob, &grid, &Ensemble::new(seed, paths as u64), &[], &opts)?;
    let m2 = sol.moment(2.0).expect("second moment is always tracked");
    let t = grid.nodes();
    let oracle: Vec<f64> = t
        .iter()
        .map(|&s| (-2.0 * lambda * s).exp() * xi * xi - v * v * (-2.0 * lambda * s).exp_m1() / (2.0 * lambda))
        .collect();
    Ok(json!({
        "t": t,
        "mean": m2.iter().map(|e| e.mean).collect::<Vec<_>>(),
        "se": m2.iter().map(|e| e.se).collect::<Vec<_>>(),
        "oracle": oracle,
    }))
}

/// E_{μ₁,μ₂}(t) by its series and the explicit upper bound.
pub fn series_curve(mu1: f64, mu2: f64, t_end: f64, steps: usize) -> Result<serde_json::Value, SpdeError> {
    let t = TimeGrid::new(t_end, steps)?.nodes();
    let series = t
        .iter()
        .map(|&s| e_series(mu1, mu2, s, 1e-12).map(|e| e.value))
        .collect::<Result<Vec<_>, _>>()?;
    let bound: Vec<f64> = t.iter().map(|&s| e_bound(mu1, mu2, s)).collect();
    Ok(json!({ "t": t, "series": series, "bound": bound }))
}

/// t^ν‖A^ν S(t)‖ for the d-point Dirichlet Laplacian with its supremum ι_ν.
pub fn smoothing_curve(nu: f64, d: usize, t_end: f64, steps: usize) -> Result<serde_json::Value, SpdeError> {
    let a = SpectralOperator::dirichlet_laplacian_1d(d, ((d + 1) * (d + 1)) as f64)?;
    let t: Vec<f64> = TimeGrid::new(t_end, steps)?.nodes().into_iter().skip(1).collect();
    let weighted: Vec<f64> = t.iter().map(|&s| s.powf(nu) * a.smoothing_norm(nu, s)).collect();
    Ok(json!({ "t": t, "weighted": weighted, "iota": a.iota(nu, t_end), "eigenvalues": a.eigenvalues() }))
}

#[wasm_bindgen]
pub fn ou_moment_curve(lambda: f64, v: f64, xi: f64, t_end: f64, steps: usize, paths: u32, seed: u32) -> Result<String, JsError> {
    ou_curve(lambda, v, xi, t_end, steps, paths, seed as u64)
        .map(|v| v.to_string())
        .map_err(js)
}

#[wasm_bindgen]
pub fn volterra_series(mu1: f64, mu2: f64, t_end: f64, steps: usize) -> Result<String, JsError> {
    series_curve(mu1, mu2, t_end, steps).map(|v| v.to_string()).map_err(js)
}

#[wasm_bindgen]
pub fn semigroup_smoothing(nu: f64, d: usize, t_end: f64, steps: usize) -> Result<String, JsError> {
    smoothing_curve(nu, d, t_end, steps).map(|v| v.to_string()).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_curve_tracks_the_oracle() {
        let v = ou_curve(1.0, 1.0, 0.0, 1.0, 16, 20000, 3).unwrap();
        let (mean, se, oracle) = (&v["mean"][16], &v["se"][16], &v["oracle"][16]);
        let (m, s, o) = (mean.as_f64().unwrap(), se.as_f64().unwrap(), oracle.as_f64().unwrap());
        assert!((o - 0.432332).abs() < 1e-6);
        assert!((m - o).abs() <= 3.0 * s, "{m} ± {s} vs {o}");
    }

    #[test]
    fn series_stays_below_bound() {
        let v = series_curve(0.5, 0.75, 5.0, 20).unwrap();
        for (s, b) in v["series"].as_array().unwrap().iter().zip(v["bound"].as_array().unwrap()) {
            assert!(s.as_f64().unwrap() <= b.as_f64().unwrap());
        }
    }

    #[test]
    fn smoothing_never_exceeds_iota() {
        let v = smoothing_curve(0.5, 8, 1.0, 200).unwrap();
        let iota = v["iota"].as_f64().unwrap();
        assert!(v["weighted"]
            .as_array()
            .unwrap()
            .iter()
            .all(|w| w.as_f64().unwrap() <= iota * (1.0 + 1e-12)));
    }
}
