//! Browser bindings: distortion curves, a one-dimensional CD check, and
//! Bishop–Gromov ratios on a flat cone. Every function returns a JSON string.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use lorentz_synth::comparison::bishop_gromov;
use lorentz_synth::distortion::{pi_const, sigma_const, tau_const, KappaProfile};
use lorentz_synth::models::{Event, FnRegion, ModelSpacetime};
use lorentz_synth::onedim::{model_density, verify_cd_density, CdDensity};
use lorentz_synth::ExtReal;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js_err(e: lorentz_synth::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn finite_or_null(v: ExtReal) -> serde_json::Value {
    v.finite().map_or(serde_json::Value::Null, |x| json!(x))
}

/// σ_{K/(N−1)}^{(t)}(θ) and τ_{K,N}^{(t)}(θ) on `samples` points of (0, θ_max),
/// clipped below π_{K/(N−1)}.
#[wasm_bindgen]
pub fn distortion_curves(k: f64, n: f64, t: f64, theta_max: f64, samples: usize) -> Result<String, JsValue> {
    if !(n > 1.0) || !(0.0..=1.0).contains(&t) || !(theta_max > 0.0) || samples < 2 {
        return Err(JsValue::from_str("need N > 1, t in [0, 1], θ_max > 0 and at least two samples"));
    }
    let kn = k / (n - 1.0);
    let limit = match pi_const(kn) {
        ExtReal::Finite(p) => p,
        _ => f64::INFINITY,
    };
    let top = theta_max.min(limit * 0.999);
    let thetas: Vec<f64> = (1..=samples).map(|i| top * i as f64 / samples as f64).collect();
    let sigma: Vec<_> = thetas.iter().map(|&th| finite_or_null(sigma_const(kn, t, th))).collect();
    let tau: Vec<_> = thetas.iter().map(|&th| finite_or_null(tau_const(k, n, t, th))).collect();
    let linear: Vec<f64> = thetas.iter().map(|_| t).collect();
    Ok(json!({"theta": thetas, "sigma": sigma, "tau": tau, "flat": linear, "pi": limit.is_finite().then_some(limit)})
        .to_string())
}

/// CD(K, N) check of the model density sin_{K/(N−1)}^{N−1} on [0, L],
/// multiplied by exp(tilt·x). Tilt 0 is the sharp equality case.
#[wasm_bindgen]
pub fn cd_check(k: f64, n: f64, length: f64, tilt: f64) -> Result<String, JsValue> {
    let base = model_density(k, n, length).map_err(js_err)?;
    let (a, b) = base.interval();
    let m = base.samples().len();
    let kappa = KappaProfile::constant(b - a, k).map_err(js_err)?;
    let d = CdDensity::from_fn(a, b, m, |x| base.eval(x) * (tilt * x).exp(), kappa, n).map_err(js_err)?;
    let check = verify_cd_density(&d, 64, 1e-6).map_err(js_err)?;
    let xs: Vec<f64> = (0..=200).map(|i| a + (b - a) * i as f64 / 200.0).collect();
    let hs: Vec<f64> = xs.iter().map(|&x| d.eval(x)).collect();
    Ok(json!({"x": xs, "h": hs, "check": check}).to_string())
}

/// v(r)/v(R) for the Minkowski 1+1 cone sector {0 < t ≤ 1.3R, |x| ≤ slope·t}
/// seen from the origin, against (r/R)², for `count` radii up to R.
#[wasm_bindgen]
pub fn bishop_gromov_ratios(slope: f64, big_r: f64, count: usize, resolution: usize) -> Result<String, JsValue> {
    if !(slope > 0.0 && slope < 1.0) || !(big_r > 0.0) || count < 2 || resolution < 8 {
        return Err(JsValue::from_str("need 0 < slope < 1, R > 0, at least two radii and resolution ≥ 8"));
    }
    let s = ModelSpacetime::minkowski(2, vec![(-1.0, 3.0 * big_r), (-3.0 * big_r, 3.0 * big_r)]).map_err(js_err)?;
    let t_max = 1.3 * big_r;
    let cone = FnRegion {
        predicate: move |p: &Event| p.0[0] > 0.0 && p.0[0] <= t_max && p.0[1].abs() <= slope * p.0[0],
        lo: vec![0.0, -slope * t_max],
        hi: vec![t_max, slope * t_max],
    };
    let dr = big_r / (4.0 * count as f64);
    let radii: Vec<f64> = (1..=count).map(|i| big_r * i as f64 / count as f64).collect();
    let report = bishop_gromov(&s, &Event::new(vec![0.0, 0.0]), &cone, 0.0, 2.0, &radii, dr, resolution, 1e-2)
        .map_err(js_err)?;
    let top = big_r;
    let rows: Vec<_> = report
        .rows
        .iter()
        .filter(|row| row.label.starts_with("v;") && row.label.ends_with(&format!("R={top}")))
        .collect();
    let r: Vec<f64> = radii[..radii.len() - 1].to_vec();
    let measured: Vec<f64> = rows.iter().map(|row| row.lhs).collect();
    let model: Vec<f64> = rows.iter().map(|row| row.rhs).collect();
    Ok(json!({"r": r, "measured": measured, "model": model, "passed": report.passed, "min_margin": report.min_margin()})
        .to_string())
}
