//! Browser bindings: geodesics on an ellipsoid of revolution, the return map
//! of its Birkhoff annulus, and the pinching thresholds.

use reeb_core::certify::{certify_pinching, delta_star, lift_window_table, mu_window};
use reeb_core::flow_engine::IntegratorOptions;
use reeb_core::geometry2d::{clairaut, geodesic, GeodesicSystem, RevolutionMetric, UnitTangent};
use reeb_core::sections_linking::BirkhoffAnnulus;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[wasm_bindgen(start)]
pub fn start() {
    console_error_panic_hook::set_once();
}

fn js(e: reeb_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

#[derive(Serialize)]
struct Path {
    points: Vec<[f64; 3]>,
    curvature: Vec<f64>,
    clairaut_drift: f64,
}

/// Geodesic on {x² + y² + (z/c)² = 1} from latitude `phi`, longitude `lon`,
/// heading `psi` (0 = east), sampled at `n` + 1 times over [0, t_end].
#[wasm_bindgen]
pub fn geodesic_path(c: f64, phi: f64, lon: f64, psi: f64, t_end: f64, n: usize) -> Result<String, JsError> {
    let m = RevolutionMetric::new(c).map_err(js)?;
    let s = UnitTangent::at(&m, phi, lon, psi);
    let tr = geodesic(&GeodesicSystem::new(m), &s, &[], t_end, IntegratorOptions::default()).map_err(js)?;
    let c0 = clairaut(&s);
    let mut out = Path { points: Vec::new(), curvature: Vec::new(), clairaut_drift: 0.0 };
    for (_, y) in tr.sample_uniform(n.clamp(2, 20_000)) {
        let st = UnitTangent::from_slice(&y);
        out.clairaut_drift = out.clairaut_drift.max((clairaut(&st) - c0).abs());
        out.curvature.push(m.curvature(&st.p).unwrap_or(f64::NAN));
        out.points.push(st.p);
    }
    json(&out)
}

#[derive(Serialize)]
struct Returns {
    delta: f64,
    length: f64,
    window: (f64, f64),
    samples: Vec<reeb_core::sections_linking::ReturnSample>,
}

/// First-return map of the Birkhoff annulus on an ns × nθ grid, in units
/// where the maximal curvature is one.
#[wasm_bindgen]
pub fn return_map(c: f64, ns: usize, ntheta: usize) -> Result<String, JsError> {
    let m = RevolutionMetric::new(c).map_err(js)?;
    let ann = BirkhoffAnnulus::new(m);
    let samples = ann.grid(ns.clamp(1, 64), ntheta.clamp(1, 64), IntegratorOptions::default()).map_err(js)?;
    let (l, r) = (ann.length(), ann.delta().sqrt());
    json(&Returns { delta: ann.delta(), length: l, window: (l * r, l / r), samples })
}

#[derive(Serialize)]
struct Thresholds {
    delta: f64,
    delta_star: f64,
    x_star: f64,
    verdict: String,
    margin: f64,
    mu_lower: Option<f64>,
    mu_upper: Option<f64>,
    lift_gap_lower: f64,
    lift_gap_upper: f64,
}

/// Pinching of the ellipsoid against δ*, with the μ-window and the gaps of
/// the canonical-lift window (2L/3, 3L/2).
#[wasm_bindgen]
pub fn thresholds(c: f64) -> Result<String, JsError> {
    let m = RevolutionMetric::new(c).map_err(js)?;
    let cert = certify_pinching(&m);
    let d = m.pinching().delta;
    let ds = delta_star();
    let mu = mu_window(d).ok().filter(|w| w.feasible);
    let (_, lo, hi) = lift_window_table(&[d])[0];
    json(&Thresholds {
        delta: d,
        delta_star: ds.delta,
        x_star: ds.x,
        verdict: serde_json::to_value(cert.verdict).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        margin: cert.margin,
        mu_lower: mu.map(|w| w.lower),
        mu_upper: mu.map(|w| w.upper),
        lift_gap_lower: lo,
        lift_gap_upper: hi,
    })
}
