//! Certificates for the right-handedness criteria: κ(γ₀) > 2π, K_σ·τ_min > 2π,
//! K^C_min·τ_min > π for convex bodies, and δ > δ* for pinched metrics.

mod audit;
mod kappa;

pub use audit::{audit_geometry, lift_window_table, AuditCheck, AuditStatus, GeometryAudit};
pub use kappa::{default_page, estimate_kappa, return_time_cap, KappaConfig, KappaEstimate};

use crate::convex4d::{rate_scan, ConvexBody};
use crate::error::{Error, Result};
use crate::flow_engine::{halton_points, IntegratorOptions, Sampler};
use crate::geometry2d::RevolutionMetric;
use crate::lift_s3::Quat;
use crate::sections_linking::{page_tau_stats, positive_linking_sample, FlowModel, LinearForm, LinkingSample, Page, TauStats};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    NotCertified,
    Inconclusive,
}

impl Verdict {
    /// Certified when the margin beats the error budget, not certified when
    /// it is below minus the budget.
    pub fn from_margin(margin: f64, error: f64) -> Self {
        if margin > error {
            Verdict::Certified
        } else if margin < -error {
            Verdict::NotCertified
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub criterion: String,
    pub inputs: serde_json::Value,
    pub seed: Option<u64>,
    pub measured: BTreeMap<String, f64>,
    pub threshold: f64,
    pub margin: f64,
    pub error_budget: f64,
    pub verdict: Verdict,
    pub artifacts: Vec<String>,
    pub config_hash: String,
    pub tool_version: String,
}

impl Certificate {
    fn new(criterion: &str, inputs: serde_json::Value, measured: Vec<(&str, f64)>, value: f64, threshold: f64, error: f64) -> Self {
        let margin = value - threshold;
        Self {
            criterion: criterion.into(),
            inputs,
            seed: None,
            measured: measured.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            threshold,
            margin,
            error_budget: error,
            verdict: Verdict::from_margin(margin, error),
            artifacts: Vec::new(),
            config_hash: String::new(),
            tool_version: crate::TOOL_VERSION.into(),
        }
    }
}

fn poly_p(x: f64) -> f64 {
    4.0 * x * x * x - 2.0 * x * x - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaStar {
    pub x: f64,
    pub delta: f64,
    pub residual: f64,
}

/// Real root x* of 4x³ − 2x² − 1 and δ* = x*².
pub fn delta_star() -> DeltaStar {
    // P is negative at both critical points 0 and 1/3, so the root is unique
    debug_assert!(poly_p(0.0) < 0.0 && poly_p(1.0 / 3.0) < 0.0);
    let (mut a, mut b) = (0.5, 1.0);
    let mut x = 0.75;
    for _ in 0..100 {
        let f = poly_p(x);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let step = x - f / (12.0 * x * x - 4.0 * x);
        x = if step > a && step < b { step } else { 0.5 * (a + b) };
        if b - a < 1e-16 {
            break;
        }
    }
    DeltaStar { x, delta: x * x, residual: poly_p(x).abs() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuWindow {
    pub lower: f64,
    pub upper: f64,
    pub feasible: bool,
}

/// √δ/(2√δ − 1) < μ < 2δ√δ.
pub fn mu_window(delta: f64) -> Result<MuWindow> {
    if !(delta > 0.25 && delta <= 1.0) {
        return Err(Error::Precondition(format!("μ-window needs δ ∈ (1/4, 1], got {delta}")));
    }
    let r = delta.sqrt();
    let lower = r / (2.0 * r - 1.0);
    let upper = 2.0 * delta * r;
    Ok(MuWindow { lower, upper, feasible: upper > lower })
}

/// Infimum of the frame angle rate, with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSigma {
    pub value: f64,
    pub error: f64,
}

/// K_σ for the model's global frame. Sampled for perturbed balls, exact
/// otherwise (up to the pinching grid error).
pub fn ksigma(model: &FlowModel, n: usize) -> Result<KSigma> {
    model.validate()?;
    Ok(match *model {
        FlowModel::Hopf { scale } => KSigma { value: 4.0 / scale, error: 0.0 },
        FlowModel::Revolution { c } => {
            let p = RevolutionMetric::new(c)?.pinching();
            KSigma { value: p.k_min.min(1.0), error: p.grid_error }
        }
        FlowModel::Ellipsoid { .. } | FlowModel::PerturbedBall { .. } => {
            let body = model.body().unwrap();
            let (lo, _) = rate_scan(&body, n);
            let (half, _) = rate_scan(&body, (n / 2).max(1));
            if body.is_quadratic() {
                KSigma { value: lo, error: (half - lo).abs() }
            } else {
                KSigma { value: lo, error: (half - lo).abs().max(1e-6) }
            }
        }
    })
}

/// Quasi-random starts at distance ≥ `margin` (in |F|) from the binding.
pub fn page_starts(page: &Page, n: usize, margin: f64) -> Vec<Quat> {
    let mut out = Vec::with_capacity(n);
    let pts = halton_points(8 * n + 64, 3);
    for u in pts {
        let (r1, r2) = (u[0].sqrt(), (1.0 - u[0]).sqrt());
        let q = Quat::from_complex(
            num_complex::Complex64::from_polar(r1, TAU * u[1]),
            num_complex::Complex64::from_polar(r2, TAU * u[2]),
        );
        if page.f(&q).norm() > margin {
            out.push(q);
            if out.len() == n {
                break;
            }
        }
    }
    out
}

/// τ_min and τ_max of `page` from 64 quasi-random starts.
pub fn page_tau(model: &FlowModel, page: &Page, opts: IntegratorOptions) -> Result<TauStats> {
    let starts = page_starts(page, 64, 0.05);
    page_tau_stats(model, page, &starts, 3.0 * return_time_cap(model), opts)
}

/// Certified when K_σ·τ_min > 2π.
pub fn certify_ksigma(model: &FlowModel, ks: KSigma, tau: &TauStats) -> Certificate {
    let v = ks.value * tau.tau_min;
    let err = ks.error * tau.tau_min + ks.value * (tau.refinement_error + 1e-8);
    Certificate::new(
        "Ksigma",
        serde_json::to_value(model).unwrap_or_default(),
        vec![("k_sigma", ks.value), ("tau_min", tau.tau_min), ("tau_max", tau.tau_max), ("product", v)],
        v,
        TAU,
        err,
    )
}

/// Certified when K^C_min·τ_min(D) > π. The page defaults to {arg z = 0}.
pub fn certify_convex(body: &ConvexBody, page: Option<&Page>, budget: usize, opts: IntegratorOptions) -> Result<Certificate> {
    body.validate()?;
    let km = body.kmin(budget)?;
    let model = match *body {
        ConvexBody::Ellipsoid { a } => FlowModel::Ellipsoid { a },
        ConvexBody::PerturbedBall { coeffs } => FlowModel::PerturbedBall { coeffs },
    };
    let default = Page::new(LinearForm::z(), 0.0);
    let page = page.unwrap_or(&default);
    let tau = page_tau(&model, page, opts)?;
    let v = km.value * tau.tau_min;
    let err = km.error_bound * tau.tau_min + km.value * (tau.refinement_error + 1e-8);
    Ok(Certificate::new(
        "convex",
        serde_json::to_value(body).unwrap_or_default(),
        vec![("k_c_min", km.value), ("k_c_min_error", km.error_bound), ("tau_min", tau.tau_min), ("tau_max", tau.tau_max), ("product", v)],
        v,
        PI,
        err,
    ))
}

/// Certified when the pinching δ exceeds δ*.
pub fn certify_pinching(metric: &RevolutionMetric) -> Certificate {
    let p = metric.pinching();
    let mut c = certify_pinching_delta(p.delta, p.grid_error);
    c.inputs = serde_json::json!({"family": "revolution", "c": metric.c});
    c.measured.insert("k_min".into(), p.k_min);
    c.measured.insert("k_max".into(), p.k_max);
    c
}

pub fn certify_pinching_delta(delta: f64, error: f64) -> Certificate {
    let ds = delta_star();
    Certificate::new(
        "pinching",
        serde_json::json!({ "delta": delta }),
        vec![("delta", delta), ("delta_star", ds.delta)],
        delta,
        ds.delta,
        error + ds.residual,
    )
}

/// Certified when κ̂ > 2π by more than its error budget and the estimate
/// stabilized; an unstabilized estimate is inconclusive.
pub fn certify_kappa(model: &FlowModel, est: &KappaEstimate) -> Certificate {
    let mut c = Certificate::new(
        "kappa",
        serde_json::to_value(model).unwrap_or_default(),
        vec![
            ("kappa_hat", est.kappa_hat),
            ("stabilization", est.stabilization),
            ("spread_last3", est.spread_last3),
            ("link_min", est.link_min as f64),
            ("closing_error", est.closing_error),
            ("integration_error", est.integration_error),
            ("gauss_gap", est.gauss_gap),
            ("tau_min", est.tau.tau_min),
            ("tau_max", est.tau.tau_max),
        ],
        est.kappa_hat,
        TAU,
        est.error_budget,
    );
    c.seed = Some(est.seed);
    if !est.stabilized {
        c.verdict = Verdict::Inconclusive;
    }
    c
}

/// ℓ̂ over `pairs` random pairs, resampling pairs that sit on one orbit or
/// come too close.
pub fn positive_linking_sweep(model: &FlowModel, pairs: usize, t: f64, s: f64, seed: u64, opts: IntegratorOptions) -> Result<Vec<LinkingSample>> {
    let mut rng = Sampler::new(seed);
    let mut out = Vec::with_capacity(pairs);
    let mut tries = 0;
    while out.len() < pairs {
        tries += 1;
        if tries > 20 * pairs {
            return Err(Error::Precondition("too many rejected pairs".into()));
        }
        let (p, q) = (Quat(rng.unit_s3()), Quat(rng.unit_s3()));
        match positive_linking_sample(model, &p, &q, t, s, opts) {
            Ok(ls) => out.push(ls),
            Err(Error::Precondition(_)) | Err(Error::LoopsTooClose(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
