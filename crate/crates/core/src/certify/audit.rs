//! Comparison-geometry bounds checked on measured return data of the
//! Birkhoff annulus: perimeter, displacement, return time and arc length.

use crate::error::{Error, Result};
use crate::flow_engine::{EventOptions, IntegratorOptions};
use crate::geometry2d::RevolutionMetric;
use crate::lift_s3::Covering;
use crate::sections_linking::{BirkhoffAnnulus, FlowModel, LinearForm, Page, ReturnSample};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Tight,
    Slack,
    Violated,
}

/// One inequality `measured ≤ bound` (or ≥, folded into the sign of slack).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// Distance to the bound on the allowed side; negative when violated.
    pub slack: f64,
    pub status: AuditStatus,
}

fn check(name: &str, measured: f64, bound: f64, slack: f64, tol: f64) -> AuditCheck {
    let status = if slack < -tol {
        AuditStatus::Violated
    } else if slack <= tol {
        AuditStatus::Tight
    } else {
        AuditStatus::Slack
    };
    AuditCheck { name: name.into(), measured, bound, slack, status }
}

/// |Δs_total / 2L − M| along return sequences, with M the crossing count
/// with the disk page bounded by the reversed equator lift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementCount {
    pub returns: usize,
    pub fitted_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryAudit {
    pub c: f64,
    pub delta: f64,
    /// Normalized equator length.
    pub length: f64,
    pub tol: f64,
    pub checks: Vec<AuditCheck>,
    pub displacement_count: Option<DisplacementCount>,
    pub samples: Vec<ReturnSample>,
}

impl GeometryAudit {
    pub fn violated(&self) -> bool {
        self.checks.iter().any(|c| c.status == AuditStatus::Violated)
    }
}

/// Runs the return map on an ns × nθ interior grid plus both boundary
/// circles and checks every bound against the measured data.
pub fn audit_geometry(metric: &RevolutionMetric, ns: usize, ntheta: usize, tol: f64, opts: IntegratorOptions) -> Result<GeometryAudit> {
    let ann = BirkhoffAnnulus::new(*metric);
    let delta = ann.delta();
    if delta <= 4.0 / 9.0 {
        return Err(Error::Precondition(format!("geometry audit needs δ > 4/9, got {delta}")));
    }
    let mut samples = ann.grid(ns, ntheta, opts)?;
    for i in 0..ns {
        let s = TAU * i as f64 / ns as f64;
        samples.push(ann.return_map(s, 0.0, opts)?);
        samples.push(ann.return_map(s, PI, opts)?);
    }
    let l = ann.length();
    let r = 1.0 / delta.sqrt();
    let mut checks = vec![
        check("perimeter_lower", l, TAU, l - TAU, tol),
        check("perimeter_upper", l, TAU * r, TAU * r - l, tol),
    ];
    let dev = samples.iter().map(|x| (x.ds - l).abs()).fold(0.0, f64::max);
    checks.push(check("lift_length", dev, TAU * (r - 1.0), TAU * (r - 1.0) - dev, tol));
    let lo = samples.iter().map(|x| x.ds).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|x| x.ds).fold(f64::NEG_INFINITY, f64::max);
    checks.push(check("lift_window_lower", lo, 2.0 * l / 3.0, lo - 2.0 * l / 3.0, 0.0));
    checks.push(check("lift_window_upper", hi, 1.5 * l, 1.5 * l - hi, 0.0));
    let tau_min = samples.iter().map(|x| x.tau).fold(f64::INFINITY, f64::min);
    let tb = TAU * (2.0 - r);
    checks.push(check("return_time", tau_min, tb, tau_min - tb, tol));
    let amax = samples.iter().map(|x| x.alpha_plus).fold(0.0, f64::max);
    let f = l / 2.0 + PI * (r - 1.0);
    checks.push(check("arc_bound", amax, f, f - amax, tol));
    let displacement_count = if (metric.c - 1.0).abs() < 1e-12 { Some(displacement_count(&ann, 8, opts)?) } else { None };
    Ok(GeometryAudit { c: metric.c, delta, length: l, tol, checks, displacement_count, samples })
}

/// Round metric only: compares accumulated displacement over returns with
/// page crossings of the lifted orbit.
fn displacement_count(ann: &BirkhoffAnnulus, returns: usize, opts: IntegratorOptions) -> Result<DisplacementCount> {
    let cov = Covering::new(ann.metric);
    let mut rev = ann.metric.equator_state(0.0);
    rev.v = rev.v.map(|x| -x);
    let page = Page::new(LinearForm::through(&cov.inverse(&rev)), 0.0);
    let model = FlowModel::Revolution { c: ann.metric.c };
    let mut fitted: f64 = 0.0;
    for &(s, th) in &[(0.3, 0.7), (1.9, 1.6), (4.0, 2.5)] {
        let mut st = (s, th);
        let (mut total, mut time) = (0.0, 0.0);
        for _ in 0..returns {
            let r = ann.return_map(st.0, st.1, opts)?;
            total += r.ds;
            time += r.tau;
            st = (r.s_next, r.theta_next);
        }
        let z = cov.inverse(&ann.point(s, th));
        let path = model.orbit(&z, 0.0, 0.0, time / ann.scale() + 1e-6, opts)?;
        let m = page.crossings(&path, EventOptions::default()).signed_count();
        fitted = fitted.max((total / (2.0 * ann.length()) - m as f64).abs());
    }
    Ok(DisplacementCount { returns, fitted_c: fitted })
}

/// Gaps between [L√δ, L/√δ] and the window (2L/3, 3L/2), relative to L.
pub fn lift_window_table(deltas: &[f64]) -> Vec<(f64, f64, f64)> {
    deltas.iter().map(|&d| (d, d.sqrt() - 2.0 / 3.0, 1.5 - 1.0 / d.sqrt())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_metric_is_tight() {
        let a = audit_geometry(&RevolutionMetric::round(), 8, 4, 1e-6, IntegratorOptions::default()).unwrap();
        assert!(!a.violated(), "{:?}", a.checks);
        for c in &a.checks {
            if c.name.starts_with("lift_window") {
                assert_eq!(c.status, AuditStatus::Slack);
            } else {
                assert_eq!(c.status, AuditStatus::Tight, "{c:?}");
            }
        }
        assert!(a.displacement_count.unwrap().fitted_c <= 1.0);
    }

    #[test]
    fn c095_has_slack() {
        let a = audit_geometry(&RevolutionMetric::new(0.95).unwrap(), 8, 4, 1e-6, IntegratorOptions::default()).unwrap();
        assert!(!a.violated(), "{:?}", a.checks);
        assert!(a.checks.iter().all(|c| c.status == AuditStatus::Slack), "{:?}", a.checks);
    }

    #[test]
    fn window_closes_monotonically() {
        let ds: Vec<f64> = (0..20).map(|k| 1.0 - (1.0 - 4.0 / 9.0) * k as f64 / 19.0).collect();
        let t = lift_window_table(&ds);
        for w in t.windows(2) {
            assert!(w[1].1 < w[0].1 && w[1].2 < w[0].2);
        }
        let last = t.last().unwrap();
        assert!(last.1.abs() < 1e-12 && last.2.abs() < 1e-12);
    }

    #[test]
    fn low_pinching_rejected() {
        assert!(audit_geometry(&RevolutionMetric::new(0.8).unwrap(), 4, 2, 1e-6, IntegratorOptions::default()).is_err());
    }
}
