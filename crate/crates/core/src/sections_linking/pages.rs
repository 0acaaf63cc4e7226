//! Disk pages {arg F = c} of explicit open books on S³, with F a product of
//! complex linear forms in (z, w).

use super::models::S3Path;
use crate::error::{Error, Result};
use crate::flow_engine::{detect_crossings_fn, CrossingReport, EventOptions};
use crate::lift_s3::Quat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// ℓ(Z) = a·z + b·w for Z = z + w j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub a: Complex64,
    pub b: Complex64,
}

impl LinearForm {
    pub fn z() -> Self {
        Self { a: Complex64::new(1.0, 0.0), b: Complex64::new(0.0, 0.0) }
    }
    pub fn w() -> Self {
        Self { a: Complex64::new(0.0, 0.0), b: Complex64::new(1.0, 0.0) }
    }
    /// Vanishes exactly on the complex circle {e^{iφ} Z_b}.
    pub fn through(zb: &Quat) -> Self {
        Self { a: zb.w(), b: -zb.z() }
    }
    pub fn eval(&self, q: &Quat) -> Complex64 {
        self.a * q.z() + self.b * q.w()
    }
    /// The zero circle, oriented by e^{iφ}, as `n` points.
    pub fn zero_circle(&self, n: usize) -> Vec<Quat> {
        let (z, w) = (self.b, -self.a);
        let r = (z.norm_sqr() + w.norm_sqr()).sqrt();
        (0..=n)
            .map(|k| {
                let e = Complex64::from_polar(1.0 / r, TAU * k as f64 / n as f64);
                Quat::from_complex(e * z, e * w)
            })
            .collect()
    }
}

/// Page {arg F = angle} with F = ∏ ℓₖ; the binding is {F = 0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub factors: Vec<LinearForm>,
    pub angle: f64,
}

impl Page {
    pub fn new(factor: LinearForm, angle: f64) -> Self {
        Self { factors: vec![factor], angle }
    }
    pub fn product(factors: Vec<LinearForm>, angle: f64) -> Self {
        Self { factors, angle }
    }
    pub fn f(&self, q: &Quat) -> Complex64 {
        self.factors.iter().map(|l| l.eval(q)).product()
    }
    /// dF(v) at q; each factor is linear so dℓ(v) = ℓ(v).
    pub fn df(&self, q: &Quat, v: &Quat) -> Complex64 {
        let vals: Vec<Complex64> = self.factors.iter().map(|l| l.eval(q)).collect();
        (0..self.factors.len())
            .map(|k| {
                let rest: Complex64 = vals.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| *x).product();
                self.factors[k].eval(v) * rest
            })
            .sum()
    }
    fn rotated(&self, q: &Quat) -> Complex64 {
        self.f(q) * Complex64::from_polar(1.0, -self.angle)
    }
    pub fn value(&self, q: &Quat) -> f64 {
        self.rotated(q).im
    }
    pub fn admissible(&self, q: &Quat) -> bool {
        self.rotated(q).re > 0.0
    }
    pub fn contains(&self, q: &Quat, tol: f64) -> bool {
        self.admissible(q) && self.value(q).abs() < tol
    }
    pub fn binding_loops(&self, n: usize) -> Vec<Vec<Quat>> {
        self.factors.iter().map(|l| l.zero_circle(n)).collect()
    }

    /// Signed page hits along `path`.
    pub fn crossings(&self, path: &S3Path, opts: EventOptions) -> CrossingReport {
        detect_crossings_fn("page", path.knots(), |t| self.value(&path.point(t)), |t| self.admissible(&path.point(t)), opts)
    }
}

/// Return-time statistics of a page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauStats {
    pub tau_min: f64,
    pub tau_max: f64,
    /// Change of the extrema between half and full sample.
    pub refinement_error: f64,
    pub samples: usize,
}

/// Consecutive page-hit intervals along the orbits of `starts`, each followed
/// up to time `cap`.
pub fn page_tau_stats(
    model: &super::FlowModel,
    page: &Page,
    starts: &[Quat],
    cap: f64,
    opts: crate::flow_engine::IntegratorOptions,
) -> Result<TauStats> {
    let per: Vec<Result<(f64, f64)>> = crate::flow_engine::par_map(starts, |z| {
        let path = model.orbit(z, 0.0, 0.0, cap, opts)?;
        let hits: Vec<f64> = page.crossings(&path, EventOptions::default()).events.iter().map(|e| e.time).collect();
        if hits.len() < 2 {
            return Err(Error::NoReturn { cap });
        }
        let gaps = hits.windows(2).map(|w| w[1] - w[0]);
        Ok(gaps.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g))))
    });
    let per: Vec<(f64, f64)> = per.into_iter().collect::<Result<_>>()?;
    let fold = |xs: &[(f64, f64)]| xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| (a.min(*lo), b.max(*hi)));
    let (lo, hi) = fold(&per);
    let (lo2, hi2) = fold(&per[..per.len().div_ceil(2)]);
    Ok(TauStats { tau_min: lo, tau_max: hi, refinement_error: (lo2 - lo).max(hi - hi2), samples: per.len() })
}
