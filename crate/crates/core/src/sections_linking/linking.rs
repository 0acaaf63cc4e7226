//! Closing orbit arcs through a page and counting linking with the binding,
//! plus the finite-time positive-linking proxy.

use super::gauss::{linking_gauss, GaussLink};
use super::models::{FlowModel, S3Path};
use super::pages::Page;
use crate::error::{Error, Result};
use crate::flow_engine::{EventOptions, IntegratorOptions};
use crate::lift_s3::Quat;
use serde::{Deserialize, Serialize};

/// The arc over I(T, x) = [t₋(x), T + t₊(φᵀx)] and its crossing count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedArc {
    pub t_minus: f64,
    pub t_end: f64,
    pub hits: Vec<f64>,
    pub signed_hits: i64,
    /// Crossings over I(T, x) minus one.
    pub link: i64,
    /// Hits with transversal speed under the tangency tolerance.
    pub flagged: usize,
    /// An arc endpoint sat on the page within the event tolerance.
    pub endpoint_on_page: bool,
}

/// Page hits on `path` closing the arc over [0, t]. The path must extend
/// at least one return time on each side.
pub fn link_via_crossings(path: &S3Path, page: &Page, t: f64, opts: EventOptions) -> Result<ClosedArc> {
    let rep = page.crossings(path, opts);
    let mut hits: Vec<(f64, i8)> = Vec::with_capacity(rep.events.len());
    for e in &rep.events {
        if hits.last().map_or(true, |(h, _)| (e.time - h).abs() > 10.0 * opts.time_tol) {
            hits.push((e.time, e.sign));
        }
    }
    let eps = 10.0 * opts.time_tol;
    let t_minus = hits.iter().map(|h| h.0).filter(|&h| h <= eps).fold(f64::NEG_INFINITY, f64::max);
    let t_end = hits.iter().map(|h| h.0).filter(|&h| h >= t - eps).fold(f64::INFINITY, f64::min);
    if !t_minus.is_finite() || !t_end.is_finite() {
        return Err(Error::NoReturn { cap: path.t_end() - path.t_start() });
    }
    let inside: Vec<(f64, i8)> = hits.iter().copied().filter(|h| h.0 >= t_minus && h.0 <= t_end).collect();
    let signed_hits: i64 = inside.iter().map(|h| h.1 as i64).sum();
    Ok(ClosedArc {
        t_minus,
        t_end,
        hits: inside.iter().map(|h| h.0).collect(),
        signed_hits,
        link: signed_hits - 1,
        flagged: rep.flagged.len(),
        endpoint_on_page: t_minus.abs() < eps || (t_end - t).abs() < eps,
    })
}

/// Normalized straight chord from `a` to `b` (n interior points, `b` last).
pub fn chord(a: &Quat, b: &Quat, n: usize) -> Vec<Quat> {
    (1..=n).map(|k| a.scale(1.0 - k as f64 / n as f64).add(&b.scale(k as f64 / n as f64)).normalized()).collect()
}

/// Loop k(T, x): the arc sampled every `spacing` time units, closed by a chord
/// inside the page (exact for pages of linear forms).
pub fn closed_loop(path: &S3Path, arc: &ClosedArc, spacing: f64) -> Vec<Quat> {
    let n = (((arc.t_end - arc.t_minus) / spacing).ceil() as usize).max(8);
    let mut pts = path.polyline(arc.t_minus, arc.t_end, n);
    let (a, b) = (*pts.last().unwrap(), pts[0]);
    pts.extend(chord(&a, &b, 16));
    pts
}

/// Gauss linking of k(T, x) with the (single) binding circle of `page`.
pub fn link_gauss_closed(path: &S3Path, arc: &ClosedArc, page: &Page, spacing: f64) -> Result<GaussLink> {
    if page.factors.len() != 1 {
        return Err(Error::Precondition("Gauss cross-check needs a page with one binding circle".into()));
    }
    let binding = page.factors[0].zero_circle(400);
    linking_gauss(&closed_loop(path, arc, spacing), &binding)
}

/// Finite-time estimate of link(k(T,p), k(S,q)) / (T·S).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingSample {
    pub ell: f64,
    pub link: i64,
    pub t_p: f64,
    pub t_q: f64,
    /// Largest change of ℓ̂ under chord perturbations.
    pub error_bar: f64,
    pub gauss_gap: f64,
}

/// Recurrence time near `t`: among the local minimizers of |φˢp − p| on
/// [0.8t, 1.2t] that come close to the best one, the one nearest `t`.
fn recurrence(path: &S3Path, p: &Quat, t: f64) -> f64 {
    let (a, b) = (0.8 * t, 1.2 * t);
    let n = ((b - a) / 0.01).ceil() as usize;
    let h = (b - a) / n as f64;
    let d = |s: f64| path.point(s).sub(p).norm();
    let vals: Vec<f64> = (0..=n).map(|k| d(a + h * k as f64)).collect();
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut mins: Vec<(f64, f64)> = Vec::new();
    for k in 0..=n {
        let left = if k > 0 { vals[k - 1] } else { f64::INFINITY };
        let right = if k < n { vals[k + 1] } else { f64::INFINITY };
        if vals[k] <= left && vals[k] <= right {
            let s0 = a + h * k as f64;
            let (mut lo, mut hi) = ((s0 - h).max(a), (s0 + h).min(b));
            for _ in 0..60 {
                let m1 = hi - g * (hi - lo);
                let m2 = lo + g * (hi - lo);
                if d(m1) < d(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let s = 0.5 * (lo + hi);
            mins.push((s, d(s)));
        }
    }
    let best = mins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let cut = (2.0 * best).max(best + 1e-4);
    mins.iter()
        .filter(|m| m.1 <= cut)
        .min_by(|x, y| (x.0 - t).abs().total_cmp(&(y.0 - t).abs()))
        .map_or(t, |m| m.0)
}

fn recurrent_loop(path: &S3Path, p: &Quat, t: f64, bend: Option<&Quat>) -> (f64, Vec<Quat>) {
    let tt = recurrence(path, p, t);
    let mut pts = path.polyline(0.0, tt, ((tt / 0.02).ceil() as usize).max(16));
    let end = *pts.last().unwrap();
    match bend {
        None => pts.extend(chord(&end, p, 16)),
        Some(dir) => {
            let mid = end.add(p).scale(0.5).add(dir).normalized();
            pts.extend(chord(&end, &mid, 8));
            pts.extend(chord(&mid, p, 8));
        }
    }
    *pts.last_mut().unwrap() = pts[0];
    (tt, pts)
}

/// ℓ̂(p, q) from recurrent returns near T and S, closed by short chords.
pub fn positive_linking_sample(model: &FlowModel, p: &Quat, q: &Quat, t: f64, s: f64, opts: IntegratorOptions) -> Result<LinkingSample> {
    let (p, q) = (p.normalized(), q.normalized());
    let pp = model.orbit(&p, 0.0, 0.0, 1.25 * t, opts)?;
    let pq = model.orbit(&q, 0.0, 0.0, 1.25 * s, opts)?;
    let (tp, lp) = recurrent_loop(&pp, &p, t, None);
    let (tq, lq) = recurrent_loop(&pq, &q, s, None);
    let dmin = lp
        .iter()
        .map(|a| lq.iter().map(|b| a.sub(b).norm()).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    if dmin < 1e-3 {
        return Err(Error::Precondition(format!("orbits come within {dmin:e}; p and q look like the same orbit")));
    }
    let g = linking_gauss(&lp, &lq)?;
    let ell = g.value as f64 / (tp * tq);
    let mut error_bar: f64 = 0.0;
    for dir in [Quat([0.0, 0.0, 0.02, 0.0]), Quat([0.0, 0.02, 0.0, -0.02])] {
        let (_, lp2) = recurrent_loop(&pp, &p, t, Some(&dir));
        let (_, lq2) = recurrent_loop(&pq, &q, s, Some(&dir.neg()));
        if let Ok(g2) = linking_gauss(&lp2, &lq2) {
            error_bar = error_bar.max((g2.value - g.value).abs() as f64 / (tp * tq));
        }
    }
    Ok(LinkingSample { ell, link: g.value, t_p: tp, t_q: tq, error_bar, gauss_gap: g.gap })
}
