//! The Birkhoff annulus over the equator of an ellipsoid of revolution, its
//! return map, canonical lifts of the displacement and the annulus/disk
//! linking identity.

use super::gauss::linking_gauss;
use super::pages::TauStats;
use crate::error::{Error, Result};
use crate::flow_engine::{detect_crossings, integrate, par_map, EventOptions, IntegratorOptions, Section};
use crate::geometry2d::{conjugate_times, GeodesicSystem, RevolutionMetric, UnitTangent};
use crate::lift_s3::{Covering, Quat};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Annulus a(s, θ) = (c(s), cos θ ċ(s) + sin θ ċ(s)⊥) over the equator.
///
/// Lengths and times reported by this module are in units where the maximal
/// curvature equals one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffAnnulus {
    pub metric: RevolutionMetric,
}

/// One application of the return map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub s: f64,
    pub theta: f64,
    pub s_next: f64,
    pub theta_next: f64,
    pub tau: f64,
    /// Displacement η + ν along the canonical lift.
    pub ds: f64,
    /// Length η of the arc α₊ of c cut off by the first crossing.
    pub alpha_plus: f64,
}

struct Equator;

impl Section for Equator {
    fn id(&self) -> &str {
        "equator"
    }
    fn value(&self, y: &[f64]) -> f64 {
        y[2]
    }
}

impl BirkhoffAnnulus {
    pub fn new(metric: RevolutionMetric) -> Self {
        Self { metric }
    }

    /// √K_max: multiply raw lengths by this to normalize.
    pub fn scale(&self) -> f64 {
        self.metric.length_scale()
    }

    pub fn delta(&self) -> f64 {
        self.metric.delta()
    }

    /// Normalized length of the equator.
    pub fn length(&self) -> f64 {
        self.metric.equator_length() * self.scale()
    }

    /// Chart point at raw arclength `s` and angle `theta`.
    pub fn point(&self, s: f64, theta: f64) -> UnitTangent {
        let e = self.metric.equator_state(s);
        let v = [0, 1, 2].map(|k| theta.cos() * e.v[k] + theta.sin() * [0.0, 0.0, 1.0][k]);
        UnitTangent { p: e.p, v }
    }

    /// Inverse chart for a unit tangent based on the equator.
    pub fn coords(&self, t: &UnitTangent) -> (f64, f64) {
        let s = t.p[1].atan2(t.p[0]).rem_euclid(TAU);
        let e = self.metric.equator_state(s);
        let along = t.v[0] * e.v[0] + t.v[1] * e.v[1] + t.v[2] * e.v[2];
        (s, t.v[2].atan2(along))
    }

    /// Default time cap, 10·2π/√δ in normalized units.
    pub fn time_cap(&self) -> f64 {
        10.0 * TAU / self.delta().sqrt()
    }

    /// Checks that the displacement η + ν (raw units) lies in (2L/3, 3L/2).
    pub fn canonical_lift(&self, raw: f64) -> Result<f64> {
        if self.delta() <= 4.0 / 9.0 {
            return Err(Error::Precondition(format!("canonical lift needs δ > 4/9, got {}", self.delta())));
        }
        let l = self.metric.equator_length();
        if raw > 2.0 * l / 3.0 && raw < 1.5 * l {
            Ok(raw)
        } else {
            Err(Error::LiftSelection { raw })
        }
    }

    /// First return to the annulus. θ ∈ {0, π} uses the second conjugate
    /// point along the boundary orbit.
    ///
    /// The displacement is η + ν, where η is the length of the arc of c from
    /// c(s) forward to the first (southward) crossing and ν the length from
    /// there forward to the return point, each taken in (0, L).
    pub fn return_map(&self, s: f64, theta: f64, opts: IntegratorOptions) -> Result<ReturnSample> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::Precondition(format!("θ = {theta} outside [0, π]")));
        }
        let k = self.scale();
        let l = self.metric.equator_length();
        let arc = |from: f64, to: f64| (to - from).rem_euclid(l);
        if theta == 0.0 || theta == PI {
            let mut st = self.metric.equator_state(s);
            let sign = if theta == 0.0 { 1.0 } else { -1.0 };
            st.v = st.v.map(|x| sign * x);
            let (t1, t2, _) = conjugate_times(&self.metric, &st, opts)?;
            let (s1, s2) = (s + sign * t1, s + sign * t2);
            let eta = arc(s, s1);
            let ds = self.canonical_lift(eta + arc(s1, s2))?;
            return Ok(ReturnSample {
                s,
                theta,
                s_next: s2.rem_euclid(l),
                theta_next: theta,
                tau: k * t2,
                ds: k * ds,
                alpha_plus: k * eta,
            });
        }
        let sys = GeodesicSystem::new(self.metric);
        let cap = self.time_cap() / k;
        let chunk = 2.0 * TAU / k;
        let mut y = self.point(s, theta).to_vec();
        let mut t0 = 0.0;
        let mut down: Option<f64> = None;
        while t0 < cap {
            let tr = integrate(&sys, t0, &y, chunk, opts.max_step(opts.max_step.min(0.25)))?;
            let rep = detect_crossings(&tr, &Equator, EventOptions::default());
            for e in rep.events.iter().filter(|e| e.time > 1e-9) {
                let st = UnitTangent::from_slice(&e.state);
                if st.p[2].abs() > 1e-8 {
                    return Err(Error::Resolution(format!("crossing off the equator by {:e}", st.p[2])));
                }
                let (s_hit, th_hit) = self.coords(&st);
                if e.sign < 0 && down.is_none() {
                    down = Some(s_hit);
                } else if e.sign > 0 {
                    if let Some(sd) = down {
                        let eta = arc(s, sd);
                        let ds = self.canonical_lift(eta + arc(sd, s_hit))?;
                        return Ok(ReturnSample {
                            s,
                            theta,
                            s_next: s_hit,
                            theta_next: th_hit,
                            tau: k * e.time,
                            ds: k * ds,
                            alpha_plus: k * eta,
                        });
                    }
                }
            }
            t0 = tr.t_end();
            y = tr.last_state().to_vec();
        }
        Err(Error::NoReturn { cap: self.time_cap() })
    }

    /// Return samples on the ns × nθ grid s = kL/ns, θ = (j + ½)π/nθ.
    pub fn grid(&self, ns: usize, ntheta: usize, opts: IntegratorOptions) -> Result<Vec<ReturnSample>> {
        let pts: Vec<(f64, f64)> = (0..ns)
            .flat_map(|i| (0..ntheta).map(move |j| (TAU * i as f64 / ns as f64, PI * (j as f64 + 0.5) / ntheta as f64)))
            .collect();
        par_map(&pts, |&(s, th)| self.return_map(s, th, opts)).into_iter().collect()
    }

    /// Displacements along `n` successive returns from (s, θ).
    pub fn displacements(&self, s: f64, theta: f64, n: usize, opts: IntegratorOptions) -> Result<Vec<f64>> {
        let (mut s, mut th) = (s, theta);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let r = self.return_map(s, th, opts)?;
            out.push(r.ds);
            (s, th) = (r.s_next, r.theta_next);
        }
        Ok(out)
    }

    /// Lift to S³ of the boundary orbit (θ = 0) or its reverse (θ = π),
    /// closed after two turns.
    pub fn boundary_loop(&self, reversed: bool, n: usize) -> Vec<Quat> {
        let sign = if reversed { -1.0 } else { 1.0 };
        let states = (0..=n).map(|k| {
            let mut st = self.metric.equator_state(sign * 2.0 * TAU * k as f64 / n as f64);
            st.v = st.v.map(|x| sign * x);
            st
        });
        lift_states(&Covering::new(self.metric), states)
    }

    /// Signed count of crossings of a closed S³ polyline with the lifted
    /// annulus, detected downstairs at sign changes of the height while the
    /// velocity points north.
    pub fn intersections(&self, beta: &[Quat]) -> i64 {
        let cov = Covering::new(self.metric);
        let states: Vec<UnitTangent> = beta.iter().map(|q| cov.forward(q)).collect();
        let mut count = 0;
        for w in states.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let (za, zb) = (a.p[2], b.p[2]);
            if (za < 0.0) == (zb < 0.0) {
                continue;
            }
            let u = za / (za - zb);
            let vz = a.v[2] + u * (b.v[2] - a.v[2]);
            if vz > 0.0 {
                count += if zb > za { 1 } else { -1 };
            }
        }
        count
    }
}

/// Sheet-continuous lift of a sequence of unit tangents.
pub fn lift_states<I: IntoIterator<Item = UnitTangent>>(cov: &Covering, states: I) -> Vec<Quat> {
    let mut out: Vec<Quat> = Vec::new();
    for st in states {
        let mut q = cov.inverse(&st);
        if let Some(prev) = out.last() {
            if q.dot(prev) < 0.0 {
                q = q.neg();
            }
        }
        out.push(q);
    }
    out
}

/// Return-time extrema over a grid, with the change against the
/// half-resolution subgrid as refinement error.
pub fn annulus_tau_stats(samples: &[ReturnSample]) -> TauStats {
    let taus: Vec<f64> = samples.iter().map(|r| r.tau).collect();
    let min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let max = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sub_min = taus.iter().step_by(2).copied().fold(f64::INFINITY, f64::min);
    let sub_max = taus.iter().step_by(2).copied().fold(f64::NEG_INFINITY, f64::max);
    TauStats {
        tau_min: min,
        tau_max: max,
        refinement_error: (sub_min - min).abs().max((sub_max - max).abs()),
        samples: taus.len(),
    }
}

pub fn write_returns_csv<W: std::io::Write>(w: W, samples: &[ReturnSample]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["s", "theta", "s_next", "theta_next", "tau", "ds"]).map_err(|e| Error::Io(e.to_string()))?;
    for r in samples {
        wr.write_record([r.s, r.theta, r.s_next, r.theta_next, r.tau, r.ds].map(|x| format!("{x:.12e}")))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

/// Both sides of link(β, γ_c) + link(β, γ̂_c) = int(β, Ã_c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusIdentity {
    pub link_boundary: i64,
    pub link_reversed: i64,
    pub intersections: i64,
    pub residual: i64,
    pub gauss_gap: f64,
}

pub fn annulus_disk_identity_check(annulus: &BirkhoffAnnulus, beta: &[Quat]) -> Result<AnnulusIdentity> {
    let g1 = linking_gauss(beta, &annulus.boundary_loop(false, 800))?;
    let g2 = linking_gauss(beta, &annulus.boundary_loop(true, 800))?;
    let int = annulus.intersections(beta);
    Ok(AnnulusIdentity {
        link_boundary: g1.value,
        link_reversed: g2.value,
        intersections: int,
        residual: g1.value + g2.value - int,
        gauss_gap: g1.gap.max(g2.gap),
    })
}
