//! Linearized polar dynamics on the blown-up torus over a periodic orbit, and
//! the segment-witness check for windings of disk isotopies.

use crate::error::{Error, Result};
use crate::flow_engine::{integrate, winding_fn, FnSystem, IntegratorOptions};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// ϑ̇ = 1/T, θ̇ = b(ϑ, θ) on ℝ/ℤ × ℝ/2πℤ.
pub struct PolarTorus<B> {
    pub period: f64,
    pub b: B,
}

/// Geodesic-frame angle field cos²θ + K(ϑ) sin²θ.
pub fn geodesic_frame_field<K: Fn(f64) -> f64>(k: K) -> impl Fn(f64, f64) -> f64 {
    move |vt, th| {
        let (s, c) = th.sin_cos();
        c * c + k(vt) * s * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionVerdict {
    pub is_section: bool,
    /// Longest forward and backward waiting time over the starts (∞ if some
    /// start never hit the graph).
    pub max_forward: f64,
    pub max_backward: f64,
    pub starts: usize,
}

impl<B: Fn(f64, f64) -> f64 + Sync> PolarTorus<B> {
    pub fn new(period: f64, b: B) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Precondition(format!("period must be positive, got {period}")));
        }
        Ok(Self { period, b })
    }

    /// Samples (t, ϑ, θ) on [0, t] (t may be negative).
    pub fn flow(&self, start: (f64, f64), t: f64, opts: IntegratorOptions) -> Result<crate::flow_engine::Trajectory> {
        let sys = FnSystem {
            dim: 2,
            f: |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = 1.0 / self.period;
                dy[1] = (self.b)(y[0], y[1]);
            },
        };
        integrate(&sys, 0.0, &[start.0, start.1], t, opts)
    }

    fn wait(&self, start: (f64, f64), graph: &dyn Fn(f64) -> f64, cap: f64, opts: IntegratorOptions) -> Result<f64> {
        let tr = self.flow(start, cap, opts.max_step(0.05 * self.period.min(1.0)))?;
        let level = |y: &[f64]| ((y[1] - graph(y[0])) / TAU).floor();
        let l0 = level(tr.state(0));
        for i in 1..tr.len() {
            if level(tr.state(i)) != l0 {
                return Ok(tr.times()[i].abs());
            }
        }
        Ok(f64::INFINITY)
    }

    /// Every start on an n × n grid must cross the graph θ = g(ϑ) (mod 2π)
    /// forward and backward within `cap`. Starts sit just above the graph so
    /// that the backward crossing is not the starting point itself.
    pub fn boundary_section_check<G: Fn(f64) -> f64>(&self, graph: G, cap: f64, n: usize, opts: IntegratorOptions) -> Result<SectionVerdict> {
        let (mut fwd, mut bwd): (f64, f64) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let vt = i as f64 / n as f64;
                let th = graph(vt) + TAU * (j as f64 + 0.5) / n as f64;
                fwd = fwd.max(self.wait((vt, th), &graph, cap, opts)?);
                bwd = bwd.max(self.wait((vt, th), &graph, -cap, opts)?);
            }
        }
        Ok(SectionVerdict { is_section: fwd.is_finite() && bwd.is_finite(), max_forward: fwd, max_backward: bwd, starts: n * n })
    }
}

/// wind(f_t(y) − f_t(x)) against the scan of λ ↦ wind(Df_t(x + λ(y−x))(y − x)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlorioReport {
    pub lhs: f64,
    pub rhs_min: f64,
    pub rhs_max: f64,
    pub contained: bool,
    pub witness: f64,
    pub gap: f64,
}

/// `f(t, ζ)` is the isotopy and `df(t, ζ, v)` its differential applied to v.
pub fn florio_check<F, D>(f: F, df: D, x: Complex64, y: Complex64, t_end: f64) -> Result<FlorioReport>
where
    F: Fn(f64, Complex64) -> Complex64,
    D: Fn(f64, Complex64, Complex64) -> Complex64,
{
    if (y - x).norm() < 1e-12 {
        return Err(Error::Precondition("x and y must differ".into()));
    }
    let n0 = ((t_end.abs() / 0.05).ceil() as usize).max(16);
    let lhs = winding_fn(|t| f(t, y) - f(t, x), 0.0, t_end, n0)?;
    let rhs = |lam: f64| winding_fn(|t| df(t, x + (y - x) * lam, y - x), 0.0, t_end, n0);
    let lams: Vec<f64> = (0..64).map(|k| k as f64 / 63.0).collect();
    let vals: Vec<f64> = lams.iter().map(|&l| rhs(l)).collect::<Result<_>>()?;
    let rhs_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let rhs_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best = (lams[0], (vals[0] - lhs).abs());
    for (k, (&l, &v)) in lams.iter().zip(&vals).enumerate() {
        if (v - lhs).abs() < best.1 {
            best = (l, (v - lhs).abs());
        }
        if k > 0 && (vals[k - 1] - lhs) * (v - lhs) < 0.0 {
            let (mut a, mut b) = (lams[k - 1], l);
            let fa = vals[k - 1] - lhs;
            for _ in 0..40 {
                let m = 0.5 * (a + b);
                let fm = rhs(m)? - lhs;
                if fm.abs() < best.1 {
                    best = (m, fm.abs());
                }
                if (fm < 0.0) == (fa < 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
        }
    }
    let tol = 1e-9;
    Ok(FlorioReport {
        lhs,
        rhs_min,
        rhs_max,
        contained: lhs >= rhs_min - tol && lhs <= rhs_max + tol,
        witness: best.0,
        gap: best.1,
    })
}
