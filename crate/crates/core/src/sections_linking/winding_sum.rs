//! Closed braids in the chart Ψ(s, ζ) = (ζ, √(1−|ζ|²) e^{2πis}) around the
//! binding {w = 0}, and the identity link = Σᵢⱼ wind(kᵖᵢ − k^qⱼ).

use super::models::S3Path;
use crate::error::{Error, Result};
use crate::flow_engine::winding;
use crate::lift_s3::Quat;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Chart traces of a closed loop transverse to the pages {arg w = 2πs}.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartLoop {
    /// strands[i][k] is ζ at s = k/grid on the i-th passage; the last
    /// strand ends where the first begins.
    pub strands: Vec<Vec<Complex64>>,
    pub grid: usize,
}

pub fn chart(s: f64, zeta: Complex64) -> Quat {
    let r = (1.0 - zeta.norm_sqr()).max(0.0).sqrt();
    Quat::from_complex(zeta, Complex64::from_polar(r, TAU * s))
}

impl ChartLoop {
    /// Follows `path` from `t0` (on the page s = 0) for `turns` full turns of
    /// arg w. The last strand is replaced on [1−δ, 1] by a straight chord in ζ
    /// back to the starting point.
    pub fn from_path(path: &S3Path, t0: f64, turns: usize, grid: usize, delta: f64) -> Result<Self> {
        if turns == 0 || grid < 8 {
            return Err(Error::Precondition("need at least one turn and eight grid cells".into()));
        }
        let w0 = path.point(t0).w();
        if w0.norm() < 1e-9 || w0.arg().abs() > 1e-6 {
            return Err(Error::Precondition("start point is not on the page s = 0".into()));
        }
        // unwrapped arg w on a fine time grid
        let dt = 0.01;
        let mut ts = vec![t0];
        let mut phis = vec![0.0];
        let target = TAU * turns as f64;
        let mut t = t0;
        while *phis.last().unwrap() < target {
            t += dt;
            if t > path.t_end() {
                return Err(Error::NoReturn { cap: path.t_end() - t0 });
            }
            let w = path.point(t).w();
            if w.norm() < 1e-12 {
                return Err(Error::DegeneratePath("orbit meets the binding".into()));
            }
            let prev = *phis.last().unwrap();
            let mut d = w.arg() - prev.rem_euclid(TAU);
            d = (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
            phis.push(prev + d);
            ts.push(t);
        }
        let phi_at = |t: f64| -> f64 {
            let i = ts.partition_point(|&x| x <= t).clamp(1, ts.len() - 1);
            let base = phis[i - 1];
            let w = path.point(t).w();
            let mut d = w.arg() - base.rem_euclid(TAU);
            d = (d + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
            base + d
        };
        let time_of = |phi: f64| -> f64 {
            let i = phis.partition_point(|&x| x < phi).clamp(1, phis.len() - 1);
            let (mut a, mut b) = (ts[i - 1], ts[i]);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if phi_at(m) < phi {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let start = path.point(t0).z();
        let mut strands = Vec::with_capacity(turns);
        for i in 0..turns {
            let strand: Vec<Complex64> =
                (0..=grid).map(|k| path.point(time_of(TAU * (i as f64 + k as f64 / grid as f64))).z()).collect();
            strands.push(strand);
        }
        strands[0][0] = start;
        let k0 = ((1.0 - delta) * grid as f64).floor() as usize;
        let last = strands.last_mut().unwrap();
        let from = last[k0];
        for k in k0..=grid {
            let u = (k - k0) as f64 / (grid - k0) as f64;
            last[k] = from * (1.0 - u) + start * u;
        }
        Ok(Self { strands, grid })
    }

    /// The loop in S³, closed (last point equals the first).
    pub fn to_s3(&self) -> Vec<Quat> {
        let mut pts = Vec::with_capacity(self.strands.len() * self.grid + 1);
        for st in &self.strands {
            for (k, z) in st.iter().enumerate().take(self.grid) {
                pts.push(chart(k as f64 / self.grid as f64, *z));
            }
        }
        pts.push(pts[0]);
        pts
    }
}

/// Σᵢⱼ wind_{s∈[0,1]}(kᵖᵢ(s) − k^qⱼ(s)).
pub fn winding_sum(p: &ChartLoop, q: &ChartLoop) -> Result<f64> {
    if p.grid != q.grid {
        return Err(Error::Precondition("chart loops must share the s grid".into()));
    }
    let mut total = 0.0;
    for a in &p.strands {
        for b in &q.strands {
            let diff: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            total += winding(&diff)?;
        }
    }
    Ok(total)
}
