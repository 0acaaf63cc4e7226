use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Continuous lift of a sampled angle, using the previous sample as branch
/// reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleTracker {
    last_raw: f64,
    value: f64,
}

impl AngleTracker {
    pub fn new(raw: f64) -> Self {
        Self { last_raw: raw, value: raw }
    }
    /// Feeds the next raw angle (any branch) and returns the unwrapped value.
    pub fn push(&mut self, raw: f64) -> f64 {
        let mut d = (raw - self.last_raw) % TAU;
        if d > PI {
            d -= TAU;
        } else if d < -PI {
            d += TAU;
        }
        self.value += d;
        self.last_raw = raw;
        self.value
    }
    pub fn value(&self) -> f64 {
        self.value
    }
}

pub fn unwrap_angles(raw: &[f64]) -> Vec<f64> {
    let Some(&first) = raw.first() else { return Vec::new() };
    let mut tr = AngleTracker::new(first);
    std::iter::once(first).chain(raw[1..].iter().map(|&a| tr.push(a))).collect()
}

fn step_angle(a: Complex64, b: Complex64) -> f64 {
    (b * a.conj()).arg()
}

/// Winding number of a sampled planar path: total continuous change of the
/// argument divided by 2π. Consecutive samples must turn by less than π/2.
pub fn winding(samples: &[Complex64]) -> Result<f64> {
    if let Some(i) = samples.iter().position(|z| z.norm() == 0.0 || !z.norm().is_finite()) {
        return Err(Error::DegeneratePath(format!("sample {i} is zero")));
    }
    let mut total = 0.0;
    for (i, w) in samples.windows(2).enumerate() {
        let d = step_angle(w[0], w[1]);
        if d.abs() >= FRAC_PI_2 {
            return Err(Error::Resolution(format!("step {i} turns by {d:.3} rad")));
        }
        total += d;
    }
    Ok(total / TAU)
}

/// Winding number of `z` over `[a, b]` with automatic refinement wherever a
/// sampling step would turn by π/2 or more.
pub fn winding_fn<F: Fn(f64) -> Complex64>(z: F, a: f64, b: f64, n0: usize) -> Result<f64> {
    let n0 = n0.max(2);
    let eval = |t: f64| -> Result<Complex64> {
        let v = z(t);
        if v.norm() == 0.0 || !v.norm().is_finite() {
            Err(Error::DegeneratePath(format!("path vanishes at t = {t}")))
        } else {
            Ok(v)
        }
    };
    fn refine<F: Fn(f64) -> Result<Complex64>>(
        eval: &F,
        t0: f64,
        z0: Complex64,
        t1: f64,
        z1: Complex64,
        depth: u32,
    ) -> Result<f64> {
        let d = step_angle(z0, z1);
        if d.abs() < FRAC_PI_2 * 0.5 {
            return Ok(d);
        }
        if depth == 0 {
            return Err(Error::Resolution(format!("interval [{t0}, {t1}] still turns by {d:.3}")));
        }
        let tm = 0.5 * (t0 + t1);
        let zm = eval(tm)?;
        Ok(refine(eval, t0, z0, tm, zm, depth - 1)? + refine(eval, tm, zm, t1, z1, depth - 1)?)
    }
    let mut total = 0.0;
    let mut t_prev = a;
    let mut z_prev = eval(a)?;
    for i in 1..=n0 {
        let t = a + (b - a) * i as f64 / n0 as f64;
        let zt = eval(t)?;
        total += refine(&eval, t_prev, z_prev, t, zt, 40)?;
        t_prev = t;
        z_prev = zt;
    }
    Ok(total / TAU)
}
