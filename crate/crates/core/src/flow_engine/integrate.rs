use crate::error::{Error, Result};

/// Right-hand side of an autonomous-or-not ODE, optionally with a projection
/// back onto an invariant constraint set after each accepted step.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    /// Pulls `y` back onto the constraint set. Returns false if that failed.
    fn project(&self, _y: &mut [f64]) -> bool {
        true
    }
}

/// Closure adapter for quick systems without a constraint.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|; keeps event scans fine enough.
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, max_step: f64::INFINITY, min_step: 1e-14, max_steps: 2_000_000 }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Dense trajectory produced by [`integrate`].
///
/// Sample times are strictly monotone in the direction of integration. Each
/// step carries the five Dormand–Prince interpolation vectors.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    ts: Vec<f64>,
    ys: Vec<f64>,
    dense: Vec<f64>,
    pub opts: IntegratorOptions,
    pub stats: StepStats,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `sys` from `(t0, y0)` to `t0 + span` (span may be negative).
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    span: f64,
    opts: IntegratorOptions,
) -> Result<Trajectory> {
    let n = sys.dim();
    assert_eq!(y0.len(), n, "initial state has the wrong dimension");
    let dir = if span < 0.0 { -1.0 } else { 1.0 };
    let t_end = t0 + span;

    let mut y = y0.to_vec();
    if !sys.project(&mut y) {
        return Err(Error::ConstraintBlowup { t: t0, what: "initial projection failed".into() });
    }
    let mut traj = Trajectory {
        dim: n,
        ts: vec![t0],
        ys: y.clone(),
        dense: Vec::new(),
        opts,
        stats: StepStats::default(),
    };
    if span == 0.0 {
        return Ok(traj);
    }

    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    sys.rhs(t0, &y, &mut k[0]);
    traj.stats.rhs_evals += 1;

    let mut t = t0;
    let mut h = initial_step(sys, t0, &y, &k[0], dir, opts).min(opts.max_step).min(span.abs());
    let mut last_reject = false;

    while dir * (t_end - t) > 0.0 {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            return Err(Error::MaxSteps(opts.max_steps));
        }
        if h < opts.min_step {
            return Err(Error::StepUnderflow { t, h });
        }
        let remaining = (t_end - t).abs();
        let mut final_step = false;
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
            final_step = true;
        }
        let hs = dir * h;

        let stage = |coeffs: &[(usize, f64)], k: &[Vec<f64>; 7], out: &mut [f64]| {
            for i in 0..n {
                let mut acc = 0.0;
                for &(j, a) in coeffs {
                    acc += a * k[j][i];
                }
                out[i] = y[i] + hs * acc;
            }
        };
        stage(&[(0, A21)], &k, &mut ytmp);
        sys.rhs(t + C2 * hs, &ytmp, &mut k[1]);
        stage(&[(0, A31), (1, A32)], &k, &mut ytmp);
        sys.rhs(t + C3 * hs, &ytmp, &mut k[2]);
        stage(&[(0, A41), (1, A42), (2, A43)], &k, &mut ytmp);
        sys.rhs(t + C4 * hs, &ytmp, &mut k[3]);
        stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], &k, &mut ytmp);
        sys.rhs(t + C5 * hs, &ytmp, &mut k[4]);
        stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], &k, &mut ytmp);
        sys.rhs(t + hs, &ytmp, &mut k[5]);
        stage(&[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], &k, &mut ynew);
        sys.rhs(t + hs, &ynew, &mut k[6]);
        traj.stats.rhs_evals += 6;

        let mut err2 = 0.0;
        for i in 0..n {
            let e = hs
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err2 += (e / sc) * (e / sc);
        }
        let err = (err2 / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::ConstraintBlowup { t, what: "non-finite step error".into() });
        }

        if err <= 1.0 {
            if !sys.project(&mut ynew) || ynew.iter().any(|v| !v.is_finite()) {
                return Err(Error::ConstraintBlowup { t: t + hs, what: "projection failed".into() });
            }
            // Re-evaluate at the projected point so the interpolant and the
            // next step agree with the stored sample.
            sys.rhs(t + hs, &ynew, &mut k[6]);
            traj.stats.rhs_evals += 1;
            for i in 0..n {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k[0][i] - ydiff;
                traj.dense.push(y[i]);
                traj.dense.push(ydiff);
                traj.dense.push(bspl);
                traj.dense.push(ydiff - hs * k[6][i] - bspl);
                traj.dense.push(
                    hs * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]),
                );
            }
            t = if final_step { t_end } else { t + hs };
            y.copy_from_slice(&ynew);
            traj.ts.push(t);
            traj.ys.extend_from_slice(&y);
            traj.stats.accepted += 1;
            let (a, b) = k.split_at_mut(6);
            a[0].copy_from_slice(&b[0]);

            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_reject {
                fac = fac.min(1.0);
            }
            last_reject = false;
            h = (h * fac).min(opts.max_step);
        } else {
            traj.stats.rejected += 1;
            last_reject = true;
            h *= (0.9 * err.powf(-0.2)).max(0.1);
        }
    }
    Ok(traj)
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    opts: IntegratorOptions,
) -> f64 {
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = (y0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + dir * h0 * f).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + dir * h0, &y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.ts.len()
    }
    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
    pub fn times(&self) -> &[f64] {
        &self.ts
    }
    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }
    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }
    /// +1 for forward integration, -1 for backward.
    pub fn direction(&self) -> f64 {
        if self.t_end() < self.t_start() {
            -1.0
        } else {
            1.0
        }
    }
    pub fn state(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }
    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Index of the step containing `t`, clamped to the trajectory.
    fn locate(&self, t: f64) -> usize {
        let steps = self.ts.len() - 1;
        let dir = self.direction();
        // number of sample times at or before t along the direction
        let pos = self.ts.partition_point(|&s| dir * (s - t) <= 0.0);
        pos.saturating_sub(1).min(steps - 1)
    }

    /// Dense-output evaluation at `t` (clamped to the covered interval).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.ts.len() == 1 {
            out.copy_from_slice(self.state(0));
            return;
        }
        let i = self.locate(t);
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        let th = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let th1 = 1.0 - th;
        let base = i * self.dim * 5;
        for (j, o) in out.iter_mut().enumerate() {
            let r = &self.dense[base + 5 * j..base + 5 * j + 5];
            *o = r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// `n + 1` equally spaced samples over the covered interval.
    pub fn sample_uniform(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let (a, b) = (self.t_start(), self.t_end());
        (0..=n)
            .map(|i| {
                let t = a + (b - a) * i as f64 / n as f64;
                (t, self.eval(t))
            })
            .collect()
    }

    /// Writes `t,<cols...>` rows for the stored samples.
    pub fn write_csv<W: std::io::Write>(&self, w: W, header: &[&str]) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["t"];
        head.extend_from_slice(header);
        wr.write_record(&head).map_err(|e| Error::Io(e.to_string()))?;
        for i in 0..self.len() {
            let mut row = vec![format!("{}", self.ts[i])];
            row.extend(self.state(i).iter().map(|v| format!("{v}")));
            wr.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator() -> FnSystem<impl Fn(f64, &[f64], &mut [f64]) + Sync> {
        FnSystem { dim: 2, f: |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        } }
    }

    #[test]
    fn harmonic_oscillator_closes() {
        let tr = integrate(&oscillator(), 0.0, &[1.0, 0.0], 2.0 * PI, IntegratorOptions::default()).unwrap();
        let y = tr.last_state();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9, "{y:?}");
    }

    #[test]
    fn dense_output_tracks_closed_form() {
        let tr = integrate(&oscillator(), 0.0, &[1.0, 0.0], 10.0, IntegratorOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let t = 10.0 * i as f64 / 999.0;
            let y = tr.eval(t);
            worst = worst.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
        }
        assert!(worst < 1e-8, "dense error {worst}");
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let fwd = integrate(&oscillator(), 0.0, &[0.3, -0.7], 3.0, IntegratorOptions::default()).unwrap();
        let back = integrate(&oscillator(), 3.0, fwd.last_state(), -3.0, IntegratorOptions::default()).unwrap();
        assert_eq!(back.direction(), -1.0);
        let y = back.last_state();
        assert!((y[0] - 0.3).abs() < 1e-9 && (y[1] + 0.7).abs() < 1e-9);
        let mid = back.eval(1.5);
        let mid_f = fwd.eval(1.5);
        assert!((mid[0] - mid_f[0]).abs() < 1e-8);
    }

    #[test]
    fn halving_tolerance_agrees() {
        let sys = FnSystem { dim: 2, f: |t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -(1.0 + 0.3 * t.sin()) * y[0];
        } };
        let a = integrate(&sys, 0.0, &[1.0, 0.0], 20.0, IntegratorOptions::with_tol(1e-9)).unwrap();
        let b = integrate(&sys, 0.0, &[1.0, 0.0], 20.0, IntegratorOptions::with_tol(5e-10)).unwrap();
        for i in 0..=200 {
            let t = 0.1 * i as f64;
            let (ya, yb) = (a.eval(t), b.eval(t));
            assert!((ya[0] - yb[0]).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn max_steps_is_reported() {
        let o = IntegratorOptions { max_steps: 3, ..IntegratorOptions::default() };
        let err = integrate(&oscillator(), 0.0, &[1.0, 0.0], 100.0, o).unwrap_err();
        assert_eq!(err, Error::MaxSteps(3));
    }
}
