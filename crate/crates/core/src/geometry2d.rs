//! Ellipsoids of revolution {x² + y² + (z/c)² = 1}: curvature, pinching,
//! geodesic flow and Jacobi fields.

use crate::error::{Error, Result};
use crate::flow_engine::{integrate, IntegratorOptions, OdeSystem, Trajectory};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

pub type Vec3 = [f64; 3];

pub(crate) fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// Points of the surface must satisfy the constraint to this accuracy.
pub const SURFACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevolutionMetric {
    pub c: f64,
    pub k_min: f64,
    pub k_max: f64,
}

/// Curvature extrema found by grid search plus meridian refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pinching {
    pub k_min: f64,
    pub k_max: f64,
    pub delta: f64,
    /// Bound on how far the grid extrema sat from the refined ones.
    pub grid_error: f64,
}

impl RevolutionMetric {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Precondition(format!("semi-axis c must be positive, got {c}")));
        }
        let (a, b) = (c * c, 1.0 / (c * c));
        Ok(Self { c, k_min: a.min(b), k_max: a.max(b) })
    }

    pub fn round() -> Self {
        Self::new(1.0).unwrap()
    }

    pub fn constraint(&self, p: &Vec3) -> f64 {
        p[0] * p[0] + p[1] * p[1] + p[2] * p[2] / (self.c * self.c) - 1.0
    }

    pub fn constraint_grad(&self, p: &Vec3) -> Vec3 {
        [2.0 * p[0], 2.0 * p[1], 2.0 * p[2] / (self.c * self.c)]
    }

    pub fn unit_normal(&self, p: &Vec3) -> Vec3 {
        let g = self.constraint_grad(p);
        let n = norm3(&g);
        g.map(|x| x / n)
    }

    /// Point at latitude `phi` (parametric) and longitude `lon`.
    pub fn point(&self, phi: f64, lon: f64) -> Vec3 {
        [phi.cos() * lon.cos(), phi.cos() * lon.sin(), self.c * phi.sin()]
    }

    fn curvature_unchecked(&self, p: &Vec3) -> f64 {
        let c2 = self.c * self.c;
        let s = p[0] * p[0] + p[1] * p[1] + p[2] * p[2] / (c2 * c2);
        1.0 / (c2 * s * s)
    }

    /// Gaussian curvature at a surface point.
    pub fn curvature(&self, p: &Vec3) -> Result<f64> {
        let r = self.constraint(p);
        if r.abs() > SURFACE_TOL {
            return Err(Error::OffSurface { residual: r });
        }
        Ok(self.curvature_unchecked(p))
    }

    /// Curvature extrema over a 64×64 latitude–longitude grid, refined by
    /// golden-section search along a meridian.
    pub fn pinching(&self) -> Pinching {
        let n = 64;
        let (mut gmin, mut gmax) = (f64::INFINITY, 0.0f64);
        for i in 0..=n {
            let phi = -FRAC_PI_2 + std::f64::consts::PI * i as f64 / n as f64;
            for j in 0..n {
                let k = self.curvature_unchecked(&self.point(phi, TAU * j as f64 / n as f64));
                gmin = gmin.min(k);
                gmax = gmax.max(k);
            }
        }
        let along = |phi: f64| self.curvature_unchecked(&self.point(phi, 0.0));
        let rmin = golden(along, 0.0, FRAC_PI_2).min(gmin);
        let rmax = -golden(|x| -along(x), 0.0, FRAC_PI_2).min(-gmax);
        let grid_error = (gmin - rmin).abs().max((gmax - rmax).abs());
        Pinching { k_min: rmin, k_max: rmax, delta: rmin / rmax, grid_error }
    }

    /// Factor by which lengths and times are multiplied when the metric is
    /// rescaled so that the maximal curvature equals one.
    pub fn length_scale(&self) -> f64 {
        self.k_max.sqrt()
    }

    pub fn delta(&self) -> f64 {
        self.k_min / self.k_max
    }

    /// Length of the equator, which is a closed geodesic.
    pub fn equator_length(&self) -> f64 {
        TAU
    }

    /// Unit tangent along the equator at arclength `s`, pointing east.
    pub fn equator_state(&self, s: f64) -> UnitTangent {
        UnitTangent { p: [s.cos(), s.sin(), 0.0], v: [-s.sin(), s.cos(), 0.0] }
    }

    /// Pulls (p, v) back onto the unit tangent bundle.
    pub fn project(&self, p: &mut Vec3, v: &mut Vec3) -> bool {
        for _ in 0..3 {
            let f = self.constraint(p);
            let g = self.constraint_grad(p);
            let gg = dot3(&g, &g);
            if gg == 0.0 || !gg.is_finite() {
                return false;
            }
            for k in 0..3 {
                p[k] -= f * g[k] / gg;
            }
        }
        let nrm = self.unit_normal(p);
        let vn = dot3(v, &nrm);
        for k in 0..3 {
            v[k] -= vn * nrm[k];
        }
        let l = norm3(v);
        if l == 0.0 || !l.is_finite() {
            return false;
        }
        for x in v.iter_mut() {
            *x /= l;
        }
        true
    }

    /// Acceleration of a unit-speed geodesic: the normal correction that keeps
    /// the curve on the surface.
    pub fn geodesic_accel(&self, p: &Vec3, v: &Vec3) -> Vec3 {
        let g = self.constraint_grad(p);
        let c2 = self.c * self.c;
        let vhv = 2.0 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] / c2);
        let s = vhv / dot3(&g, &g);
        g.map(|x| -s * x)
    }
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    f(a).min(f(b)).min(f1).min(f2)
}

/// Unit tangent vector on the embedded surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitTangent {
    pub p: Vec3,
    pub v: Vec3,
}

impl UnitTangent {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.p[0], self.p[1], self.p[2], self.v[0], self.v[1], self.v[2]]
    }
    pub fn from_slice(y: &[f64]) -> Self {
        Self { p: [y[0], y[1], y[2]], v: [y[3], y[4], y[5]] }
    }
    /// Unit vector tangent to the surface and orthogonal to v, positively
    /// oriented with respect to the outward normal.
    pub fn v_perp(&self, metric: &RevolutionMetric) -> Vec3 {
        let n = metric.unit_normal(&self.p);
        cross3(&n, &self.v)
    }
    /// Unit tangent at latitude/longitude `(phi, lon)` making angle `psi`
    /// with the eastward direction (towards north for ψ = π/2).
    pub fn at(metric: &RevolutionMetric, phi: f64, lon: f64, psi: f64) -> Self {
        let p = metric.point(phi, lon);
        let east = [-lon.sin(), lon.cos(), 0.0];
        let north_raw = [-phi.sin() * lon.cos(), -phi.sin() * lon.sin(), metric.c * phi.cos()];
        let nn = norm3(&north_raw);
        let north = north_raw.map(|x| x / nn);
        let v = [0, 1, 2].map(|k| psi.cos() * east[k] + psi.sin() * north[k]);
        let mut out = Self { p, v };
        metric.project(&mut out.p, &mut out.v);
        out
    }
}

/// Clairaut integral x·v_y − y·v_x.
pub fn clairaut(state: &UnitTangent) -> f64 {
    state.p[0] * state.v[1] - state.p[1] * state.v[0]
}

/// Right-hand side of the geodesic flow on the unit tangent bundle.
pub fn geodesic_rhs(metric: &RevolutionMetric, state: &UnitTangent) -> (Vec3, Vec3) {
    (state.v, metric.geodesic_accel(&state.p, &state.v))
}

/// Geodesic flow, optionally carrying the projectivised Jacobi angle θ with
/// θ' = cos²θ + K sin²θ and/or a raw Jacobi pair (b, b').
#[derive(Debug, Clone, Copy)]
pub struct GeodesicSystem {
    pub metric: RevolutionMetric,
    pub with_angle: bool,
    pub with_jacobi: bool,
}

impl GeodesicSystem {
    pub fn new(metric: RevolutionMetric) -> Self {
        Self { metric, with_angle: false, with_jacobi: false }
    }
    pub fn with_angle(mut self) -> Self {
        self.with_angle = true;
        self
    }
    pub fn with_jacobi(mut self) -> Self {
        self.with_jacobi = true;
        self
    }
    pub fn angle_index(&self) -> Option<usize> {
        self.with_angle.then_some(6)
    }
    pub fn jacobi_index(&self) -> Option<usize> {
        self.with_jacobi.then_some(if self.with_angle { 7 } else { 6 })
    }
}

impl OdeSystem for GeodesicSystem {
    fn dim(&self) -> usize {
        6 + self.with_angle as usize + 2 * self.with_jacobi as usize
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let p = [y[0], y[1], y[2]];
        let v = [y[3], y[4], y[5]];
        let a = self.metric.geodesic_accel(&p, &v);
        dy[..3].copy_from_slice(&v);
        dy[3..6].copy_from_slice(&a);
        let k = self.metric.curvature_unchecked(&p);
        if let Some(i) = self.angle_index() {
            let th = y[i];
            dy[i] = frame_rate(k, th);
        }
        if let Some(i) = self.jacobi_index() {
            dy[i] = y[i + 1];
            dy[i + 1] = -k * y[i];
        }
    }
    fn project(&self, y: &mut [f64]) -> bool {
        let mut p = [y[0], y[1], y[2]];
        let mut v = [y[3], y[4], y[5]];
        let ok = self.metric.project(&mut p, &mut v);
        y[..3].copy_from_slice(&p);
        y[3..6].copy_from_slice(&v);
        ok
    }
}

/// Rotation rate of the Jacobi angle θ = atan2(b, b').
pub fn frame_rate(k: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    c * c + k * s * s
}

/// Curvature-coupled Jacobi equation b'' = −K(t) b.
struct JacobiSystem<F> {
    k: F,
}

impl<F: Fn(f64) -> f64 + Sync> OdeSystem for JacobiSystem<F> {
    fn dim(&self) -> usize {
        2
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -(self.k)(t) * y[0];
    }
}

/// Evolves (b, b') under b'' = −K(t) b from t = 0 to t = T.
pub fn jacobi_evolve<F: Fn(f64) -> f64 + Sync>(k: F, b0: (f64, f64), t: f64, opts: IntegratorOptions) -> Result<(f64, f64)> {
    let tr = integrate(&JacobiSystem { k }, 0.0, &[b0.0, b0.1], t, opts)?;
    let y = tr.last_state();
    Ok((y[0], y[1]))
}

/// Geodesic trajectory of the given system from `state`.
pub fn geodesic(sys: &GeodesicSystem, state: &UnitTangent, extra: &[f64], t: f64, opts: IntegratorOptions) -> Result<Trajectory> {
    let mut y0 = state.to_vec();
    y0.extend_from_slice(extra);
    assert_eq!(y0.len(), sys.dim());
    integrate(sys, 0.0, &y0, t, opts)
}

/// First two positive zeros of the Jacobi field with b(0) = 0, b'(0) = 1
/// along the geodesic through `state`: the first and second conjugate times.
pub fn conjugate_times(metric: &RevolutionMetric, state: &UnitTangent, opts: IntegratorOptions) -> Result<(f64, f64, Trajectory)> {
    use crate::flow_engine::{detect_crossings, EventOptions, Section};
    struct BZero;
    impl Section for BZero {
        fn id(&self) -> &str {
            "jacobi_zero"
        }
        fn value(&self, y: &[f64]) -> f64 {
            y[6]
        }
    }
    let sys = GeodesicSystem::new(*metric).with_jacobi();
    let cap = 2.5 * TAU / metric.k_min.sqrt();
    let tr = geodesic(&sys, state, &[0.0, 1.0], cap, opts.max_step(0.05))?;
    let rep = detect_crossings(&tr, &BZero, EventOptions::default());
    let zeros: Vec<f64> = rep.events.iter().map(|e| e.time).filter(|&t| t > 1e-6).collect();
    if zeros.len() < 2 {
        return Err(Error::NoReturn { cap });
    }
    Ok((zeros[0], zeros[1], tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Curvature from finite differences of the first and second fundamental
    /// forms of the latitude–longitude parametrisation.
    fn fd_curvature(m: &RevolutionMetric, phi: f64, lon: f64) -> f64 {
        let h = 1e-4;
        let r = |a: f64, b: f64| m.point(a, b);
        let sub = |a: Vec3, b: Vec3| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        let scale = |a: Vec3, s: f64| a.map(|x| x * s);
        let ru = scale(sub(r(phi + h, lon), r(phi - h, lon)), 0.5 / h);
        let rv = scale(sub(r(phi, lon + h), r(phi, lon - h)), 0.5 / h);
        let r0 = r(phi, lon);
        let add = |a: Vec3, b: Vec3| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let ruu = scale(sub(add(r(phi + h, lon), r(phi - h, lon)), scale(r0, 2.0)), 1.0 / (h * h));
        let rvv = scale(sub(add(r(phi, lon + h), r(phi, lon - h)), scale(r0, 2.0)), 1.0 / (h * h));
        let ruv = scale(
            sub(add(r(phi + h, lon + h), r(phi - h, lon - h)), add(r(phi + h, lon - h), r(phi - h, lon + h))),
            0.25 / (h * h),
        );
        let n = cross3(&ru, &rv);
        let nn = norm3(&n);
        let n = n.map(|x| x / nn);
        let (e, f, g) = (dot3(&ru, &ru), dot3(&ru, &rv), dot3(&rv, &rv));
        let (l, mm, nn2) = (dot3(&ruu, &n), dot3(&ruv, &n), dot3(&rvv, &n));
        (l * nn2 - mm * mm) / (e * g - f * f)
    }

    #[test]
    fn round_sphere_curvature_is_one() {
        let m = RevolutionMetric::round();
        for &(a, b) in &[(0.1, 0.2), (1.2, -2.0), (-0.7, 3.0)] {
            assert!((m.curvature(&m.point(a, b)).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pole_and_equator_curvature() {
        let m = RevolutionMetric::new(0.9).unwrap();
        assert!((m.curvature(&[0.0, 0.0, 0.9]).unwrap() - 0.81).abs() < 1e-12);
        assert!((m.curvature(&[1.0, 0.0, 0.0]).unwrap() - 1.0 / 0.81).abs() < 1e-12);
        // finite-difference second fundamental form as an independent check
        assert!((fd_curvature(&m, 1.3, 0.4) - m.curvature(&m.point(1.3, 0.4)).unwrap()).abs() < 1e-5);
        assert!((fd_curvature(&m, 0.0, 0.0) - 1.0 / 0.81).abs() < 1e-5);
    }

    #[test]
    fn off_surface_point_is_rejected() {
        let m = RevolutionMetric::new(0.9).unwrap();
        assert!(matches!(m.curvature(&[1.1, 0.0, 0.0]), Err(Error::OffSurface { .. })));
    }

    #[test]
    fn pinching_matches_fourth_power() {
        assert!((RevolutionMetric::round().pinching().delta - 1.0).abs() < 1e-12);
        let p = RevolutionMetric::new(0.95).unwrap().pinching();
        assert!((p.delta - 0.95f64.powi(4)).abs() < 1e-9);
        assert!((p.k_min - 0.9025).abs() < 1e-6 && (p.k_max - 1.0 / 0.9025).abs() < 1e-6);
        let q = RevolutionMetric::new(0.922).unwrap().pinching();
        assert!((q.delta - 0.922f64.powi(4)).abs() < 1e-9);
        assert!(q.delta > 0.7225);
    }

    #[test]
    fn pinching_increases_towards_round() {
        let d: Vec<f64> = [0.9, 0.95, 1.0].iter().map(|&c| RevolutionMetric::new(c).unwrap().pinching().delta).collect();
        assert!(d[0] < d[1] && d[1] < d[2] && (d[2] - 1.0).abs() < 1e-12);
        let prolate = RevolutionMetric::new(1.1).unwrap().pinching();
        assert!((prolate.delta - 1.1f64.powi(-4)).abs() < 1e-9);
    }

    #[test]
    fn great_circle_reaches_antipode() {
        let m = RevolutionMetric::round();
        let s = UnitTangent { p: [1.0, 0.0, 0.0], v: [0.0, 1.0, 0.0] };
        let tr = geodesic(&GeodesicSystem::new(m), &s, &[], PI, IntegratorOptions::default()).unwrap();
        let y = tr.last_state();
        assert!((y[0] + 1.0).abs() < 1e-8 && y[1].abs() < 1e-8 && y[2].abs() < 1e-8);
    }

    #[test]
    fn equator_is_a_closed_geodesic() {
        let m = RevolutionMetric::new(0.9).unwrap();
        let s = m.equator_state(0.0);
        let tr = geodesic(&GeodesicSystem::new(m), &s, &[], m.equator_length(), IntegratorOptions::default()).unwrap();
        let mut worst: f64 = 0.0;
        for (_, y) in tr.sample_uniform(200) {
            worst = worst.max(y[2].abs());
        }
        let y = tr.last_state();
        assert!(worst < 1e-10);
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8);
    }

    #[test]
    fn invariants_hold_over_long_runs() {
        let m = RevolutionMetric::new(0.9).unwrap();
        let s = UnitTangent::at(&m, 0.3, 0.5, 0.7);
        let c0 = clairaut(&s);
        let tr = geodesic(&GeodesicSystem::new(m), &s, &[], 100.0, IntegratorOptions::default()).unwrap();
        for i in 0..tr.len() {
            let st = UnitTangent::from_slice(tr.state(i));
            assert!(m.constraint(&st.p).abs() < 1e-10);
            assert!(dot3(&st.v, &m.constraint_grad(&st.p)).abs() < 1e-9);
            assert!((dot3(&st.v, &st.v) - 1.0).abs() < 1e-9);
            assert!((clairaut(&st) - c0).abs() < 1e-8);
        }
    }

    #[test]
    fn clairaut_special_cases() {
        let m = RevolutionMetric::round();
        assert!((clairaut(&m.equator_state(0.3)) - 1.0).abs() < 1e-15);
        let meridian = UnitTangent::at(&m, 0.2, 1.0, FRAC_PI_2);
        assert!(clairaut(&meridian).abs() < 1e-15);
    }

    #[test]
    fn round_sphere_norm_drift() {
        let m = RevolutionMetric::round();
        let s = UnitTangent::at(&m, -0.4, 2.0, 1.1);
        let tr = geodesic(&GeodesicSystem::new(m), &s, &[], 100.0, IntegratorOptions::default()).unwrap();
        for (_, y) in tr.sample_uniform(500) {
            let n = (y[3] * y[3] + y[4] * y[4] + y[5] * y[5]).sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn jacobi_closed_forms() {
        let o = IntegratorOptions::default();
        let (b, bp) = jacobi_evolve(|_| 1.0, (0.0, 1.0), FRAC_PI_2, o).unwrap();
        assert!((b - 1.0).abs() < 1e-9 && bp.abs() < 1e-9);
        for &t in &[0.5, 3.0, 7.7] {
            let (b, bp) = jacobi_evolve(|_| 4.0, (0.0, 1.0), t, o).unwrap();
            assert!((b - (2.0 * t).sin() / 2.0).abs() < 1e-8 && (bp - (2.0 * t).cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn wronskian_is_constant_along_ellipsoid_geodesic() {
        let m = RevolutionMetric::new(0.9).unwrap();
        let s = UnitTangent::at(&m, 0.2, 0.0, 0.9);
        let sys = GeodesicSystem::new(m).with_jacobi();
        let a = geodesic(&sys, &s, &[0.0, 1.0], 30.0, IntegratorOptions::default()).unwrap();
        let b = geodesic(&sys, &s, &[1.0, 0.0], 30.0, IntegratorOptions::default()).unwrap();
        for i in 0..=60 {
            let t = 0.5 * i as f64;
            let (ya, yb) = (a.eval(t), b.eval(t));
            let w = ya[6] * yb[7] - ya[7] * yb[6];
            assert!((w + 1.0).abs() < 1e-7, "t={t} w={w}");
        }
    }

    #[test]
    fn equator_conjugate_points() {
        let m = RevolutionMetric::new(0.95).unwrap();
        let (t1, t2, _) = conjugate_times(&m, &m.equator_state(0.0), IntegratorOptions::default()).unwrap();
        assert!((t1 - PI * 0.95).abs() < 1e-8 && (t2 - TAU * 0.95).abs() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn curvature_is_positive_and_bounded(c in 0.85f64..1.18, phi in -1.57f64..1.57, lon in 0.0f64..6.2) {
            let m = RevolutionMetric::new(c).unwrap();
            let k = m.curvature(&m.point(phi, lon)).unwrap();
            prop_assert!(k > 0.0);
            prop_assert!(k >= m.k_min * (1.0 - 1e-12) && k <= m.k_max * (1.0 + 1e-12));
        }

        #[test]
        fn frame_rate_within_curvature_bounds(k in 0.1f64..3.0, th in -10.0f64..10.0) {
            let r = frame_rate(k, th);
            prop_assert!(r >= k.min(1.0) - 1e-12 && r <= k.max(1.0) + 1e-12);
        }
    }
}
