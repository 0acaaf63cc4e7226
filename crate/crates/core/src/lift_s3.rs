//! S³ as unit quaternions, the contact form λ₀, the double cover of the unit
//! tangent bundle of an ellipsoid of revolution, and path lifting.

use crate::error::{Error, Result};
use crate::flow_engine::Trajectory;
use crate::geometry2d::{cross3, dot3, frame_rate, norm3, RevolutionMetric, UnitTangent, Vec3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Quaternion x + y i + u j + v k, stored as (x, y, u, v).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat(pub [f64; 4]);

impl Quat {
    pub const ONE: Quat = Quat([1.0, 0.0, 0.0, 0.0]);
    pub const I: Quat = Quat([0.0, 1.0, 0.0, 0.0]);
    pub const J: Quat = Quat([0.0, 0.0, 1.0, 0.0]);
    pub const K: Quat = Quat([0.0, 0.0, 0.0, 1.0]);

    pub fn from_slice(s: &[f64]) -> Self {
        Quat([s[0], s[1], s[2], s[3]])
    }
    /// Pure quaternion with imaginary part `a` in (i, j, k) coordinates.
    pub fn pure(a: &Vec3) -> Self {
        Quat([0.0, a[0], a[1], a[2]])
    }
    /// Quaternion z + w j with z = x + iy and w = u + iv.
    pub fn from_complex(z: Complex64, w: Complex64) -> Self {
        Quat([z.re, z.im, w.re, w.im])
    }
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.0[0], self.0[1])
    }
    pub fn w(&self) -> Complex64 {
        Complex64::new(self.0[2], self.0[3])
    }
    pub fn imag(&self) -> Vec3 {
        [self.0[1], self.0[2], self.0[3]]
    }
    pub fn conj(&self) -> Self {
        let [x, y, u, v] = self.0;
        Quat([x, -y, -u, -v])
    }
    pub fn dot(&self, o: &Quat) -> f64 {
        self.0.iter().zip(&o.0).map(|(a, b)| a * b).sum()
    }
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
    pub fn normalized(&self) -> Self {
        self.scale(1.0 / self.norm())
    }
    pub fn scale(&self, s: f64) -> Self {
        Quat(self.0.map(|a| a * s))
    }
    pub fn add(&self, o: &Quat) -> Self {
        Quat([0, 1, 2, 3].map(|k| self.0[k] + o.0[k]))
    }
    pub fn sub(&self, o: &Quat) -> Self {
        Quat([0, 1, 2, 3].map(|k| self.0[k] - o.0[k]))
    }
    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    pub fn mul(&self, o: &Quat) -> Self {
        let [a0, a1, a2, a3] = self.0;
        let [b0, b1, b2, b3] = o.0;
        Quat([
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ])
    }
    /// Distance to the nearer of `o` and `−o`.
    pub fn sheet_distance(&self, o: &Quat) -> f64 {
        self.sub(o).norm().min(self.add(o).norm())
    }
}

/// λ₀ = ½(x dy − y dx + u dv − v du) evaluated on a tangent vector at `z`.
pub fn lambda0(z: &Quat, zeta: &Quat) -> f64 {
    let [x, y, u, v] = z.0;
    let [dx, dy, du, dv] = zeta.0;
    0.5 * (x * dy - y * dx + u * dv - v * du)
}

/// dλ₀(a, b) = ⟨i·a, b⟩.
pub fn dlambda0(a: &Quat, b: &Quat) -> f64 {
    Quat::I.mul(a).dot(b)
}

/// Reeb field of λ₀: 2iZ. Its flow Z ↦ e^{2it}Z is π-periodic.
pub fn reeb0(z: &Quat) -> Quat {
    Quat::I.mul(z).scale(2.0)
}

/// Global symplectic frame {jZ, kZ} of ker λ₀ with dλ₀(jZ, kZ) = 1.
pub fn contact_frame(z: &Quat) -> (Quat, Quat) {
    (Quat::J.mul(z), Quat::K.mul(z))
}

/// λ₀ ∧ dλ₀ evaluated on three tangent vectors at a point.
pub fn contact_volume(z: &Quat, a: &Quat, b: &Quat, c: &Quat) -> f64 {
    lambda0(z, a) * dlambda0(b, c) + lambda0(z, b) * dlambda0(c, a) + lambda0(z, c) * dlambda0(a, b)
}

/// D₀(Z) = (Z̄ j Z, −Z̄ k Z): point and unit vector of the round sphere,
/// written in (i, j, k) coordinates.
pub fn double_cover_round(z: &Quat) -> UnitTangent {
    let zc = z.conj();
    let p = zc.mul(&Quat::J).mul(z).imag();
    let v = zc.mul(&Quat::K).mul(z).imag().map(|a| -a);
    UnitTangent { p, v }
}

/// Same as [`double_cover_round`] but rejects non-unit input when `strict`.
pub fn double_cover_round_checked(z: &Quat, strict: bool) -> Result<UnitTangent> {
    let n = z.norm();
    if (n - 1.0).abs() > 1e-10 {
        if strict || n == 0.0 {
            return Err(Error::Precondition(format!("|Z| = {n} is not 1")));
        }
        return Ok(double_cover_round(&z.normalized()));
    }
    Ok(double_cover_round(z))
}

/// Rotation matrix with columns R(i), R(j), R(k) → unit quaternion q with
/// q a q̄ = R a for pure a.
fn quat_from_rotation(m: [[f64; 3]; 3]) -> Quat {
    // m[r][c]
    let tr = m[0][0] + m[1][1] + m[2][2];
    let q = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        [0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s]
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        [(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s]
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        [(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s]
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        [(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s]
    };
    Quat(q).normalized()
}

/// One preimage of a round unit tangent under D₀; the other is its negative.
pub fn double_cover_round_inverse(t: &UnitTangent) -> Quat {
    let p = t.p.map(|a| a / norm3(&t.p));
    let mut v = t.v;
    let pv = dot3(&p, &v);
    for k in 0..3 {
        v[k] -= pv * p[k];
    }
    let nv = norm3(&v);
    let v = v.map(|a| a / nv);
    // R(i) = R(j) R(k) = p × (−v)
    let ri = cross3(&p, &v).map(|a| -a);
    let rk = v.map(|a| -a);
    let m = [[ri[0], p[0], rk[0]], [ri[1], p[1], rk[1]], [ri[2], p[2], rk[2]]];
    // Z̄ a Z = R a, so Z̄ is the rotation quaternion
    quat_from_rotation(m).conj()
}

/// (D₀*λ_{g₀})(ζ) − 4λ₀(ζ) by a central finite difference of D₀.
pub fn pullback_factor_round(z: &Quat, zeta: &Quat) -> f64 {
    let h = 1e-6;
    let a = double_cover_round(&z.add(&zeta.scale(h)).normalized());
    let b = double_cover_round(&z.sub(&zeta.scale(h)).normalized());
    let dp = [0, 1, 2].map(|k| (a.p[k] - b.p[k]) / (2.0 * h));
    let t = double_cover_round(z);
    dot3(&t.v, &dp) - 4.0 * lambda0(z, zeta)
}

/// Lift D_g = ℒ_g⁻¹ ∘ Π_g ∘ ℒ_{g₀} ∘ D₀ for an ellipsoid of revolution.
///
/// The round sphere is carried to the ellipsoid by Φ = diag(1, 1, c); the
/// Legendre transforms reduce to solving for the g-unit vector whose metric
/// dual is proportional to the round one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covering {
    pub metric: RevolutionMetric,
}

impl Covering {
    pub fn new(metric: RevolutionMetric) -> Self {
        Self { metric }
    }

    /// Round unit tangent → ellipsoid unit tangent.
    pub fn round_to_metric(&self, t: &UnitTangent) -> UnitTangent {
        let c = self.metric.c;
        let inv2 = [1.0, 1.0, 1.0 / (c * c)];
        let p = t.p;
        let pv: f64 = (0..3).map(|k| p[k] * inv2[k] * t.v[k]).sum();
        let pp: f64 = (0..3).map(|k| p[k] * inv2[k] * p[k]).sum();
        let nu = -pv / pp;
        let w: Vec3 = [0, 1, 2].map(|k| inv2[k] * (t.v[k] + nu * p[k]));
        let phi_w = [w[0], w[1], c * w[2]];
        let s = norm3(&phi_w);
        UnitTangent { p: [p[0], p[1], c * p[2]], v: phi_w.map(|a| a / s) }
    }

    /// Ellipsoid unit tangent → round unit tangent.
    pub fn metric_to_round(&self, t: &UnitTangent) -> UnitTangent {
        let c = self.metric.c;
        let p = [t.p[0], t.p[1], t.p[2] / c];
        let np = norm3(&p);
        let p = p.map(|a| a / np);
        // Φ² w = Φ W
        let u0 = [t.v[0], t.v[1], c * t.v[2]];
        let up = dot3(&u0, &p);
        let u = [0, 1, 2].map(|k| u0[k] - up * p[k]);
        let nu = norm3(&u);
        UnitTangent { p, v: u.map(|a| a / nu) }
    }

    pub fn forward(&self, z: &Quat) -> UnitTangent {
        self.round_to_metric(&double_cover_round(z))
    }

    /// One of the two preimages.
    pub fn inverse(&self, t: &UnitTangent) -> Quat {
        double_cover_round_inverse(&self.metric_to_round(t))
    }
}

/// Continuous lift of a downstairs geodesic trajectory (state layout
/// p, v, ...) to S³.
#[derive(Debug, Clone)]
pub struct LiftedCurve {
    pub covering: Covering,
    pub base: Trajectory,
    lifts: Vec<Quat>,
}

/// Sheets are 2 apart; consecutive lifts farther than this are ambiguous.
const JUMP_LIMIT: f64 = 0.75;

impl LiftedCurve {
    pub fn times(&self) -> &[f64] {
        self.base.times()
    }
    pub fn sample(&self, i: usize) -> Quat {
        self.lifts[i]
    }
    pub fn samples(&self) -> &[Quat] {
        &self.lifts
    }
    pub fn start(&self) -> Quat {
        self.lifts[0]
    }
    pub fn end(&self) -> Quat {
        *self.lifts.last().unwrap()
    }

    /// Lift at an arbitrary time, on the sheet of the nearest stored sample.
    pub fn eval(&self, t: f64) -> Quat {
        let ts = self.base.times();
        let dir = self.base.direction();
        let i = ts.partition_point(|&s| dir * (s - t) <= 0.0).saturating_sub(1).min(ts.len() - 1);
        let j = (i + 1).min(ts.len() - 1);
        let near = if (t - ts[i]).abs() <= (ts[j] - t).abs() { self.lifts[i] } else { self.lifts[j] };
        let y = self.base.eval(t);
        let z = self.covering.inverse(&UnitTangent::from_slice(&y));
        if z.dot(&near) < 0.0 {
            z.neg()
        } else {
            z
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "x", "y", "u", "v"]).map_err(|e| Error::Io(e.to_string()))?;
        for (t, q) in self.times().iter().zip(&self.lifts) {
            let row = [*t, q.0[0], q.0[1], q.0[2], q.0[3]].map(|a| format!("{a}"));
            wr.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Lifts a downstairs trajectory starting from `z0` (which must project to
/// the trajectory's initial state within 1e−7).
pub fn lift_path(metric: &RevolutionMetric, traj: Trajectory, z0: &Quat) -> Result<LiftedCurve> {
    let cov = Covering::new(*metric);
    let start = UnitTangent::from_slice(traj.state(0));
    let img = cov.forward(z0);
    let gap = (0..3).map(|k| (img.p[k] - start.p[k]).abs().max((img.v[k] - start.v[k]).abs())).fold(0.0, f64::max);
    if gap > 1e-7 {
        return Err(Error::Precondition(format!("initial lift misses the trajectory start by {gap:e}")));
    }
    let mut lifts = Vec::with_capacity(traj.len());
    let mut prev = *z0;
    for i in 0..traj.len() {
        let z = cov.inverse(&UnitTangent::from_slice(traj.state(i)));
        let z = if z.dot(&prev) < 0.0 { z.neg() } else { z };
        let jump = z.sub(&prev).norm();
        if jump > JUMP_LIMIT {
            let h = if i > 0 { (traj.times()[i] - traj.times()[i - 1]).abs() } else { 0.0 };
            return Err(Error::LiftJump { t: traj.times()[i], suggested: 0.5 * h });
        }
        lifts.push(z);
        prev = z;
    }
    Ok(LiftedCurve { covering: cov, base: traj, lifts })
}

/// Rotation rate of the geodesic-frame angle θ at a unit tangent.
pub fn frame_angle_rate(metric: &RevolutionMetric, state: &UnitTangent, theta: f64) -> Result<f64> {
    Ok(frame_rate(metric.curvature(&state.p)?, theta))
}
