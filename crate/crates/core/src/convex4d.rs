//! Star-shaped convex bodies in ℝ⁴, the Hamiltonian flow of H = ν² on their
//! boundary, and the angle of the linearized flow in the global frame
//! X₀ = ∇H/|∇H|, X₁ = J₂X₀, X₂ = J₁X₀, X₃ = −J₀X₀.
//!
//! States are ordered (q₁, p₁, q₂, p₂). The matrices J₀, J₁, J₂ are written
//! in the (q₁, q₂, p₁, p₂) basis and conjugated by a fixed permutation.

use crate::error::{Error, Result};
use crate::flow_engine::{halton_points, integrate, par_map, IntegratorOptions, OdeSystem, Trajectory};
use crate::lift_s3::Quat;
use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Matrix2, Matrix4, SVector, SymmetricEigen, Vector4};
use num_dual::DualNum;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub type V4 = [f64; 4];

/// State index → basis index in (q₁, q₂, p₁, p₂).
const PERM: [usize; 4] = [0, 2, 1, 3];

const J0_QP: [[i8; 4]; 4] = [[0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]];
const J1_QP: [[i8; 4]; 4] = [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]];
const J2_QP: [[i8; 4]; 4] = [[0, 0, 0, -1], [0, 0, 1, 0], [0, -1, 0, 0], [1, 0, 0, 0]];

/// Jₖ in the (q₁, q₂, p₁, p₂) basis, as an exact integer matrix.
pub fn j_matrix_qp_basis(k: usize) -> [[i8; 4]; 4] {
    [J0_QP, J1_QP, J2_QP][k]
}

/// Permutation P with (basis coordinates) = P · (state coordinates).
pub fn permutation() -> Matrix4<f64> {
    let mut p = Matrix4::zeros();
    for (s, &b) in PERM.iter().enumerate() {
        p[(b, s)] = 1.0;
    }
    p
}

/// Jₖ acting on states.
pub fn j_matrix(k: usize) -> Matrix4<f64> {
    let j = Matrix4::from_fn(|r, c| j_matrix_qp_basis(k)[r][c] as f64);
    let p = permutation();
    p.transpose() * j * p
}

/// ω₀ = dλ₀ = Σ dpᵢ ∧ dqᵢ, so that i_{X_H}ω₀ = −dH with X_H = −J₀∇H.
pub fn omega0(u: &V4, v: &V4) -> f64 {
    u[1] * v[0] - u[0] * v[1] + u[3] * v[2] - u[2] * v[3]
}

/// λ₀ = ½ Σ (pᵢ dqᵢ − qᵢ dpᵢ) at `z` on `v`.
pub fn liouville(z: &V4, v: &V4) -> f64 {
    0.5 * (z[1] * v[0] - z[0] * v[1] + z[3] * v[2] - z[2] * v[3])
}

fn v4(a: &Vector4<f64>) -> V4 {
    [a[0], a[1], a[2], a[3]]
}

fn dot4(a: &V4, b: &V4) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Convex body given by its gauge; the Hamiltonian is H = ν².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexBody {
    /// ν² = (q₁² + p₁²)/a₁ + (q₂² + p₂²)/a₂.
    Ellipsoid { a: [f64; 2] },
    /// ν(x) = |x| / r(x/|x|) with r(n) = 1 + Σ cₖ nₖ⁴ in state coordinates.
    PerturbedBall { coeffs: [f64; 4] },
}

impl ConvexBody {
    pub fn ball() -> Self {
        ConvexBody::Ellipsoid { a: [1.0, 1.0] }
    }

    pub fn ellipsoid(a1: f64, a2: f64) -> Result<Self> {
        let b = ConvexBody::Ellipsoid { a: [a1, a2] };
        b.validate()?;
        Ok(b)
    }

    pub fn perturbed_ball(coeffs: [f64; 4]) -> Result<Self> {
        let b = ConvexBody::PerturbedBall { coeffs };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexBody::Ellipsoid { a } => {
                if !a.iter().all(|x| x.is_finite() && *x > 0.0) {
                    return Err(Error::Config(format!("ellipsoid parameters must be positive, got {a:?}")));
                }
            }
            ConvexBody::PerturbedBall { coeffs } => {
                if !coeffs.iter().all(|x| x.is_finite()) || coeffs.iter().map(|c| c.abs()).sum::<f64>() >= 1.0 {
                    return Err(Error::Config(format!("radial function must stay positive, got {coeffs:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, ConvexBody::Ellipsoid { .. })
    }

    fn h_generic<T: DualNum<f64>>(&self, x: &[T; 4]) -> T {
        match self {
            ConvexBody::Ellipsoid { a } => {
                (x[0].clone() * x[0].clone() + x[1].clone() * x[1].clone()) / a[0]
                    + (x[2].clone() * x[2].clone() + x[3].clone() * x[3].clone()) / a[1]
            }
            ConvexBody::PerturbedBall { coeffs } => {
                let s: T = x.iter().map(|v| v.clone() * v.clone()).sum();
                let quartic: T = x.iter().zip(coeffs).map(|(v, c)| v.powi(4) * *c).sum();
                let r = T::one() + quartic / (s.clone() * s.clone());
                s / (r.clone() * r)
            }
        }
    }

    /// H = ν².
    pub fn hamiltonian(&self, x: &V4) -> f64 {
        self.h_generic(x)
    }

    pub fn gauge(&self, x: &V4) -> f64 {
        self.hamiltonian(x).sqrt()
    }

    pub fn grad_h(&self, x: &V4) -> V4 {
        match self {
            ConvexBody::Ellipsoid { a } => [2.0 * x[0] / a[0], 2.0 * x[1] / a[0], 2.0 * x[2] / a[1], 2.0 * x[3] / a[1]],
            ConvexBody::PerturbedBall { .. } => {
                let (_, g, _) = self.hessian_dual(x);
                v4(&g)
            }
        }
    }

    pub fn hess_h(&self, x: &V4) -> Matrix4<f64> {
        match self {
            ConvexBody::Ellipsoid { a } => {
                Matrix4::from_diagonal(&Vector4::new(2.0 / a[0], 2.0 / a[0], 2.0 / a[1], 2.0 / a[1]))
            }
            ConvexBody::PerturbedBall { .. } => self.hessian_dual(x).2,
        }
    }

    fn hessian_dual(&self, x: &V4) -> (f64, Vector4<f64>, Matrix4<f64>) {
        let body = *self;
        num_dual::hessian(
            |v: SVector<num_dual::Dual2SVec64<4>, 4>| body.h_generic(&[v[0], v[1], v[2], v[3]]),
            SVector::from(*x),
        )
    }

    /// Smallest eigenvalue of D²H at `x`.
    pub fn min_hessian_eigenvalue(&self, x: &V4) -> f64 {
        SymmetricEigen::new(self.hess_h(x)).eigenvalues.min()
    }

    /// Radial projection onto ∂C.
    pub fn boundary_point(&self, dir: &V4) -> V4 {
        let n = self.gauge(dir);
        dir.map(|a| a / n)
    }

    /// Infimum over directions of the smallest eigenvalue of D²H.
    ///
    /// Quadratic bodies are exact. Otherwise `budget` Halton directions are
    /// scanned and the ten best refined by Nelder–Mead.
    pub fn kmin(&self, budget: usize) -> Result<KMin> {
        let km = match self {
            ConvexBody::Ellipsoid { a } => {
                let value = 2.0 / a[0].max(a[1]);
                let minimizer = if a[0] >= a[1] { [1.0, 0.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0, 0.0] };
                KMin { value, error_bound: 0.0, minimizer, samples: 0, exact: true }
            }
            ConvexBody::PerturbedBall { .. } => self.kmin_sampled(budget.max(16)),
        };
        if !(km.value - km.error_bound > 0.0) {
            return Err(Error::NotStrictlyConvex(km.value));
        }
        Ok(km)
    }

    fn kmin_sampled(&self, budget: usize) -> KMin {
        let pts = halton_points(budget, 3);
        let params: Vec<[f64; 3]> = pts.iter().map(|u| [u[0].sqrt().asin(), TAU * u[1], TAU * u[2]]).collect();
        let vals = par_map(&params, |p| self.min_hessian_eigenvalue(&hopf_direction(p)));
        let mut order: Vec<usize> = (0..params.len()).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let sampled_best = vals[order[0]];
        let starts: Vec<[f64; 3]> = order.iter().take(10).map(|&i| params[i]).collect();
        let refined = par_map(&starts, |p| refine(self, p));
        let (best_p, best_v) = refined
            .into_iter()
            .chain(std::iter::once((params[order[0]], sampled_best)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        // Second-order error model at an interior minimum: ½ L₂ r², with r the
        // covering radius of the sample and L₂ a finite-difference curvature.
        let r = (2.0 * std::f64::consts::PI.powi(2) / budget as f64).cbrt();
        let h = 1e-3;
        let mut l2: f64 = 0.0;
        for k in 0..3 {
            let mut a = best_p;
            let mut b = best_p;
            a[k] += h;
            b[k] -= h;
            let f = |p: &[f64; 3]| self.min_hessian_eigenvalue(&hopf_direction(p));
            l2 = l2.max(((f(&a) - 2.0 * best_v + f(&b)) / (h * h)).abs());
        }
        KMin {
            value: best_v,
            error_bound: 0.5 * l2 * r * r,
            minimizer: hopf_direction(&best_p),
            samples: budget,
            exact: false,
        }
    }

    /// Radial image on S³, in the complex coordinates z = q₁ − ip₁, w = q₂ − ip₂.
    pub fn to_s3(&self, z: &V4) -> Quat {
        let q = Quat([z[0], -z[1], z[2], -z[3]]);
        q.normalized()
    }

    /// Inverse of [`ConvexBody::to_s3`].
    pub fn from_s3(&self, q: &Quat) -> V4 {
        self.boundary_point(&[q.0[0], -q.0[1], q.0[2], -q.0[3]])
    }
}

/// Unit direction in Hopf coordinates (η, ξ₁, ξ₂).
fn hopf_direction(p: &[f64; 3]) -> V4 {
    let (s, c) = p[0].sin_cos();
    [c * p[1].cos(), c * p[1].sin(), s * p[2].cos(), s * p[2].sin()]
}

struct MinEig<'a>(&'a ConvexBody);

impl CostFunction for MinEig<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.0.min_hessian_eigenvalue(&hopf_direction(&[p[0], p[1], p[2]])))
    }
}

fn refine(body: &ConvexBody, p: &[f64; 3]) -> ([f64; 3], f64) {
    let d = 0.02;
    let simplex = vec![
        p.to_vec(),
        vec![p[0] + d, p[1], p[2]],
        vec![p[0], p[1] + d, p[2]],
        vec![p[0], p[1], p[2] + d],
    ];
    let fallback = (*p, body.min_hessian_eigenvalue(&hopf_direction(p)));
    let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-14) else {
        return fallback;
    };
    match Executor::new(MinEig(body), solver).configure(|s| s.max_iters(400)).run() {
        Ok(res) => {
            let st = res.state();
            match (&st.best_param, st.best_cost) {
                (Some(bp), c) if c.is_finite() && c <= fallback.1 => ([bp[0], bp[1], bp[2]], c),
                _ => fallback,
            }
        }
        Err(_) => fallback,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMin {
    pub value: f64,
    pub error_bound: f64,
    pub minimizer: V4,
    pub samples: usize,
    pub exact: bool,
}

/// X_H = −J₀∇H without the boundary check.
pub fn x_h(body: &ConvexBody, z: &V4) -> V4 {
    let g = Vector4::from(body.grad_h(z));
    v4(&(-(j_matrix(0) * g)))
}

/// Hamiltonian vector field at a point of ∂C.
pub fn hamiltonian_rhs(body: &ConvexBody, z: &V4, tol: f64) -> Result<V4> {
    let r = (body.gauge(z) - 1.0).abs();
    if !(r < tol) {
        return Err(Error::OffSurface { residual: r });
    }
    Ok(x_h(body, z))
}

/// Frame X₀, X₁, X₂, X₃ at `z`.
pub fn frames(body: &ConvexBody, z: &V4) -> [V4; 4] {
    let g = Vector4::from(body.grad_h(z));
    let x0 = g / g.norm();
    [v4(&x0), v4(&(j_matrix(2) * x0)), v4(&(j_matrix(1) * x0)), v4(&(-(j_matrix(0) * x0)))]
}

/// The symmetric 2×2 matrix M whose quadratic form gives the angle rate.
pub fn rate_matrix(body: &ConvexBody, z: &V4) -> Matrix2<f64> {
    let x = frames(body, z);
    let h = body.hess_h(z);
    let q = |a: &V4, b: &V4| (Vector4::from(*a).transpose() * h * Vector4::from(*b))[0];
    let m33 = q(&x[3], &x[3]);
    let m12 = q(&x[1], &x[2]);
    Matrix2::new(q(&x[1], &x[1]) + m33, m12, m12, q(&x[2], &x[2]) + m33)
}

/// dΘ/dt = ⟨α, Mα⟩/|α|² for α in the frame {X₁, X₂}.
pub fn linearized_angle_rate(body: &ConvexBody, z: &V4, alpha: [f64; 2]) -> f64 {
    let m = rate_matrix(body, z);
    let a = nalgebra::Vector2::from(alpha);
    (a.transpose() * m * a)[0] / a.norm_squared()
}

/// Coordinates of `v` along X₁ and X₂.
pub fn alpha_of(body: &ConvexBody, z: &V4, v: &V4) -> [f64; 2] {
    let x = frames(body, z);
    [dot4(v, &x[1]), dot4(v, &x[2])]
}

/// Hamiltonian flow on ∂C, optionally with the linearized flow and the
/// frame angle. Layout: z (4), then v (4) and θ (1) when linearized.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianSystem {
    pub body: ConvexBody,
    pub linearized: bool,
}

impl HamiltonianSystem {
    pub fn new(body: ConvexBody) -> Self {
        Self { body, linearized: false }
    }
    pub fn with_linearization(mut self) -> Self {
        self.linearized = true;
        self
    }
}

impl OdeSystem for HamiltonianSystem {
    fn dim(&self) -> usize {
        if self.linearized {
            9
        } else {
            4
        }
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let z = [y[0], y[1], y[2], y[3]];
        dy[..4].copy_from_slice(&x_h(&self.body, &z));
        if self.linearized {
            let v = Vector4::new(y[4], y[5], y[6], y[7]);
            let dv = -(j_matrix(0) * self.body.hess_h(&z) * v);
            dy[4..8].copy_from_slice(dv.as_slice());
            let th = y[8];
            dy[8] = linearized_angle_rate(&self.body, &z, [th.cos(), th.sin()]);
        }
    }
    fn project(&self, y: &mut [f64]) -> bool {
        let n = self.body.gauge(&[y[0], y[1], y[2], y[3]]);
        if !(n.is_finite() && n > 0.0) {
            return false;
        }
        for a in &mut y[..4] {
            *a /= n;
        }
        true
    }
}

/// Flow of ∂C starting at `z0` (radially projected if slightly off).
pub fn hamiltonian_flow(body: &ConvexBody, z0: &V4, t: f64, opts: IntegratorOptions) -> Result<Trajectory> {
    integrate(&HamiltonianSystem::new(*body), 0.0, &body.boundary_point(z0), t, opts)
}

/// Base flow, linearized flow and frame angle together.
#[derive(Debug, Clone)]
pub struct LinearizedRun {
    pub traj: Trajectory,
}

impl LinearizedRun {
    /// Unwrapped angle at time `t`.
    pub fn theta(&self, t: f64) -> f64 {
        self.traj.eval(t)[8]
    }
    pub fn theta_gain(&self) -> f64 {
        self.traj.last_state()[8] - self.traj.state(0)[8]
    }
    /// Angle recomputed from the transported vector, defined modulo 2π.
    pub fn alpha_angle(&self, body: &ConvexBody, t: f64) -> f64 {
        let y = self.traj.eval(t);
        let a = alpha_of(body, &[y[0], y[1], y[2], y[3]], &[y[4], y[5], y[6], y[7]]);
        a[1].atan2(a[0])
    }
}

pub fn evolve_linearized(body: &ConvexBody, z0: &V4, alpha0: [f64; 2], t: f64, opts: IntegratorOptions) -> Result<LinearizedRun> {
    if alpha0[0] == 0.0 && alpha0[1] == 0.0 {
        return Err(Error::Precondition("zero transverse direction".into()));
    }
    let z = body.boundary_point(z0);
    let x = frames(body, &z);
    let mut y = z.to_vec();
    y.extend((0..4).map(|k| alpha0[0] * x[1][k] + alpha0[1] * x[2][k]));
    y.push(alpha0[1].atan2(alpha0[0]));
    let traj = integrate(&HamiltonianSystem::new(*body).with_linearization(), 0.0, &y, t, opts)?;
    Ok(LinearizedRun { traj })
}

/// Largest eigenvalue of M seen over sampled boundary points.
pub fn max_rate_scan(body: &ConvexBody, n: usize) -> f64 {
    rate_scan(body, n).1
}

/// Smallest and largest eigenvalue of the rate matrix over `n` Halton
/// boundary points.
pub fn rate_scan(body: &ConvexBody, n: usize) -> (f64, f64) {
    let pts = halton_points(n, 3);
    let vals = par_map(&pts, |u| {
        let z = body.boundary_point(&hopf_direction(&[u[0].sqrt().asin(), TAU * u[1], TAU * u[2]]));
        let e = SymmetricEigen::new(rate_matrix(body, &z)).eigenvalues;
        (e.min(), e.max())
    });
    vals.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (lo, hi)| (a.min(lo), b.max(hi)))
}
