//! Gauss linking numbers of closed polygons, in ℝ³ and (after stereographic
//! projection) in S³.

use crate::error::{Error, Result};
use crate::flow_engine::{halton_points, par_map};
use crate::geometry2d::{cross3, dot3, norm3, Vec3};
use crate::lift_s3::Quat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussLink {
    pub value: i64,
    pub raw: f64,
    /// |raw − value|.
    pub gap: f64,
    pub pole: [f64; 4],
    /// Smallest vertex distance between the two loops.
    pub min_distance: f64,
}

fn sub3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn unit_or_zero(a: Vec3) -> Option<Vec3> {
    let n = norm3(&a);
    (n > 1e-300).then(|| a.map(|x| x / n))
}

/// Signed solid angle contribution of segments p1→p2 and p3→p4.
fn segment_pair(p1: &Vec3, p2: &Vec3, p3: &Vec3, p4: &Vec3) -> f64 {
    let r13 = sub3(p3, p1);
    let r14 = sub3(p4, p1);
    let r23 = sub3(p3, p2);
    let r24 = sub3(p4, p2);
    let ns = [cross3(&r13, &r14), cross3(&r14, &r24), cross3(&r24, &r23), cross3(&r23, &r13)];
    let mut n = [[0.0; 3]; 4];
    for k in 0..4 {
        match unit_or_zero(ns[k]) {
            Some(u) => n[k] = u,
            None => return 0.0,
        }
    }
    let asin = |x: f64| x.clamp(-1.0, 1.0).asin();
    let omega = asin(dot3(&n[0], &n[1])) + asin(dot3(&n[1], &n[2])) + asin(dot3(&n[2], &n[3])) + asin(dot3(&n[3], &n[0]));
    let r34 = sub3(p4, p3);
    let r12 = sub3(p2, p1);
    let s = dot3(&cross3(&r34, &r12), &r13);
    if s > 0.0 {
        omega
    } else if s < 0.0 {
        -omega
    } else {
        0.0
    }
}

/// Gauss linking integral of two closed polygons (vertex lists, closing
/// edge implied), summed in a fixed order.
pub fn linking_polygons_r3(a: &[Vec3], b: &[Vec3]) -> f64 {
    let rows: Vec<usize> = (0..a.len()).collect();
    let per_row = par_map(&rows, |&i| {
        let (p1, p2) = (&a[i], &a[(i + 1) % a.len()]);
        (0..b.len()).map(|j| segment_pair(p1, p2, &b[j], &b[(j + 1) % b.len()])).sum::<f64>()
    });
    per_row.iter().sum::<f64>() / (4.0 * std::f64::consts::PI)
}

/// Orthonormal basis of the complement of `pole`, oriented so that the
/// projection carries the orientation of S³ (as the boundary of the ball,
/// coordinates (x, y, u, v)) to the standard one of ℝ³.
fn complement_basis(pole: &[f64; 4]) -> [[f64; 4]; 3] {
    let mut basis: Vec<[f64; 4]> = Vec::with_capacity(3);
    for e in 0..4 {
        let mut v = [0.0; 4];
        v[e] = 1.0;
        let mut w = v;
        for b in std::iter::once(pole).chain(basis.iter()) {
            let d: f64 = (0..4).map(|k| w[k] * b[k]).sum();
            for k in 0..4 {
                w[k] -= d * b[k];
            }
        }
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.3 {
            basis.push(w.map(|x| x / n));
        }
        if basis.len() == 3 {
            break;
        }
    }
    let mut b = [basis[0], basis[1], basis[2]];
    let m = nalgebra::Matrix4::from_fn(|r, c| if r == 0 { pole[c] } else { b[r - 1][c] });
    if m.determinant() > 0.0 {
        b[2] = b[2].map(|x| -x);
    }
    b
}

/// Stereographic projection from `pole` in the given complement basis.
pub fn stereographic(pole: &[f64; 4], basis: &[[f64; 4]; 3], q: &Quat) -> Vec3 {
    let d: f64 = (0..4).map(|k| q.0[k] * pole[k]).sum();
    let s = 1.0 / (1.0 - d);
    [0, 1, 2].map(|r| s * (0..4).map(|k| basis[r][k] * q.0[k]).sum::<f64>())
}

fn min_dist_to(pole: &[f64; 4], pts: &[Quat]) -> f64 {
    pts.iter().map(|q| Quat(*pole).sub(q).norm()).fold(f64::INFINITY, f64::min)
}

/// Gauss linking number of two closed loops on S³.
///
/// Each loop is a vertex list whose last point repeats the first (within
/// 1e−6). The pole is chosen among 64 quasi-random candidates as far as
/// possible from both loops.
pub fn linking_gauss(a: &[Quat], b: &[Quat]) -> Result<GaussLink> {
    for (name, l) in [("first", a), ("second", b)] {
        if l.len() < 4 {
            return Err(Error::DegeneratePath(format!("{name} loop has fewer than 4 vertices")));
        }
        let gap = l[0].sub(l.last().unwrap()).norm();
        if gap > 1e-6 {
            return Err(Error::Precondition(format!("{name} loop is not closed (gap {gap:e})")));
        }
    }
    let (a, b) = (&a[..a.len() - 1], &b[..b.len() - 1]);
    let min_distance = par_map(a, |p| b.iter().map(|q| p.sub(q).norm()).fold(f64::INFINITY, f64::min))
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if min_distance < 1e-3 {
        return Err(Error::LoopsTooClose(min_distance));
    }
    let candidates = halton_points(64, 3);
    let pole = candidates
        .iter()
        .map(|u| {
            let (s, c) = u[0].sqrt().asin().sin_cos();
            let (t1, t2) = (std::f64::consts::TAU * u[1], std::f64::consts::TAU * u[2]);
            [c * t1.cos(), c * t1.sin(), s * t2.cos(), s * t2.sin()]
        })
        .max_by(|p, q| {
            let f = |x: &[f64; 4]| min_dist_to(x, a).min(min_dist_to(x, b));
            f(p).total_cmp(&f(q))
        })
        .unwrap();
    let basis = complement_basis(&pole);
    let pa: Vec<Vec3> = a.iter().map(|q| stereographic(&pole, &basis, q)).collect();
    let pb: Vec<Vec3> = b.iter().map(|q| stereographic(&pole, &basis, q)).collect();
    let raw = linking_polygons_r3(&pa, &pb);
    let value = raw.round() as i64;
    Ok(GaussLink { value, raw, gap: (raw - value as f64).abs(), pole, min_distance })
}

/// Reverses a closed loop (keeping the repeated endpoint).
pub fn reversed(l: &[Quat]) -> Vec<Quat> {
    l.iter().rev().copied().collect()
}
