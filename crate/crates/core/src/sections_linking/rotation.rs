//! Transverse rotation numbers of periodic orbits, Conley–Zehnder indices and
//! the additivity of rotation numbers across a multi-component binding.

use super::gauss::linking_gauss;
use super::models::{FlowModel, S3Path};
use super::pages::{LinearForm, Page};
use crate::error::{Error, Result};
use crate::flow_engine::{winding_fn, IntegratorOptions};
use crate::lift_s3::Quat;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Framing of the normal bundle of the orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Framing {
    /// The global frame carried by the model (extends over the capping disk).
    Global,
    /// Framing by the page of an open book whose binding contains the orbit.
    Page(Page),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationNumber {
    /// Richardson extrapolation 2ρ₂ₙ − ρₙ.
    pub rho: f64,
    pub rho_n: f64,
    pub rho_2n: f64,
    pub periods: usize,
    /// |φᵀ(z) − z| for the supplied period.
    pub closure_gap: f64,
}

/// Averages the transverse angle over `n` and `2n` periods of the orbit of
/// `z0` with period `period`.
pub fn rotation_number(
    model: &FlowModel,
    z0: &Quat,
    period: f64,
    framing: &Framing,
    theta0: f64,
    n: usize,
    opts: IntegratorOptions,
) -> Result<RotationNumber> {
    if n < 50 {
        return Err(Error::Precondition(format!("need at least 50 periods, got {n}")));
    }
    let path = model.orbit(z0, theta0, 0.0, 2.0 * n as f64 * period, opts)?;
    let closure_gap = path.point(period).sub(&path.point(0.0)).norm();
    if closure_gap > 1e-7 {
        return Err(Error::Precondition(format!("orbit does not close after {period}: gap {closure_gap:e}")));
    }
    let turns = |m: usize| -> Result<f64> { framed_turns(&path, framing, m as f64 * period) };
    let (a, b) = (turns(n)? / n as f64, turns(2 * n)? / (2 * n) as f64);
    if (a - b).abs() > 1e-3 {
        return Err(Error::NonConvergent(format!("ρ over {n} periods = {a}, over {} = {b}", 2 * n)));
    }
    Ok(RotationNumber { rho: 2.0 * b - a, rho_n: a, rho_2n: b, periods: n, closure_gap })
}

fn framed_turns(path: &S3Path, framing: &Framing, t: f64) -> Result<f64> {
    match framing {
        Framing::Global => Ok((path.angle(t) - path.angle(0.0)) / TAU),
        Framing::Page(page) => {
            let g = |s: f64| page.df(&path.point(s), &path.direction(s).unwrap_or(Quat::ONE));
            path.direction(0.0)?;
            winding_fn(g, 0.0, t, (t / 0.05).ceil() as usize)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CzIndex {
    pub value: i64,
    pub degenerate: bool,
    /// The two odd integers adjacent to an integral nρ.
    pub neighbors: Option<(i64, i64)>,
}

/// μ = 2⌊nρ⌋ + 1, flagged when nρ is within `tol` of an integer.
pub fn cz_index(rho: f64, n: u32, tol: f64) -> CzIndex {
    let x = n as f64 * rho;
    let k = x.round();
    if (x - k).abs() < tol {
        let k = k as i64;
        CzIndex { value: 2 * k + 1, degenerate: true, neighbors: Some((2 * k - 1, 2 * k + 1)) }
    } else {
        CzIndex { value: 2 * x.floor() as i64 + 1, degenerate: false, neighbors: None }
    }
}

/// Both sides of ρ^{Σ}(γᵢ) = ρ^{Σᵢ}(γᵢ) + Σ_{j≠i} link(γᵢ, γⱼ) for one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityResidual {
    pub lhs: f64,
    pub rho_single: f64,
    pub links: Vec<i64>,
    pub rhs: f64,
    pub residual: f64,
}

/// Orbits are given by a point and a period; each must be the zero circle
/// of the linear form through it.
pub fn rotation_additivity_check(
    model: &FlowModel,
    orbits: &[(Quat, f64)],
    n: usize,
    opts: IntegratorOptions,
) -> Result<Vec<AdditivityResidual>> {
    let forms: Vec<LinearForm> = orbits.iter().map(|(z, _)| LinearForm::through(z)).collect();
    let mut loops = Vec::with_capacity(orbits.len());
    for ((z, period), form) in orbits.iter().zip(&forms) {
        let path = model.orbit(z, 0.0, 0.0, *period, opts)?;
        let pts = path.polyline(0.0, *period, 800);
        let off = pts.iter().map(|q| form.eval(q).norm()).fold(0.0, f64::max);
        if off > 1e-6 {
            return Err(Error::Precondition(format!("orbit leaves the zero set of its form by {off:e}")));
        }
        loops.push(pts);
    }
    let multi = Framing::Page(Page::product(forms.clone(), 0.0));
    let mut out = Vec::with_capacity(orbits.len());
    for (i, (z, period)) in orbits.iter().enumerate() {
        let lhs = rotation_number(model, z, *period, &multi, 0.0, n, opts)?.rho;
        let single = Framing::Page(Page::new(forms[i], 0.0));
        let rho_single = rotation_number(model, z, *period, &single, 0.0, n, opts)?.rho;
        let mut links = Vec::new();
        for (j, l) in loops.iter().enumerate() {
            if j != i {
                links.push(linking_gauss(&loops[i], l)?.value);
            }
        }
        let rhs = rho_single + links.iter().sum::<i64>() as f64;
        out.push(AdditivityResidual { lhs, rho_single, links, rhs, residual: (lhs - rhs).abs() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn opts() -> IntegratorOptions {
        IntegratorOptions::default()
    }

    #[test]
    fn hopf_fibre_rotation() {
        let m = FlowModel::hopf();
        let page = Framing::Page(Page::new(LinearForm::w(), 0.0));
        let r = rotation_number(&m, &Quat::ONE, PI, &page, 0.0, 50, opts()).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-4, "{r:?}");
        let g = rotation_number(&m, &Quat::ONE, PI, &Framing::Global, 0.0, 50, opts()).unwrap();
        assert!((g.rho - 2.0).abs() < 1e-4, "{g:?}");
    }

    #[test]
    fn ellipsoid_short_orbit() {
        for b in [1.2, 1.5, 1.9] {
            let m = FlowModel::Ellipsoid { a: [1.0, b] };
            let g = rotation_number(&m, &Quat::ONE, PI, &Framing::Global, 0.0, 50, opts()).unwrap();
            assert!((g.rho - (1.0 + 1.0 / b)).abs() < 1e-4, "b={b}: {g:?}");
            assert_eq!(cz_index(g.rho, 1, 1e-6).value, 3);
            let p = rotation_number(&m, &Quat::ONE, PI, &Framing::Page(Page::new(LinearForm::w(), 0.0)), 0.0, 50, opts())
                .unwrap();
            assert!((p.rho - 1.0 / b).abs() < 1e-4, "b={b}: {p:?}");
        }
    }

    #[test]
    fn independent_of_initial_vector() {
        let m = FlowModel::Ellipsoid { a: [1.0, 1.5] };
        let page = Framing::Page(Page::new(LinearForm::w(), 0.0));
        let a = rotation_number(&m, &Quat::ONE, PI, &page, 0.0, 50, opts()).unwrap();
        let b = rotation_number(&m, &Quat::ONE, PI, &page, 1.1, 50, opts()).unwrap();
        assert!((a.rho - b.rho).abs() < 1e-6);
    }

    #[test]
    fn open_orbit_rejected() {
        let r = rotation_number(&FlowModel::hopf(), &Quat::ONE, 3.0, &Framing::Global, 0.0, 50, opts());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn cz_examples() {
        assert_eq!(cz_index(1.4, 1, 1e-9), CzIndex { value: 3, degenerate: false, neighbors: None });
        assert_eq!(cz_index(1.0 + 1.0 / 1.5, 1, 1e-9).value, 3);
        let d = cz_index(1.4, 5, 1e-9);
        assert!(d.degenerate);
        assert_eq!(d.value, 15);
        assert_eq!(d.neighbors, Some((13, 15)));
    }

    fn fibres(k: usize) -> Vec<(Quat, f64)> {
        (0..k)
            .map(|i| {
                let a = 0.4 + 0.9 * i as f64;
                (Quat::from_complex(Complex64::from_polar(a.cos(), 0.3 * i as f64), Complex64::from_polar(a.sin(), 1.0)), PI)
            })
            .collect()
    }

    #[test]
    fn additivity_on_fibres() {
        for k in [1, 2, 3] {
            let res = rotation_additivity_check(&FlowModel::hopf(), &fibres(k), 50, opts()).unwrap();
            for r in &res {
                assert!(r.residual < 5e-3, "{r:?}");
                assert!(r.links.iter().all(|&l| l == 1));
                assert!((r.lhs - k as f64).abs() < 5e-3);
            }
        }
    }
}
