//! Estimation of κ(γ₀): the asymptotic infimum of the frame-angle gain per
//! crossing of a disk page spanned by γ₀.

use super::page_tau;
use crate::error::{Error, Result};
use crate::flow_engine::{halton_points, par_map, EventOptions, IntegratorOptions, Sampler};
use crate::geometry2d::RevolutionMetric;
use crate::lift_s3::{Covering, Quat};
use crate::sections_linking::{link_gauss_closed, link_via_crossings, FlowModel, LinearForm, Page, TauStats};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Page used by default for κ: spanned by the short axis orbit for
/// ellipsoids, by a fibre for the Hopf flow and by the lifted equator for
/// the geodesic model.
pub fn default_page(model: &FlowModel) -> Page {
    match *model {
        FlowModel::Hopf { .. } | FlowModel::PerturbedBall { .. } => Page::new(LinearForm::w(), 0.0),
        FlowModel::Ellipsoid { a } => Page::new(if a[0] <= a[1] { LinearForm::w() } else { LinearForm::z() }, 0.0),
        FlowModel::Revolution { c } => {
            let m = RevolutionMetric::new(c).unwrap_or_else(|_| RevolutionMetric::round());
            let zb = Covering::new(m).inverse(&m.equator_state(0.0));
            Page::new(LinearForm::through(&zb), 0.0)
        }
    }
}

/// Rough upper bound on page return times, used to size integration windows.
pub fn return_time_cap(model: &FlowModel) -> f64 {
    match *model {
        FlowModel::Hopf { scale } => PI * scale,
        FlowModel::Ellipsoid { a } => PI * a[0].max(a[1]),
        FlowModel::PerturbedBall { coeffs } => PI * (1.0 + coeffs.iter().map(|c| c.abs()).sum::<f64>()).powi(2),
        FlowModel::Revolution { c } => 2.0 * TAU * c.max(1.0 / c),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaConfig {
    pub t_grid: Vec<f64>,
    /// Samples (x, u) per T.
    pub budget: usize,
    pub seed: u64,
    /// Relative change of the infimum over the last two T values.
    pub stabilization_tol: f64,
}

impl Default for KappaConfig {
    fn default() -> Self {
        Self { t_grid: vec![25.0, 50.0, 100.0, 200.0], budget: 256, seed: 0, stabilization_tol: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub t_grid: Vec<f64>,
    /// Per-T infimum of (angle gain over I(T, x)) / link.
    pub inf_per_t: Vec<f64>,
    /// Same with the gain over [0, T] only.
    pub literal_inf_per_t: Vec<f64>,
    /// Smallest link among retained samples at each T.
    pub link_min_per_t: Vec<i64>,
    pub kappa_hat: f64,
    pub stabilization: f64,
    pub spread_last3: f64,
    pub stabilized: bool,
    pub link_min: i64,
    pub samples: usize,
    pub rejected: usize,
    pub closing_error: f64,
    pub integration_error: f64,
    pub gauss_gap: f64,
    pub gauss_mismatches: usize,
    pub error_budget: f64,
    pub tau: TauStats,
    pub page: Page,
    pub seed: u64,
}

struct SampleRow {
    ratio: Vec<f64>,
    literal: Vec<f64>,
    link: Vec<i64>,
}

fn sample_point(u: &[f64], shift: &[f64; 4]) -> (Quat, f64) {
    let v: Vec<f64> = (0..4).map(|k| (u[k] + shift[k]).fract()).collect();
    let (r1, r2) = (v[0].sqrt(), (1.0 - v[0]).sqrt());
    let q = Quat::from_complex(Complex64::from_polar(r1, TAU * v[1]), Complex64::from_polar(r2, TAU * v[2]));
    (q, TAU * v[3])
}

fn run_sample(model: &FlowModel, page: &Page, x: &Quat, u: f64, cfg: &KappaConfig, cap: f64, opts: IntegratorOptions) -> Result<SampleRow> {
    let tmax = cfg.t_grid.iter().copied().fold(0.0, f64::max);
    let path = model.orbit(x, u, -cap, tmax + cap, opts)?;
    let mut row = SampleRow { ratio: vec![], literal: vec![], link: vec![] };
    for &t in &cfg.t_grid {
        let arc = link_via_crossings(&path, page, t, EventOptions::default())?;
        if arc.link < 1 {
            return Err(Error::Precondition(format!("link {} < 1 at T = {t}", arc.link)));
        }
        let l = arc.link as f64;
        row.ratio.push((path.angle(arc.t_end) - path.angle(arc.t_minus)) / l);
        row.literal.push((path.angle(t) - path.angle(0.0)) / l);
        row.link.push(arc.link);
    }
    Ok(row)
}

/// Infimum over a seeded, shifted Halton sample of (x, u) of the angle
/// gain per linking with the binding, for each T of the grid.
///
/// The gain is taken over the closed-up interval I(T, x), so numerator and
/// denominator describe the same arc; the gain over [0, T] is reported as
/// `literal_inf_per_t`.
pub fn estimate_kappa(model: &FlowModel, page: &Page, cfg: &KappaConfig, opts: IntegratorOptions) -> Result<KappaEstimate> {
    model.validate()?;
    if cfg.t_grid.len() < 2 || cfg.budget == 0 {
        return Err(Error::Config("κ estimation needs at least two T values and a positive budget".into()));
    }
    let tau = page_tau(model, page, opts)?;
    let cap = 1.5 * tau.tau_max + 1.0;
    let mut rng = Sampler::new(cfg.seed);
    let shift = [rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)];
    let pts: Vec<(Quat, f64)> = halton_points(cfg.budget, 4).iter().map(|u| sample_point(u, &shift)).collect();
    let rows = par_map(&pts, |(x, u)| {
        if page.f(x).norm() < 1e-3 {
            return Err(Error::Precondition("sample on the binding".into()));
        }
        run_sample(model, page, x, *u, cfg, cap, opts)
    });
    let kept: Vec<&SampleRow> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
    if let Some(Err(e)) = rows.iter().find(|r| matches!(r, Err(e) if !matches!(e, Error::Precondition(_)))) {
        return Err(e.clone());
    }
    if kept.is_empty() {
        return Err(Error::Precondition("every κ sample was rejected".into()));
    }
    let nt = cfg.t_grid.len();
    let col_min = |f: &dyn Fn(&SampleRow) -> f64| kept.iter().map(|r| f(r)).fold(f64::INFINITY, f64::min);
    let inf_per_t: Vec<f64> = (0..nt).map(|k| col_min(&|r: &SampleRow| r.ratio[k])).collect();
    let literal_inf_per_t: Vec<f64> = (0..nt).map(|k| col_min(&|r: &SampleRow| r.literal[k])).collect();
    let link_min_per_t: Vec<i64> = (0..nt).map(|k| kept.iter().map(|r| r.link[k]).min().unwrap()).collect();
    let kappa_hat = inf_per_t[nt - 1];
    let stabilization = ((inf_per_t[nt - 1] - inf_per_t[nt - 2]) / kappa_hat).abs();
    let last3 = &inf_per_t[nt.saturating_sub(3)..];
    let spread_last3 = last3.iter().copied().fold(f64::NEG_INFINITY, f64::max) - last3.iter().copied().fold(f64::INFINITY, f64::min);
    let link_min = link_min_per_t[nt - 1];

    // tolerance propagation: rerun a few samples a hundred times tighter
    let tight = IntegratorOptions { rtol: opts.rtol * 1e-2, atol: opts.atol * 1e-2, ..opts };
    let probe: Vec<usize> = (0..pts.len()).filter(|&i| rows[i].is_ok()).take(4).collect();
    let diffs = par_map(&probe, |&i| {
        let a = rows[i].as_ref().unwrap();
        run_sample(model, page, &pts[i].0, pts[i].1, cfg, cap, tight).map(|b| (a.ratio[nt - 1] - b.ratio[nt - 1]).abs())
    });
    let integration_error = diffs.into_iter().collect::<Result<Vec<f64>>>()?.into_iter().fold(0.0, f64::max);

    // independent Gauss cross-check of the link on a few short arcs
    let (mut gauss_gap, mut gauss_mismatches) = (0.0f64, 0usize);
    if page.factors.len() == 1 {
        let t0 = cfg.t_grid[0];
        let checks = par_map(&probe, |&i| -> Result<(f64, bool)> {
            let path = model.orbit(&pts[i].0, pts[i].1, -cap, t0 + cap, opts)?;
            let arc = link_via_crossings(&path, page, t0, EventOptions::default())?;
            let g = link_gauss_closed(&path, &arc, page, 0.02)?;
            Ok((g.gap, g.value == arc.link))
        });
        for c in checks.into_iter().flatten() {
            gauss_gap = gauss_gap.max(c.0);
            gauss_mismatches += usize::from(!c.1);
        }
    }
    let closing_error = kappa_hat / link_min as f64;
    let error_budget = closing_error + integration_error + gauss_gap * closing_error;
    Ok(KappaEstimate {
        t_grid: cfg.t_grid.clone(),
        inf_per_t,
        literal_inf_per_t,
        link_min_per_t,
        kappa_hat,
        stabilization,
        spread_last3,
        stabilized: stabilization < cfg.stabilization_tol,
        link_min,
        samples: kept.len(),
        rejected: rows.len() - kept.len(),
        closing_error,
        integration_error,
        gauss_gap,
        gauss_mismatches,
        error_budget,
        tau,
        page: page.clone(),
        seed: cfg.seed,
    })
}
