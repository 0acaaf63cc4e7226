//! Acceptance checks, one PASS/FAIL line each. Exits non-zero if any fails.

use num_complex::Complex64;
use reeb_core::certify::{
    audit_geometry, certify_convex, certify_kappa, default_page, delta_star, estimate_kappa, AuditStatus, KappaConfig, Verdict,
};
use reeb_core::convex4d::{linearized_angle_rate, ConvexBody};
use reeb_core::flow_engine::{EventOptions, IntegratorOptions, Sampler};
use reeb_core::geometry2d::{geodesic, jacobi_evolve, GeodesicSystem, RevolutionMetric};
use reeb_core::lift_s3::{lift_path, pullback_factor_round, Covering, Quat};
use reeb_core::report::{run_certify, to_json, Criterion, RunConfig};
use reeb_core::sections_linking::{
    chart, cz_index, florio_check, link_gauss_closed, link_via_crossings, linking_gauss, rotation_additivity_check, rotation_number,
    winding_sum, ChartLoop, FlowModel, Framing, LinearForm, Page,
};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

struct Tally {
    failed: Vec<String>,
}

impl Tally {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} [{id}] {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id.to_string());
        }
    }
}

type Step = (&'static str, fn(&mut Tally));

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

fn delta_star_root(t: &mut Tally) {
    let d = delta_star();
    // Cardano for x³ − x²/2 − 1/4 with x = y + 1/6
    let (p, q): (f64, f64) = (-1.0 / 12.0, -1.0 / 108.0 - 0.25);
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let cardano = (-q / 2.0 + disc).cbrt() + (-q / 2.0 - disc).cbrt() + 1.0 / 6.0;
    let poly = 4.0 * d.x.powi(3) - 2.0 * d.x.powi(2) - 1.0;
    let start = Instant::now();
    let reps = 1000;
    for _ in 0..reps {
        std::hint::black_box(delta_star());
    }
    let per_call = start.elapsed().as_secs_f64() / reps as f64;
    t.check(
        "1",
        d.x > 0.84 && d.x < 0.85 && d.delta < 0.7225 && poly.abs() < 1e-14 && (d.x - cardano).abs() < 1e-14 && per_call < 1e-3,
        format!(
            "x* = {:.15} in (0.84, 0.85), δ* = {:.15} < 0.7225, |P(x*)| = {:.1e} < 1e-14, |x* − Cardano| = {:.1e}, {:.1} µs/call < 1 ms",
            d.x,
            d.delta,
            poly.abs(),
            (d.x - cardano).abs(),
            per_call * 1e6
        ),
    );
}

fn round_ball(t: &mut Tally) {
    let c = certify_convex(&ConvexBody::ball(), None, 4096, opts()).unwrap();
    let (k, tau, prod) = (c.measured["k_c_min"], c.measured["tau_min"], c.measured["product"]);
    t.check(
        "2",
        k == 2.0 && (tau - PI).abs() < 1e-6 && (prod - TAU).abs() < 1e-5 && (c.margin - PI).abs() < 1e-5 && c.verdict == Verdict::Certified,
        format!(
            "K_min = {k} (exact 2), τ_min − π = {:.1e} (±1e-6), product − 2π = {:.1e}, margin − π = {:.1e} (±1e-5), {:?}",
            tau - PI,
            prod - TAU,
            c.margin - PI,
            c.verdict
        ),
    );
}

fn ellipsoid_verdicts(t: &mut Tally) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (b, want) in [(1.5, Verdict::Certified), (2.5, Verdict::NotCertified)] {
        let c = certify_convex(&ConvexBody::ellipsoid(1.0, b).unwrap(), None, 4096, opts()).unwrap();
        // linear flow: K_min = 2/b, shortest orbit period π
        let oracle = TAU / b;
        let err = (c.measured["product"] - oracle).abs();
        ok &= c.verdict == want && err < 1e-6;
        parts.push(format!("E(1,{b}): {:?}, |product − 2π/{b}| = {err:.1e}", c.verdict));
    }
    t.check("3", ok, format!("{} (tol 1e-6)", parts.join("; ")));
}

fn salomao(t: &mut Tally) {
    let mut s = Sampler::new(4);
    let mut ok = true;
    let mut parts = Vec::new();
    let bodies = [
        ("ball", ConvexBody::ball()),
        ("E(1,1.5)", ConvexBody::ellipsoid(1.0, 1.5).unwrap()),
        ("perturbed", ConvexBody::perturbed_ball([0.05, -0.05, 0.0, 0.0]).unwrap()),
    ];
    for (name, b) in bodies {
        let k = b.kmin(1 << 12).unwrap().value;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..10_000 {
            let z = b.boundary_point(&s.unit_s3());
            let a = s.angle();
            let r = linearized_angle_rate(&b, &z, [a.cos(), a.sin()]);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        ok &= lo >= 2.0 * k - 1e-5;
        if name == "ball" {
            ok &= (lo - 4.0).abs() < 1e-9 && (hi - 4.0).abs() < 1e-9;
        }
        parts.push(format!("{name}: min rate {lo:.6} ≥ 2K_min = {:.6}", 2.0 * k));
    }
    t.check("4", ok, format!("{} (tol 1e-5; ball rate ≡ 4)", parts.join("; ")));
}

fn jacobi(t: &mut Tally) {
    let o = IntegratorOptions::with_tol(1e-13);
    let mut worst: f64 = 0.0;
    for k in [0.25f64, 1.0, 4.0] {
        let r = k.sqrt();
        for i in 1..=100 {
            let tt = 0.1 * i as f64;
            let (b, _) = jacobi_evolve(|_| k, (0.0, 1.0), tt, o).unwrap();
            // error relative to the amplitude 1/√K, since sin has zeros in range
            worst = worst.max((b - (r * tt).sin() / r).abs() * r);
        }
    }
    let m = RevolutionMetric::new(0.9).unwrap();
    let sys = GeodesicSystem::new(m).with_angle();
    let (lo, hi) = (m.k_min.min(1.0), m.k_max.max(1.0));
    let mut s = Sampler::new(5);
    let mut viol: f64 = 0.0;
    for _ in 0..100 {
        let st = Covering::new(m).forward(&Quat(s.unit_s3()));
        let th0 = s.angle();
        let tr = geodesic(&sys, &st, &[th0], 10.0, opts()).unwrap();
        let mut prev = (0.0, th0);
        for (tt, y) in tr.sample_uniform(200).into_iter().skip(1) {
            let rate = (y[6] - prev.1) / (tt - prev.0);
            viol = viol.max(lo - rate).max(rate - hi);
            prev = (tt, y[6]);
        }
    }
    t.check(
        "5",
        worst < 1e-8 && viol < 1e-6,
        format!(
            "max |b − sin(√K t)/√K|·√K = {worst:.1e} < 1e-8 for K ∈ {{0.25, 1, 4}}; rate outside [{lo:.4}, {hi:.4}] by at most {:.1e} (tol 1e-6) on 100 trajectories",
            viol.max(0.0)
        ),
    );
}

fn factor_four(t: &mut Tally) {
    let mut s = Sampler::new(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let z = Quat(s.unit_s3());
        let r = Quat(s.unit_s3());
        let zeta = r.sub(&z.scale(r.dot(&z)));
        worst = worst.max(pullback_factor_round(&z, &zeta).abs());
    }
    let mut gap: f64 = 0.0;
    for c in [1.0, 0.95] {
        let m = RevolutionMetric::new(c).unwrap();
        let s0 = m.equator_state(0.0);
        let z0 = Covering::new(m).inverse(&s0);
        let tr = geodesic(&GeodesicSystem::new(m), &s0, &[], 2.0 * m.equator_length(), opts().max_step(0.2)).unwrap();
        let l = lift_path(&m, tr, &z0).unwrap();
        gap = gap.max(l.end().sub(&z0).norm());
    }
    t.check(
        "6",
        worst < 1e-6 && gap < 1e-6,
        format!("max |D₀*λ − 4λ₀| = {worst:.1e} over 1000 pairs (tol 1e-6); double equator closing gap {gap:.1e} (tol 1e-6)"),
    );
}

fn linking_double(t: &mut Tally) {
    let mut s = Sampler::new(7);
    let page = Page::new(LinearForm::w(), 0.0);
    let (mut agree, mut gap, mut n) = (true, 0.0f64, 0);
    for model in [FlowModel::hopf(), FlowModel::Ellipsoid { a: [1.0, 1.5] }] {
        let mut k = 0;
        while k < 10 {
            let x = Quat(s.unit_s3());
            if page.f(&x).norm() < 0.15 {
                continue;
            }
            let tt = s.uniform(3.0, 25.0);
            let path = model.orbit(&x, 0.0, -1.6 * PI, tt + 1.6 * PI, opts()).unwrap();
            let arc = link_via_crossings(&path, &page, tt, EventOptions::default()).unwrap();
            let g = link_gauss_closed(&path, &arc, &page, 0.02).unwrap();
            agree &= g.value == arc.link;
            gap = gap.max(g.gap);
            k += 1;
            n += 1;
        }
    }
    let fibre = |q: Quat| FlowModel::hopf().orbit(&q, 0.0, 0.0, PI, opts()).unwrap().polyline(0.0, PI, 400);
    let a = fibre(Quat::ONE);
    let b = fibre(Quat([0.6, 0.0, 0.8, 0.0]));
    let fib = linking_gauss(&a, &b).unwrap();
    t.check(
        "7",
        agree && gap < 1e-3 && fib.value == 1 && fib.gap < 1e-3,
        format!("{n} arcs: crossing = Gauss on all: {agree}, max integrality gap {gap:.1e} (tol 1e-3); two Hopf fibres link {} (gap {:.1e})", fib.value, fib.gap),
    );
}

fn winding_identity(t: &mut Tally) {
    let mut s = Sampler::new(8);
    let model = FlowModel::hopf();
    let (mut done, mut agree, mut frac) = (0, true, 0.0f64);
    while done < 20 {
        let on_page = |s: &mut Sampler| chart(0.0, Complex64::from_polar(0.9 * s.uniform(0.05, 1.0).sqrt(), s.angle()));
        let (x, y) = (on_page(&mut s), on_page(&mut s));
        let (np, nq) = (1 + s.uniform(0.0, 3.0) as usize, 1 + s.uniform(0.0, 3.0) as usize);
        let pp = model.orbit(&x, 0.0, 0.0, 1.05 * PI * np as f64, opts()).unwrap();
        let pq = model.orbit(&y, 0.0, 0.0, 1.05 * PI * nq as f64, opts()).unwrap();
        let lp = ChartLoop::from_path(&pp, 0.0, np, 512, 0.05).unwrap();
        let lq = ChartLoop::from_path(&pq, 0.0, nq, 512, 0.05).unwrap();
        let Ok(g) = linking_gauss(&lp.to_s3(), &lq.to_s3()) else { continue };
        let w = winding_sum(&lp, &lq).unwrap();
        frac = frac.max((w - w.round()).abs());
        agree &= w.round() as i64 == g.value;
        done += 1;
    }
    t.check("8", agree && frac < 1e-9, format!("20 Hopf pairs: winding sum = Gauss on all: {agree}, max distance from integer {frac:.1e}"));
}

fn kappa(t: &mut Tally) {
    let cfg = KappaConfig { seed: 9, ..KappaConfig::default() };
    let hopf = FlowModel::hopf();
    let h = estimate_kappa(&hopf, &default_page(&hopf), &cfg, opts()).unwrap();
    let round = FlowModel::Revolution { c: 1.0 };
    let r = estimate_kappa(&round, &default_page(&round), &cfg, opts()).unwrap();
    let (hc, rc) = (certify_kappa(&hopf, &h), certify_kappa(&round, &r));
    let rel = |v: f64, target: f64| (v - target).abs() / target;
    let last = *cfg.t_grid.last().unwrap();
    t.check(
        "9a",
        rel(h.kappa_hat, TAU) < 0.05,
        format!("Hopf κ̂ = {:.6} vs 2π = {:.6}, relative error {:.3} (tol 0.05), T = {last}, {} samples", h.kappa_hat, TAU, rel(h.kappa_hat, TAU), cfg.budget),
    );
    t.check(
        "9b",
        rel(r.kappa_hat, 2.0 * TAU) < 0.05,
        format!("round lift κ̂ = {:.6} vs 4π = {:.6}, relative error {:.1e} (tol 0.05)", r.kappa_hat, 2.0 * TAU, rel(r.kappa_hat, 2.0 * TAU)),
    );
    t.check(
        "9c",
        h.stabilization < 0.02 && r.stabilization < 0.02,
        format!("stabilization Hopf {:.1e}, round lift {:.1e} (tol 0.02)", h.stabilization, r.stabilization),
    );
    t.check("9d", rc.verdict == Verdict::Certified, format!("round lift κ > 2π certificate: {:?}, margin {:.4}", rc.verdict, rc.margin));
    t.check(
        "9e",
        hc.verdict == Verdict::Inconclusive,
        format!("Hopf κ > 2π certificate expected inconclusive: {:?}, margin {:.4} ± {:.1e}", hc.verdict, hc.margin, hc.error_budget),
    );
}

fn audits(t: &mut Tally) {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in [0.95, 1.0] {
        let a = audit_geometry(&RevolutionMetric::new(c).unwrap(), 32, 16, 1e-6, opts()).unwrap();
        ok &= !a.violated();
        let summary: Vec<String> = a
            .checks
            .iter()
            .map(|k| {
                let st = match k.status {
                    AuditStatus::Tight => "tight",
                    AuditStatus::Slack => "slack",
                    AuditStatus::Violated => "VIOLATED",
                };
                format!("{} {st}", k.name)
            })
            .collect();
        parts.push(format!("c = {c}: {} returns; {}", a.samples.len(), summary.join(", ")));
    }
    t.check("10", ok, format!("{} (tol 1e-6)", parts.join(" | ")));
}

fn rotation(t: &mut Tally) {
    let page = Framing::Page(Page::new(LinearForm::w(), 0.0));
    let h = rotation_number(&FlowModel::hopf(), &Quat::ONE, PI, &page, 0.0, 50, opts()).unwrap();
    let mut ok = (h.rho - 1.0).abs() < 1e-4;
    let mut parts = vec![format!("Hopf fibre page ρ = {:.8}", h.rho)];
    for b in [1.2, 1.5, 1.9] {
        let m = FlowModel::Ellipsoid { a: [1.0, b] };
        let g = rotation_number(&m, &Quat::ONE, PI, &Framing::Global, 0.0, 50, opts()).unwrap();
        let cz = cz_index(g.rho, 1, 1e-6);
        ok &= (g.rho - (1.0 + 1.0 / b)).abs() < 1e-4 && cz.value == 3 && !cz.degenerate;
        parts.push(format!("E(1,{b}) ρ − (1 + 1/b) = {:.1e}, CZ {}", g.rho - (1.0 + 1.0 / b), cz.value));
    }
    let mut worst: f64 = 0.0;
    for k in [2usize, 3] {
        let orbits: Vec<(Quat, f64)> = (0..k)
            .map(|i| {
                let a = 0.4 + 0.9 * i as f64;
                (Quat::from_complex(Complex64::from_polar(a.cos(), 0.3 * i as f64), Complex64::from_polar(a.sin(), 1.0)), PI)
            })
            .collect();
        for r in rotation_additivity_check(&FlowModel::hopf(), &orbits, 50, opts()).unwrap() {
            worst = worst.max(r.residual);
        }
    }
    ok &= worst < 5e-3;
    parts.push(format!("additivity residual {worst:.1e} on 2- and 3-fibre links"));
    t.check("11", ok, format!("{} (tol 1e-4, 5e-3)", parts.join("; ")));
}

fn florio(t: &mut Tally) {
    // linear isotopies: both sides are the same winding
    let rot_stretch = |tt: f64, z: Complex64| {
        let e = Complex64::from_polar(1.0, 3.0 * tt);
        e * Complex64::new(z.re * (1.0 + 0.5 * tt.sin()), z.im)
    };
    let mut exact: f64 = 0.0;
    let mut s = Sampler::new(10);
    for _ in 0..5 {
        let x = Complex64::new(s.uniform(-0.5, 0.5), s.uniform(-0.5, 0.5));
        let y = Complex64::new(s.uniform(-0.5, 0.5), s.uniform(-0.5, 0.5));
        let r = florio_check(rot_stretch, |tt, _z, v| rot_stretch(tt, v), x, y, 5.0).unwrap();
        exact = exact.max((r.lhs - r.rhs_min).abs()).max((r.lhs - r.rhs_max).abs());
    }
    let mut ok = exact < 1e-12;
    let mut gap: f64 = 0.0;
    for _ in 0..20 {
        let x = Complex64::from_polar(0.9 * s.uniform(0.0, 1.0).sqrt(), s.angle());
        let y = Complex64::from_polar(0.9 * s.uniform(0.0, 1.0).sqrt(), s.angle());
        let n = 1 + s.uniform(0.0, 4.0) as usize;
        let f = |tt: f64, z: Complex64| z * Complex64::from_polar(1.0, 2.0 * tt);
        let r = florio_check(f, |tt, _z, v| f(tt, v), x, y, n as f64 * PI).unwrap();
        ok &= r.contained;
        gap = gap.max(r.gap);
    }
    ok &= gap < 0.01;
    t.check("12", ok, format!("linear isotopy |lhs − rhs| = {exact:.1e} (exact); Hopf return map: 20 pairs contained, max witness gap {gap:.1e} (tol 0.01)"));
}

fn reproducible(t: &mut Tally) {
    let mut cfg = RunConfig::for_model(FlowModel::Ellipsoid { a: [1.0, 1.5] });
    cfg.criteria = vec![Criterion::Convex, Criterion::KSigma, Criterion::Kappa];
    cfg.seed = Some(13);
    cfg.budget = Some(48);
    cfg.t_grid = Some(vec![10.0, 20.0, 40.0]);
    let base = std::env::temp_dir().join(format!("reeb-acceptance-{}", std::process::id()));
    let run = |tag: &str| {
        let dir = base.join(tag);
        let certs = run_certify(&cfg, Some(&dir)).unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        (certs.iter().map(|c| to_json(c).unwrap()).collect::<String>(), files)
    };
    let (a, fa) = run("a");
    let (b, fb) = run("b");
    let _ = std::fs::remove_dir_all(&base);
    t.check(
        "13",
        a == b && fa == fb && !fa.is_empty(),
        format!("two runs of seed 13: {} files, byte-identical: {}", fa.len(), a == b && fa == fb),
    );
}

fn main() {
    let mut t = Tally { failed: Vec::new() };
    let steps: Vec<Step> = vec![
        ("pinching threshold", delta_star_root),
        ("round ball", round_ball),
        ("ellipsoid verdicts", ellipsoid_verdicts),
        ("angle-rate bound", salomao),
        ("Jacobi fields", jacobi),
        ("factor four", factor_four),
        ("linking two ways", linking_double),
        ("winding sums", winding_identity),
        ("kappa", kappa),
        ("annulus audits", audits),
        ("rotation numbers", rotation),
        ("Florio property", florio),
        ("reproducibility", reproducible),
    ];
    for (name, f) in steps {
        let start = Instant::now();
        f(&mut t);
        println!("      {name}: {:.2} s", start.elapsed().as_secs_f64());
    }
    if t.failed.is_empty() {
        println!("all acceptance criteria passed");
    } else {
        println!("failed: {}", t.failed.join(", "));
        std::process::exit(1);
    }
}
