use super::integrate::Trajectory;
use std::cell::RefCell;

/// Scalar section function whose zero level (restricted to the admissible
/// half) is the surface of section.
pub trait Section: Sync {
    fn id(&self) -> &str;
    fn value(&self, y: &[f64]) -> f64;
    fn admissible(&self, _y: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOptions {
    /// Bisection stops once the bracket is shorter than this (in time).
    pub time_tol: f64,
    /// Extra dense-output probes per integrator step.
    pub substeps: usize,
    /// Crossings with |d/dt section| below this are flagged as near-tangent.
    pub tangency_tol: f64,
    /// If |section| stays below this everywhere the trajectory is degenerate.
    pub degenerate_tol: f64,
}

impl Default for EventOptions {
    fn default() -> Self {
        Self { time_tol: 1e-10, substeps: 4, tangency_tol: 1e-6, degenerate_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingEvent {
    pub section: String,
    pub time: f64,
    pub state: Vec<f64>,
    /// +1 when the section value increases along the traversal direction.
    pub sign: i8,
    /// |d/dt section| at the crossing.
    pub speed: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossingReport {
    pub events: Vec<CrossingEvent>,
    /// Counted crossings whose transversal speed fell below the tangency tolerance.
    pub flagged: Vec<CrossingEvent>,
    /// Times where |section| nearly touched zero without changing sign.
    pub near_misses: Vec<f64>,
    pub degenerate: bool,
}

impl CrossingReport {
    pub fn signed_count(&self) -> i64 {
        self.events.iter().map(|e| e.sign as i64).sum()
    }
    /// Smallest transversal speed among counted crossings.
    pub fn min_speed(&self) -> f64 {
        self.events.iter().map(|e| e.speed).fold(f64::INFINITY, f64::min)
    }
}

/// Finds all sign changes of `section` along `traj` and bisects them in time.
pub fn detect_crossings<S: Section + ?Sized>(traj: &Trajectory, section: &S, opts: EventOptions) -> CrossingReport {
    let scratch = RefCell::new(vec![0.0; traj.dim()]);
    let g = |t: f64| {
        let mut b = scratch.borrow_mut();
        traj.eval_into(t, &mut b);
        section.value(&b)
    };
    let adm = |t: f64| section.admissible(&traj.eval(t));
    let mut report = detect_crossings_fn(section.id(), traj.times(), g, adm, opts);
    for ev in report.events.iter_mut().chain(report.flagged.iter_mut()) {
        ev.state = traj.eval(ev.time);
    }
    report
}

/// Crossing scan for a section given directly as a function of time.
///
/// `knots` are the base sample times (integrator steps, say); each interval
/// is probed `opts.substeps` extra times. Events carry an empty state.
pub fn detect_crossings_fn<G, A>(id: &str, knots: &[f64], g: G, admissible: A, opts: EventOptions) -> CrossingReport
where
    G: Fn(f64) -> f64,
    A: Fn(f64) -> bool,
{
    let mut report = CrossingReport::default();
    if knots.is_empty() {
        return report;
    }
    let mut probes = Vec::with_capacity(knots.len() * (opts.substeps + 1));
    probes.push(knots[0]);
    for w in knots.windows(2) {
        for j in 1..=opts.substeps + 1 {
            probes.push(w[0] + (w[1] - w[0]) * j as f64 / (opts.substeps + 1) as f64);
        }
    }
    let values: Vec<f64> = probes.iter().map(|&t| g(t)).collect();

    report.degenerate = values.iter().all(|v| v.abs() < opts.degenerate_tol);
    if report.degenerate {
        return report;
    }

    for i in 1..probes.len() {
        let (ga, gb) = (values[i - 1], values[i]);
        let crosses = (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0);
        if !crosses {
            if i + 1 < probes.len() {
                let gc = values[i + 1];
                let local_min = gb.abs() < ga.abs() && gb.abs() < gc.abs();
                let same_side = gb.signum() == ga.signum() && gb.signum() == gc.signum();
                if local_min && same_side && gb.abs() < 1e3 * opts.tangency_tol * (probes[i + 1] - probes[i]).abs() {
                    report.near_misses.push(probes[i]);
                }
            }
            continue;
        }
        let (mut a, mut b) = (probes[i - 1], probes[i]);
        let mut fa = ga;
        let root = if gb == 0.0 {
            b
        } else {
            for _ in 0..200 {
                if (b - a).abs() <= opts.time_tol {
                    break;
                }
                let m = 0.5 * (a + b);
                let fm = g(m);
                if (fa < 0.0) == (fm < 0.0) && fm != 0.0 {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        if !admissible(root) {
            continue;
        }
        let dt = 1e-6 * (1.0 + root.abs()).min(10.0);
        let speed = ((g(root + dt) - g(root - dt)) / (2.0 * dt)).abs();
        let ev = CrossingEvent {
            section: id.to_string(),
            time: root,
            state: Vec::new(),
            sign: if gb > ga { 1 } else { -1 },
            speed,
        };
        if speed < opts.tangency_tol {
            report.flagged.push(ev.clone());
        }
        report.events.push(ev);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_engine::{integrate, FnSystem, IntegratorOptions};
    use std::f64::consts::PI;

    struct FirstCoord;
    impl Section for FirstCoord {
        fn id(&self) -> &str {
            "x0"
        }
        fn value(&self, y: &[f64]) -> f64 {
            y[0]
        }
    }

    fn rot() -> FnSystem<impl Fn(f64, &[f64], &mut [f64]) + Sync> {
        FnSystem { dim: 2, f: |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[1];
            dy[1] = y[0];
        } }
    }

    #[test]
    fn rotation_crossings_are_bisected() {
        let tr = integrate(&rot(), 0.0, &[1.0, 0.0], 10.0, IntegratorOptions::default()).unwrap();
        let rep = detect_crossings(&tr, &FirstCoord, EventOptions::default());
        let times: Vec<f64> = rep.events.iter().map(|e| e.time).collect();
        let expect = [PI / 2.0, 1.5 * PI, 2.5 * PI];
        assert_eq!(times.len(), 3);
        for (t, e) in times.iter().zip(expect) {
            assert!((t - e).abs() < 1e-8, "{t} vs {e}");
        }
        assert_eq!(rep.events[0].sign, -1);
        assert_eq!(rep.events[1].sign, 1);
        assert!(rep.flagged.is_empty());
    }

    #[test]
    fn reversed_time_flips_signs() {
        let fwd = integrate(&rot(), 0.0, &[1.0, 0.0], 10.0, IntegratorOptions::default()).unwrap();
        let back = integrate(&rot(), 10.0, fwd.last_state(), -10.0, IntegratorOptions::default()).unwrap();
        let a = detect_crossings(&fwd, &FirstCoord, EventOptions::default());
        let b = detect_crossings(&back, &FirstCoord, EventOptions::default());
        assert_eq!(a.events.len(), b.events.len());
        for (x, y) in a.events.iter().zip(b.events.iter().rev()) {
            assert!((x.time - y.time).abs() < 1e-8);
            assert_eq!(x.sign, -y.sign);
        }
    }

    #[test]
    fn trajectory_inside_section_is_degenerate() {
        let still = FnSystem { dim: 2, f: |_t: f64, _y: &[f64], dy: &mut [f64]| {
            dy[0] = 0.0;
            dy[1] = 1.0;
        } };
        let tr = integrate(&still, 0.0, &[0.0, 0.0], 3.0, IntegratorOptions::default()).unwrap();
        let rep = detect_crossings(&tr, &FirstCoord, EventOptions::default());
        assert!(rep.degenerate);
        assert!(rep.events.is_empty());
    }
}
