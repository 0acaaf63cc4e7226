//! Flows on S³ carrying a global-frame angle for the linearized flow.

use crate::convex4d::{frames, ConvexBody, HamiltonianSystem};
use crate::error::{Error, Result};
use crate::flow_engine::{integrate, FnSystem, IntegratorOptions, Trajectory};
use crate::geometry2d::{GeodesicSystem, RevolutionMetric, UnitTangent};
use crate::lift_s3::{contact_frame, lift_path, Covering, LiftedCurve, Quat};
use serde::{Deserialize, Serialize};

fn one() -> f64 {
    1.0
}

/// Model flow. `Revolution` is the geodesic flow of an ellipsoid of
/// revolution lifted to S³; the convex families use the radial chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowModel {
    /// Reeb flow of scale·λ₀ (the Hopf flow when scale = 1).
    Hopf {
        #[serde(default = "one")]
        scale: f64,
    },
    Ellipsoid {
        a: [f64; 2],
    },
    PerturbedBall {
        coeffs: [f64; 4],
    },
    Revolution {
        c: f64,
    },
}

impl FlowModel {
    pub fn hopf() -> Self {
        FlowModel::Hopf { scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FlowModel::Hopf { scale } if !(scale.is_finite() && *scale > 0.0) => {
                Err(Error::Config(format!("scale must be positive, got {scale}")))
            }
            FlowModel::Revolution { c } => RevolutionMetric::new(*c).map(|_| ()),
            _ => self.body().map_or(Ok(()), |b| b.validate()),
        }
    }

    pub fn body(&self) -> Option<ConvexBody> {
        match *self {
            FlowModel::Ellipsoid { a } => Some(ConvexBody::Ellipsoid { a }),
            FlowModel::PerturbedBall { coeffs } => Some(ConvexBody::PerturbedBall { coeffs }),
            _ => None,
        }
    }

    pub fn metric(&self) -> Option<RevolutionMetric> {
        match *self {
            FlowModel::Revolution { c } => RevolutionMetric::new(c).ok(),
            _ => None,
        }
    }

    /// Orbit of `z0` over [t_start, t_end] (t_start ≤ 0 ≤ t_end), with the
    /// frame angle equal to `theta0` at time 0.
    pub fn orbit(&self, z0: &Quat, theta0: f64, t_start: f64, t_end: f64, opts: IntegratorOptions) -> Result<S3Path> {
        self.validate()?;
        if !(t_start <= 0.0 && t_end >= 0.0) {
            return Err(Error::Precondition(format!("time window [{t_start}, {t_end}] must contain 0")));
        }
        let z0 = z0.normalized();
        match *self {
            FlowModel::Hopf { scale } => {
                let sys = FnSystem {
                    dim: 5,
                    f: move |_t: f64, y: &[f64], dy: &mut [f64]| {
                        let r = 2.0 / scale;
                        dy[0] = -r * y[1];
                        dy[1] = r * y[0];
                        dy[2] = -r * y[3];
                        dy[3] = r * y[2];
                        dy[4] = 4.0 / scale;
                    },
                };
                let mut y0 = z0.0.to_vec();
                y0.push(theta0);
                let traj = two_sided(&sys, &y0, t_start, t_end, opts)?;
                Ok(S3Path { model: *self, traj, lifted: None })
            }
            FlowModel::Ellipsoid { .. } | FlowModel::PerturbedBall { .. } => {
                let body = self.body().unwrap();
                let z = body.from_s3(&z0);
                let x = frames(&body, &z);
                let (c, s) = (theta0.cos(), theta0.sin());
                let mut y0 = z.to_vec();
                y0.extend((0..4).map(|k| c * x[1][k] + s * x[2][k]));
                y0.push(theta0);
                let sys = HamiltonianSystem::new(body).with_linearization();
                let traj = two_sided(&sys, &y0, t_start, t_end, opts)?;
                Ok(S3Path { model: *self, traj, lifted: None })
            }
            FlowModel::Revolution { c } => {
                let metric = RevolutionMetric::new(c)?;
                let cov = Covering::new(metric);
                let sys = GeodesicSystem::new(metric).with_angle();
                let opts = opts.max_step(opts.max_step.min(0.25));
                let mut y0 = cov.forward(&z0).to_vec();
                y0.push(theta0);
                let (ya, za) = if t_start < 0.0 {
                    let back = integrate(&sys, 0.0, &y0, t_start, opts)?;
                    let ya = back.last_state().to_vec();
                    let lifted = lift_path(&metric, back, &z0)?;
                    (ya, lifted.end())
                } else {
                    (y0, z0)
                };
                let fwd = integrate(&sys, t_start, &ya, t_end - t_start, opts)?;
                let lifted = lift_path(&metric, fwd, &za)?;
                let traj = lifted.base.clone();
                Ok(S3Path { model: *self, traj, lifted: Some(lifted) })
            }
        }
    }
}

fn two_sided<S: crate::flow_engine::OdeSystem>(
    sys: &S,
    y0: &[f64],
    t_start: f64,
    t_end: f64,
    opts: IntegratorOptions,
) -> Result<Trajectory> {
    let ya = if t_start < 0.0 { integrate(sys, 0.0, y0, t_start, opts)?.last_state().to_vec() } else { y0.to_vec() };
    integrate(sys, t_start, &ya, t_end - t_start, opts)
}

/// Dense orbit segment on S³ with its frame angle.
#[derive(Debug, Clone)]
pub struct S3Path {
    pub model: FlowModel,
    traj: Trajectory,
    lifted: Option<LiftedCurve>,
}

impl S3Path {
    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }
    pub fn knots(&self) -> &[f64] {
        self.traj.times()
    }
    pub fn t_start(&self) -> f64 {
        self.traj.t_start()
    }
    pub fn t_end(&self) -> f64 {
        self.traj.t_end()
    }

    fn angle_index(&self) -> usize {
        match self.model {
            FlowModel::Hopf { .. } => 4,
            FlowModel::Revolution { .. } => 6,
            _ => 8,
        }
    }

    pub fn point(&self, t: f64) -> Quat {
        match (&self.lifted, self.model.body()) {
            (Some(l), _) => l.eval(t),
            (None, Some(b)) => {
                let y = self.traj.eval(t);
                b.to_s3(&[y[0], y[1], y[2], y[3]])
            }
            _ => Quat::from_slice(&self.traj.eval(t)).normalized(),
        }
    }

    /// Unwrapped frame angle.
    pub fn angle(&self, t: f64) -> f64 {
        self.traj.eval(t)[self.angle_index()]
    }

    /// Positive multiple of the linearized vector, in S³ (complex) coordinates.
    pub fn direction(&self, t: f64) -> Result<Quat> {
        let y = self.traj.eval(t);
        match self.model {
            FlowModel::Hopf { .. } => {
                let z = Quat::from_slice(&y).normalized();
                let (a, b) = contact_frame(&z);
                Ok(a.scale(y[4].cos()).add(&b.scale(y[4].sin())))
            }
            FlowModel::Ellipsoid { .. } | FlowModel::PerturbedBall { .. } => Ok(Quat([y[4], -y[5], y[6], -y[7]])),
            FlowModel::Revolution { .. } => {
                Err(Error::Precondition("the geodesic model carries only the Jacobi angle, not the vector".into()))
            }
        }
    }

    /// Downstairs unit tangent for the geodesic model.
    pub fn base_state(&self, t: f64) -> Option<UnitTangent> {
        self.lifted.as_ref().map(|_| UnitTangent::from_slice(&self.traj.eval(t)))
    }

    /// `n + 1` evenly spaced points on [a, b].
    pub fn polyline(&self, a: f64, b: f64, n: usize) -> Vec<Quat> {
        (0..=n).map(|k| self.point(a + (b - a) * k as f64 / n as f64)).collect()
    }
}
