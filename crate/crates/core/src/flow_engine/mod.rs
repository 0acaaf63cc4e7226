//! ODE integration with dense output, section crossings, angle unwrapping and
//! winding numbers of planar paths.

mod events;
mod integrate;
mod sampling;
mod winding;

pub use events::{detect_crossings, detect_crossings_fn, CrossingEvent, CrossingReport, EventOptions, Section};
pub use integrate::{integrate, FnSystem, IntegratorOptions, OdeSystem, StepStats, Trajectory};
pub use sampling::{halton_points, par_map, Sampler};
pub use winding::{unwrap_angles, winding, winding_fn, AngleTracker};
