use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} exhausted")]
    MaxSteps(usize),
    #[error("state left the constraint set at t = {t}: {what}")]
    ConstraintBlowup { t: f64, what: String },
    #[error("point violates the surface constraint by {residual:e}")]
    OffSurface { residual: f64 },
    #[error("degenerate path: {0}")]
    DegeneratePath(String),
    #[error("angular resolution not reached after refinement: {0}")]
    Resolution(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("lift jumped to the antipodal sheet near t = {t}; retry with a step below {suggested:e}")]
    LiftJump { t: f64, suggested: f64 },
    #[error("no return to the section within {cap}")]
    NoReturn { cap: f64 },
    #[error("no canonical lift in (2L/3, 3L/2) for displacement {raw}")]
    LiftSelection { raw: f64 },
    #[error("body is not strictly convex: minimal eigenvalue {0}")]
    NotStrictlyConvex(f64),
    #[error("loops too close for a reliable linking number (distance {0:e})")]
    LoopsTooClose(f64),
    #[error("rotation number did not converge: {0}")]
    NonConvergent(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
