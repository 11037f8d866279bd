use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by the numerical pipelines.
///
/// The variants are grouped by the exit code the command line maps them to:
/// configuration problems, numerical diagnostics, and resource failures
/// (non-convergence, boundary contamination).
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error(
        "diffusion is not elliptic: smallest eigenvalue {min_eig:.3e} at x = ({x:.4}, {y:.4})"
    )]
    NonElliptic { min_eig: f64, x: f64, y: f64 },

    #[error(
        "newton iteration did not converge after {iters} iterations (residual {residual:.3e})"
    )]
    NewtonDiverged { iters: usize, residual: f64 },
    #[error("power iteration did not converge (residual {residual:.3e})")]
    EigenNotConverged { residual: f64 },
    #[error("principal eigenfunction changes sign (min {min:.3e})")]
    EigenSignChange { min: f64 },
    #[error("no stable steady state found")]
    NoStableStates,
    #[error("the zero state is missing from the stable states")]
    ZeroStateMissing,
    #[error("marginally stable state {id} (eigenvalue {lambda:.3e}) blocks terrace construction")]
    MarginalState { id: String, lambda: f64 },
    #[error("stable states are not totally ordered ({0} intersecting pairs)")]
    Unordered(usize),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("non-finite value at t = {t:.4}")]
    NonFinite { t: f64 },
    #[error("solution left the invariant region by {excess:.3e} at t = {t:.4}")]
    Overshoot { excess: f64, t: f64 },
    #[error("front came within {distance:.2} periods of a clamped boundary at t = {t:.3}")]
    BoundaryContamination { distance: f64, t: f64 },

    #[error("level sets move at distinct speeds {speeds:?}; the pair is not joined by one front")]
    MultipleSpeeds { speeds: Vec<f64> },
    #[error("speed regression is poor (R^2 = {r2:.6})")]
    PoorFit { r2: f64 },
    #[error("too few samples in the fit window ({0})")]
    ShortWindow(usize),
    #[error("zero speed ({0:.3e}): profile change of variables is not invertible")]
    ZeroSpeed(f64),
    #[error("front sign violation: {0}")]
    SignViolation(String),
    #[error("merged speed {merged:.5} outside bracket [{low:.5}, {high:.5}]")]
    BracketViolation { merged: f64, low: f64, high: f64 },

    #[error("no plateau resolved before the horizon")]
    NoPlateaus,
    #[error("plateau near mean {mean:.4} matches no known state")]
    UnknownPlateau { mean: f64 },
    #[error("no invasion detected by t = {t:.2}")]
    NoInvasion { t: f64 },

    #[error("geometry: {0}")]
    Geometry(String),
    #[error("no terrace front crosses the requested state")]
    NoCrossingFront,
    #[error("certificate failed: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command line.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Config(_) | Dimension(_) | NonElliptic { .. } | Io(_) | Json(_) => 2,
            NewtonDiverged { .. }
            | EigenNotConverged { .. }
            | NonFinite { .. }
            | BoundaryContamination { .. }
            | NoInvasion { .. }
            | NoPlateaus
            | LinearSolve(_) => 4,
            _ => 3,
        }
    }
}
