use thiserror::Error;

/// Errors raised by the laboratory. Non-convergence of the iterative
/// solvers is not an error; it is carried as a flag in the solve reports.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("point {point:?} lies outside the lattice hull [-{half_width}, {half_width}]^d")]
    OutsideHull { point: Vec<f64>, half_width: f64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("approximate solution requires the symmetric frame: {0}")]
    FrameViolation(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("ordering violated at node {node}: u{upper} - u{lower} = {gap:e}")]
    OrderingViolated {
        node: usize,
        upper: usize,
        lower: usize,
        gap: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("center is not on both free boundaries: {0}")]
    NotOnFreeBoundary(String),

    #[error("unknown experiment `{name}`; registered experiments: {registered}")]
    UnknownExperiment { name: String, registered: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
