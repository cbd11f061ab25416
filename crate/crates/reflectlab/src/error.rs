use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("nonpositive density: {0}")]
    NonpositiveDensity(f64),
    #[error("vacuum state: pi argument {0} is nonpositive")]
    Vacuum(f64),
    #[error("degenerate shock: zero velocity jump")]
    DegenerateShock,
    #[error("no admissible compressive root: {0}")]
    NoCompressiveRoot(String),
    #[error("inadmissible configuration: {0}")]
    Inadmissible(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("root not bracketed: {0}")]
    NotBracketed(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("region not uniformly elliptic: {0}")]
    Ellipticity(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("coordinate transform breakdown: {0}")]
    TransformBreakdown(String),
    #[error("state validity lost at ({x}, {y}): {reason}")]
    StateValidity { x: f64, y: f64, reason: String },
    #[error("newton did not converge after {iterations} iterations, last residual {residual:e}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("solution left the weak-type transonic regime: {0}")]
    RegimeExit(String),
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
