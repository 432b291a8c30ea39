use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("degenerate face {face} (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("zero vector at index {0}")]
    ZeroVector(usize),

    #[error("linear solve failed: relative residual {residual:e} ({reason})")]
    Solve { residual: f64, reason: String },

    #[error("conformal factor vanishes on face {0}")]
    ConformalFactorZero(usize),

    #[error("Beltrami coefficient out of range on face {face}: |mu| = {modulus}")]
    BeltramiOutOfRange { face: usize, modulus: f64 },

    #[error("composition denominator near zero on face {0}")]
    DenominatorNearZero(usize),

    #[error("overlap correction failed: {flips} flipped faces remain")]
    CorrectionFailed { flips: usize },

    #[error("point {0} coincides with the projection pole")]
    Pole(usize),

    #[error("the two normalization poles coincide")]
    CoincidentPoles,

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("nonpositive density at vertex {index}: {value:e}")]
    NonpositiveDensity { index: usize, value: f64 },

    #[error("step diverged: max displacement {displacement} exceeds {bound}")]
    StepDiverged { displacement: f64, bound: f64 },

    #[error("target vertex count {0} is below the icosahedron minimum of 12")]
    TargetTooSmall(usize),

    #[error("sample {sample} could not be located (best residual {residual:e})")]
    LocationFailure { sample: usize, residual: f64 },

    #[error("connectivity mismatch: {0}")]
    ConnectivityMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors raised by the iterative numerics rather than by bad input.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::Solve { .. }
                | Error::CorrectionFailed { .. }
                | Error::Convergence(_)
                | Error::StepDiverged { .. }
                | Error::LocationFailure { .. }
        )
    }
}
