use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Sellmeier radicand {radicand} is not positive at {lambda_um} µm")]
    IndexDomain { lambda_um: f64, radicand: f64 },

    #[error("phase mismatch keeps a constant sign over (0°, 90°)")]
    NoPhaseMatchingRoot,

    #[error("finite-difference derivatives did not settle (last relative change {0:e})")]
    DerivativeNotConverged(f64),

    #[error("JSA support is truncated by the grid: {0}")]
    SupportTruncated(String),

    #[error("mode basis not converged: lambda_max/lambda_0 = {0}")]
    BasisNotConverged(f64),

    #[error("z-propagation did not converge: step halving changed the map by {0:e}")]
    PropagationNotConverged(f64),

    #[error("tail mass {mass:e} beyond n = {n_max} exceeds tolerance")]
    TailMass { mass: f64, n_max: usize },

    #[error("corrected g2 undefined: mean {mean} does not exceed vacuum mean {mean_vac}")]
    G2Domain { mean: f64, mean_vac: f64 },

    #[error("no signal injected in any mode")]
    NoSignal,

    #[error("fit optimum sits at the search bound g = {0:e}")]
    BoundarySolution(f64),

    #[error("region `{0}` is empty")]
    EmptyRegion(String),

    #[error("shot stack of {0} bytes exceeds the memory budget")]
    MemoryBudget(usize),

    #[error("phase retrieval stalled at signal-region error {0}")]
    RetrievalStalled(f64),

    #[error("malformed shot stack: {0}")]
    Format(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of an iterative or truncated numerical method.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoPhaseMatchingRoot
                | Error::DerivativeNotConverged(_)
                | Error::SupportTruncated(_)
                | Error::BasisNotConverged(_)
                | Error::PropagationNotConverged(_)
                | Error::TailMass { .. }
                | Error::G2Domain { .. }
                | Error::BoundarySolution(_)
                | Error::RetrievalStalled(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
