use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variant names double as the machine-readable error names printed by the
/// command line front end, see [`Error::name`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mu = 0 is excluded")]
    MuZero,
    #[error("p = 1 is excluded")]
    PowerOne,
    #[error("mu = {0} is not below the Hardy constant 1/4 of the ball")]
    MuAboveHardy(f64),
    #[error("p = {power} > 1 with mu = {mu} <= -mu* = {neg_mu_star}: no nontrivial solutions")]
    NoSolutionRegime { mu: f64, power: f64, neg_mu_star: f64 },
    #[error("non-positive input: {0}")]
    NonPositive(String),
    #[error("wrong regime: {0}")]
    WrongRegime(String),
    #[error("launch offset h = {h} too large: remainder estimate {estimate:e} exceeds {limit:e}")]
    HTooLarge { h: f64, estimate: f64, limit: f64 },
    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),
    #[error("step budget of {0} steps exhausted")]
    MaxSteps(usize),
    #[error("refinement did not converge after {refinements} refinements (last change {last_change:e})")]
    NoConvergence { refinements: usize, last_change: f64 },
    #[error("mu = {0} must be negative")]
    WrongSign(f64),
    #[error("degenerate indicial equation: discriminant {0}")]
    Degenerate(f64),
    #[error("coefficient extrapolation did not converge: history {history:?}")]
    NotConverged { history: Vec<f64> },
    #[error("too few samples: need {needed}, have {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("trajectory did not reach the boundary window: {0}")]
    NoBoundaryReached(String),
    #[error("could not bracket the threshold within [{low:e}, {high:e}]")]
    BracketFailure { low: f64, high: f64 },
    #[error("threshold bracket [{low}, {high}] could not be resolved below the requested width")]
    Unresolved { low: f64, high: f64 },
    #[error("shot from u0 = {0} does not blow up")]
    NotBlowup(f64),
    #[error("target coefficient {0} is outside the reachable range")]
    TargetUnreachable(f64),
    #[error("target coefficient {0} must be positive")]
    NonPositiveTarget(f64),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::MuZero => "MuZero",
            Error::PowerOne => "PowerOne",
            Error::MuAboveHardy(_) => "MuAboveHardy",
            Error::NoSolutionRegime { .. } => "NoSolutionRegime",
            Error::NonPositive(_) => "NonPositive",
            Error::WrongRegime(_) => "WrongRegime",
            Error::HTooLarge { .. } => "HTooLarge",
            Error::InvalidOptions(_) => "InvalidOptions",
            Error::MaxSteps(_) => "MaxSteps",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::WrongSign(_) => "WrongSign",
            Error::Degenerate(_) => "Degenerate",
            Error::NotConverged { .. } => "NotConverged",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::NoBoundaryReached(_) => "NoBoundaryReached",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::Unresolved { .. } => "Unresolved",
            Error::NotBlowup(_) => "NotBlowup",
            Error::TargetUnreachable(_) => "TargetUnreachable",
            Error::NonPositiveTarget(_) => "NonPositiveTarget",
        }
    }
}
