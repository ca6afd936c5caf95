use thiserror::Error;

/// Construction and validation failures for the shared problem data.
///
/// Every message starts with the variant name so callers (and the CLI) can
/// report exactly which invariant was violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("EmptyQuantizer: at least one finite threshold is required")]
    EmptyQuantizer,
    #[error("NonAscendingThresholds: C[{index}] = {lower} is not below C[{next}] = {upper}", next = index + 1)]
    NonAscendingThresholds { index: usize, lower: f64, upper: f64 },
    #[error("NonDecreasingWeights: beta[{index}] = {upper} is not above beta[{next}] = {lower}", next = index + 1)]
    NonDecreasingWeights { index: usize, upper: f64, lower: f64 },
    #[error("WeightCountMismatch: {thresholds} thresholds need {} weights, got {weights}", thresholds + 1)]
    WeightCountMismatch { thresholds: usize, weights: usize },
    #[error("NonFiniteValue: {what} must be finite")]
    NonFiniteValue { what: &'static str },
    #[error("LevelOutOfRange: level {level} outside 0..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("InvalidOmega: {0}")]
    InvalidOmega(String),
    #[error("InvalidNoise: {0}")]
    InvalidNoise(String),
    #[error("InvalidReference: {0}")]
    InvalidReference(String),
    #[error("ReferenceTooShort: table holds {available} values but {required} are needed")]
    ReferenceTooShort { available: usize, required: usize },
    #[error("ZeroLeadingCoefficient: the first parameter coefficient must be nonzero")]
    ZeroLeadingCoefficient,
    #[error("MinimumPhaseViolated: margin {margin} does not exceed mu = {mu}")]
    MinimumPhaseViolated { margin: f64, mu: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("InvalidObservation: {value} is not one of the quantizer weights")]
    InvalidObservation { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("NearZeroLeadingEstimate: |theta_hat(1)| = {value:e} with the epsilon guard disabled")]
    NearZeroLeadingEstimate { value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("WindowTooShort: window length h = {h} must exceed 2")]
    WindowTooShort { h: usize },
    #[error("HorizonTooShort: horizon {horizon} is shorter than the window length {h}")]
    HorizonTooShort { horizon: usize, h: usize },
    #[error("InvalidBounds: need 0 < theta_bar < theta_lower <= m_bar, got theta_bar = {theta_bar}, theta_lower = {theta_lower}, m_bar = {m_bar}")]
    InvalidBounds { theta_lower: f64, theta_bar: f64, m_bar: f64 },
    #[error("InvalidInterval: D1 = {0} must be nonnegative and finite")]
    InvalidInterval(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("TrialDiverged: trial {trial} at step {step}: {reason}")]
    TrialDiverged { trial: usize, step: usize, reason: String },
    #[error("TooManyDiverged: {diverged} of {trials} trials diverged (first: {first})")]
    TooManyDiverged { diverged: usize, trials: usize, first: String },
}
