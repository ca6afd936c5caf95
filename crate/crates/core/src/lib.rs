//! Adaptive tracking control of the two-coefficient stochastic regression
//! plant `y(k) = u(k)θ(1) + u(k-1)θ(2) + w(k)` when only multi-threshold
//! quantized outputs are observed.
//!
//! The loop: a projected stochastic-approximation identifier
//! ([`estimator`]) turns weighted quantizer levels into parameter estimates,
//! and a certainty-equivalence law ([`controller`]) inverts the estimated
//! plant to track a reference. [`analysis`] computes the constants that
//! certify boundedness, excitation and the convergence-rate regime, and
//! [`harness`] runs reproducible Monte Carlo experiments.

pub mod analysis;
pub mod config;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod noise;
pub mod plant;
pub mod rng;
pub mod special;

pub use analysis::{ProblemConstants, RateClass};
pub use config::{ConfigFile, ExperimentConfig};
pub use controller::{adaptive_control, oracle_control, ClosedLoop, ControllerState, StepRecord};
pub use error::{AnalysisError, ControlError, EstimatorError, HarnessError, ModelError};
pub use estimator::{estimation_error, predicted_weight, EstimatorState};
pub use harness::{run_montecarlo, run_trial, MonteCarloSummary, TrialRecord};
pub use model::{min_phase_margin, OmegaSet, ParamVec, QuantizerSpec, ReferenceSignal, ReferenceTrace, Regressor};
pub use noise::NoiseModel;
pub use plant::{quantize, weighted_observation, PlantState};
