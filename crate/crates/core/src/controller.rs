//! Certainty-equivalence tracking control and the closed loop that ties
//! plant, sensor, identifier and controller together.

use rand::RngCore;

use crate::error::{ControlError, ModelError};
use crate::estimator::{estimation_error, EstimatorState};
use crate::model::{ParamVec, ReferenceTrace, Regressor};
use crate::plant::PlantState;

/// Default lower bound on `|θ̂(1)|` before dividing by it.
pub const DEFAULT_EPSILON_GUARD: f64 = 1e-6;

/// With the guard disabled, leading estimates below this magnitude abort.
pub const NEAR_ZERO_LEADING: f64 = 1e-12;

/// `u(k+1) = y*(k+1)/d - θ̂(2)/d · u(k)` with
/// `d = sign(θ̂(1)) · max(|θ̂(1)|, epsilon_guard)` and `sign(0) = +1`.
pub fn adaptive_control(theta_hat: ParamVec, y_star_next: f64, u_prev: f64, epsilon_guard: f64) -> f64 {
    let d = guarded_leading(theta_hat.c1, epsilon_guard);
    y_star_next / d - theta_hat.c2 / d * u_prev
}

fn guarded_leading(c1: f64, epsilon_guard: f64) -> f64 {
    let sign = if c1 < 0.0 { -1.0 } else { 1.0 };
    sign * c1.abs().max(epsilon_guard)
}

/// Known-parameter control `ū(k) = y*(k)/θ(1) - θ(2)/θ(1) · ū(k-1)`.
pub fn oracle_control(theta: ParamVec, y_star_next: f64, u_prev: f64) -> Result<f64, ModelError> {
    if theta.c1 == 0.0 {
        return Err(ModelError::ZeroLeadingCoefficient);
    }
    Ok(y_star_next / theta.c1 - theta.c2 / theta.c1 * u_prev)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    /// Most recent input `u(k)`.
    pub u_prev: f64,
    /// `None` disables the guard: near-zero leading estimates become errors.
    pub epsilon_guard: Option<f64>,
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState {
            u_prev: 0.0,
            epsilon_guard: Some(DEFAULT_EPSILON_GUARD),
        }
    }
}

impl ControllerState {
    pub fn new(epsilon_guard: Option<f64>) -> Self {
        ControllerState {
            u_prev: 0.0,
            epsilon_guard,
        }
    }

    /// Computes the next input from the current estimate and records it as
    /// `u_prev`. Returns the input and whether the guard changed the divisor.
    pub fn next_input(
        &mut self,
        theta_hat: ParamVec,
        y_star_next: f64,
    ) -> Result<(f64, bool), ControlError> {
        let (u, guarded) = match self.epsilon_guard {
            Some(eps) => (
                adaptive_control(theta_hat, y_star_next, self.u_prev, eps),
                theta_hat.c1.abs() < eps,
            ),
            None => {
                if theta_hat.c1.abs() < NEAR_ZERO_LEADING {
                    return Err(ControlError::NearZeroLeadingEstimate {
                        value: theta_hat.c1,
                    });
                }
                (
                    adaptive_control(theta_hat, y_star_next, self.u_prev, 0.0),
                    false,
                )
            }
        };
        self.u_prev = u;
        Ok((u, guarded))
    }
}

/// Everything recorded for one closed-loop step `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// `φ(k) = [u(k), u(k-1)]`.
    pub phi: Regressor,
    pub w: f64,
    pub y: f64,
    pub y_star: f64,
    pub level: usize,
    pub s_bar: f64,
    /// `A(k)`, computed from `θ̂(k-1)`.
    pub predicted: f64,
    pub theta_hat_prev: ParamVec,
    pub theta_hat: ParamVec,
    /// `u(k+1)`, computed from `θ̂(k)` and `y*(k+1)`.
    pub u_next: f64,
    /// Whether the epsilon guard was active when `u(k)` was computed.
    pub guard_active: bool,
    pub err_sq: f64,
    pub track_sq: f64,
}

/// Plant, identifier and controller advanced together one step at a time.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub plant: PlantState,
    pub estimator: EstimatorState,
    pub controller: ControllerState,
    reference: ReferenceTrace,
    /// Input `u(k)` to apply at the next step.
    pending_u: f64,
    pending_guarded: bool,
    k: usize,
}

impl ClosedLoop {
    /// Initialization: `u(1) = y*(1)/θ̂(1,0)`. `reference` must cover every
    /// step that will be taken plus one.
    pub fn new(
        plant: PlantState,
        estimator: EstimatorState,
        mut controller: ControllerState,
        reference: ReferenceTrace,
    ) -> Result<Self, ControlError> {
        controller.u_prev = 0.0;
        let (u1, guarded) = controller.next_input(estimator.theta_hat, reference.at(1))?;
        Ok(ClosedLoop {
            plant,
            estimator,
            controller,
            reference,
            pending_u: u1,
            pending_guarded: guarded,
            k: 1,
        })
    }

    /// Index of the next step.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pending_input(&self) -> f64 {
        self.pending_u
    }

    pub fn reference(&self) -> &ReferenceTrace {
        &self.reference
    }

    /// Runs one step with the noise draw `w(k)`:
    /// apply `u(k)`, observe `y(k)`, quantize and weight it, update
    /// `θ̂(k)` with `φ(k)`, then compute `u(k+1)` from `θ̂(k)`.
    pub fn step_with_noise(&mut self, w: f64) -> Result<StepRecord, ControlError> {
        let k = self.k;
        let u = self.pending_u;
        let observed = self.plant.step(u, w);
        let update = self.estimator.update(observed.phi, observed.s_bar)?;
        debug_assert_eq!(update.k, k);
        let y_star = self.reference.at(k);
        let (u_next, guarded_next) = self
            .controller
            .next_input(update.theta_hat, self.reference.at(k + 1))?;
        let record = StepRecord {
            k,
            phi: observed.phi,
            w,
            y: observed.y,
            y_star,
            level: observed.level,
            s_bar: observed.s_bar,
            predicted: update.predicted,
            theta_hat_prev: update.previous,
            theta_hat: update.theta_hat,
            u_next,
            guard_active: self.pending_guarded,
            err_sq: estimation_error(update.theta_hat, self.plant.theta),
            track_sq: (observed.y - y_star).powi(2),
        };
        self.pending_u = u_next;
        self.pending_guarded = guarded_next;
        self.k += 1;
        Ok(record)
    }

    /// [`ClosedLoop::step_with_noise`] with `w(k)` drawn from the plant's
    /// noise law.
    pub fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<StepRecord, ControlError> {
        let w = self.plant.noise.sample(rng);
        self.step_with_noise(w)
    }
}
