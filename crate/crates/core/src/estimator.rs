//! Recursive projection identifier driven by weighted quantized
//! observations.
//!
//! ```text
//! A(k)  = Σ_p β_p [F(C_{p+1} - φ(k)ᵀθ̂(k-1)) - F(C_p - φ(k)ᵀθ̂(k-1))]
//! θ̂(k) = Π_Ω(θ̂(k-1) + φ(k)/k · (A(k) - S̄(k)))
//! ```

use crate::error::EstimatorError;
use crate::model::{OmegaSet, ParamVec, QuantizerSpec, Regressor};
use crate::noise::NoiseModel;

/// Conditional mean of `S̄` under the estimate `theta_hat`.
///
/// Buckets are summed in ascending level order. The outer edges use the
/// exact limits `F(-∞) = 0` and `F(+∞) = 1`.
pub fn predicted_weight(
    theta_hat: ParamVec,
    phi: Regressor,
    quantizer: &QuantizerSpec,
    noise: &NoiseModel,
) -> f64 {
    predicted_weight_at(theta_hat.dot(&phi), quantizer, noise)
}

/// [`predicted_weight`] for a given prediction `z = φᵀθ̂`.
pub fn predicted_weight_at(z: f64, quantizer: &QuantizerSpec, noise: &NoiseModel) -> f64 {
    let thresholds = quantizer.thresholds();
    let m = thresholds.len();
    let mut lower_cdf = 0.0;
    let mut acc = 0.0;
    for (p, beta) in quantizer.weights().iter().enumerate() {
        let upper_cdf = if p == m {
            1.0
        } else {
            noise.cdf(thresholds[p] - z)
        };
        acc += beta * (upper_cdf - lower_cdf);
        lower_cdf = upper_cdf;
    }
    acc
}

/// `‖θ̂ - θ‖²`.
pub fn estimation_error(theta_hat: ParamVec, theta: ParamVec) -> f64 {
    theta_hat.distance_sq(&theta)
}

#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub theta_hat: ParamVec,
    /// Number of updates applied so far; the next update uses gain
    /// `1 / (steps + 1)`.
    pub steps: usize,
    pub omega: OmegaSet,
    pub quantizer: QuantizerSpec,
    pub noise: NoiseModel,
}

/// Values produced by one identification step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub k: usize,
    pub predicted: f64,
    pub previous: ParamVec,
    pub theta_hat: ParamVec,
}

impl EstimatorState {
    /// `theta_hat0` is projected onto `omega` if it lies outside.
    pub fn new(
        theta_hat0: ParamVec,
        omega: OmegaSet,
        quantizer: QuantizerSpec,
        noise: NoiseModel,
    ) -> Self {
        EstimatorState {
            theta_hat: omega.project(theta_hat0),
            steps: 0,
            omega,
            quantizer,
            noise,
        }
    }

    /// Index `k` of the next update.
    pub fn next_k(&self) -> usize {
        self.steps + 1
    }

    /// One projected stochastic-approximation step with regressor `phi` and
    /// weighted observation `s_bar`, which must be one of the quantizer
    /// weights.
    pub fn update(&mut self, phi: Regressor, s_bar: f64) -> Result<UpdateInfo, EstimatorError> {
        if !self.quantizer.weights().contains(&s_bar) {
            return Err(EstimatorError::InvalidObservation { value: s_bar });
        }
        let k = self.next_k();
        let previous = self.theta_hat;
        let predicted = predicted_weight(previous, phi, &self.quantizer, &self.noise);
        let gain = (predicted - s_bar) / k as f64;
        let raw = ParamVec::new(
            previous.c1 + phi.u_curr * gain,
            previous.c2 + phi.u_prev * gain,
        );
        self.theta_hat = self.omega.project(raw);
        self.steps = k;
        Ok(UpdateInfo {
            k,
            predicted,
            previous,
            theta_hat: self.theta_hat,
        })
    }

    /// `(‖φ‖ / k)(β_0 - β_m)`, the largest possible move at step `k`.
    pub fn step_bound(&self, phi: Regressor, k: usize) -> f64 {
        phi.norm() / k as f64 * self.quantizer.weight_span()
    }
}
