//! Stochastic regression plant `y(k) = u(k)θ(1) + u(k-1)θ(2) + w(k)` and the
//! multi-threshold sensor.

use crate::error::ModelError;
use crate::model::{min_phase_margin, ParamVec, QuantizerSpec, Regressor};
use crate::noise::NoiseModel;

/// Level `p` such that `C_p < y ≤ C_{p+1}`, with `C_0 = -∞` and
/// `C_{m+1} = +∞`. Buckets are closed on the right.
pub fn quantize(spec: &QuantizerSpec, y: f64) -> usize {
    spec.thresholds().partition_point(|&c| c < y)
}

/// `β_p` for level `p`.
pub fn weighted_observation(spec: &QuantizerSpec, level: usize) -> Result<f64, ModelError> {
    spec.weights()
        .get(level)
        .copied()
        .ok_or(ModelError::LevelOutOfRange {
            level,
            max: spec.m(),
        })
}

#[derive(Debug, Clone)]
pub struct PlantState {
    pub theta: ParamVec,
    pub quantizer: QuantizerSpec,
    pub noise: NoiseModel,
    /// Last applied input, 0 before the first step.
    pub u_prev: f64,
    /// Index of the next step, starting at 1.
    pub k: usize,
}

/// What the sensor reports for one step, plus the hidden output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantStep {
    pub phi: Regressor,
    pub y: f64,
    pub level: usize,
    pub s_bar: f64,
}

impl PlantState {
    pub fn new(theta: ParamVec, quantizer: QuantizerSpec, noise: NoiseModel) -> Self {
        PlantState {
            theta,
            quantizer,
            noise,
            u_prev: 0.0,
            k: 1,
        }
    }

    /// Rejects `θ` whose minimum-phase margin does not exceed `mu`.
    pub fn with_phase_check(self, mu: f64) -> Result<Self, ModelError> {
        let margin = min_phase_margin(self.theta);
        if margin > mu {
            Ok(self)
        } else {
            Err(ModelError::MinimumPhaseViolated { margin, mu })
        }
    }

    /// `y = u θ(1) + u_prev θ(2) + w`; does not advance the plant.
    pub fn output(&self, u: f64, w: f64) -> f64 {
        self.theta.dot(&Regressor::new(u, self.u_prev)) + w
    }

    /// Applies `u(k)` with noise `w(k)` and advances to `k + 1`.
    pub fn step(&mut self, u: f64, w: f64) -> PlantStep {
        let phi = Regressor::new(u, self.u_prev);
        let y = self.output(u, w);
        let level = quantize(&self.quantizer, y);
        let s_bar = self.quantizer.weights()[level];
        self.u_prev = u;
        self.k += 1;
        PlantStep {
            phi,
            y,
            level,
            s_bar,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_plant() -> PlantState {
        PlantState::new(
            ParamVec::new(4.0, 1.0),
            QuantizerSpec::standard(),
            NoiseModel::standard_normal(),
        )
    }

    #[test]
    fn output_examples() {
        let mut plant = example_plant();
        assert!((plant.output(0.2, 0.0) - 0.8).abs() < 1e-15);
        assert_eq!(plant.output(0.0, 0.0), 0.0);
        plant.u_prev = 0.25;
        assert!((plant.output(0.5, -0.3) - 1.95).abs() < 1e-15);
        // output does not mutate
        assert_eq!(plant.u_prev, 0.25);
        assert_eq!(plant.k, 1);
    }

    #[test]
    fn quantize_examples() {
        let q = QuantizerSpec::standard();
        assert_eq!(quantize(&q, 1.5), 2);
        assert_eq!(quantize(&q, 0.0), 1);
        assert_eq!(quantize(&q, -3.0), 0);
        assert_eq!(quantize(&q, -2.0), 0);
        assert_eq!(quantize(&q, 2.0), 2);
        assert_eq!(quantize(&q, 2.0 + 1e-12), 3);
    }

    #[test]
    fn weight_examples() {
        let q = QuantizerSpec::standard();
        assert_eq!(weighted_observation(&q, 2).unwrap(), -50.0);
        assert_eq!(weighted_observation(&q, 0).unwrap(), 80.0);
        assert_eq!(
            weighted_observation(&q, 4).unwrap_err(),
            ModelError::LevelOutOfRange { level: 4, max: 3 }
        );
    }

    #[test]
    fn step_advances() {
        let mut plant = example_plant();
        let s = plant.step(0.2, 0.0);
        assert_eq!(s.level, 2);
        assert_eq!(s.s_bar, -50.0);
        assert_eq!(plant.k, 2);
        assert_eq!(plant.u_prev, 0.2);
        let s = plant.step(0.5, 0.0);
        assert_eq!(s.phi, Regressor::new(0.5, 0.2));
        assert!((s.y - 2.2).abs() < 1e-15);
    }

    #[test]
    fn phase_check() {
        assert!(example_plant().with_phase_check(0.5).is_ok());
        let bad = PlantState::new(
            ParamVec::new(1.0, 2.0),
            QuantizerSpec::standard(),
            NoiseModel::standard_normal(),
        );
        assert!(bad.with_phase_check(0.1).is_err());
    }

    /// Mean of S̄ over many draws matches Σ β_p [F(C_{p+1} - φᵀθ) - F(C_p - φᵀθ)].
    #[test]
    fn empirical_weight_law() {
        let mut plant = example_plant();
        let q = plant.quantizer.clone();
        let noise = plant.noise;
        let u = 0.3;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            plant.u_prev = 0.1;
            let w = noise.sample(&mut rng);
            let s = plant.step(u, w).s_bar;
            sum += s;
            sum_sq += s * s;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let z = 4.0 * u + 1.0 * 0.1;
        let expected: f64 = (0..=q.m())
            .map(|p| {
                let (lo, hi) = q.bucket(p);
                q.weights()[p] * (noise.cdf(hi - z) - noise.cdf(lo - z))
            })
            .sum();
        let se = (var / n as f64).sqrt();
        assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");
    }
}
