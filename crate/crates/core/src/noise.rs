//! Noise laws with a known distribution function.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::special::{normal_cdf, normal_pdf};

/// Zero-mean i.i.d. noise with closed-form CDF and density.
///
/// `Zero` is the degenerate point mass at 0. It is useful for noiseless
/// checks of the closed loop but has no density, so it cannot certify a
/// positive `f*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    Logistic { scale: f64 },
    Uniform { half_width: f64 },
    Zero,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Gaussian { sigma: 1.0 }
    }
}

impl NoiseModel {
    pub fn standard_normal() -> Self {
        NoiseModel::Gaussian { sigma: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (name, v) = match *self {
            NoiseModel::Gaussian { sigma } => ("sigma", sigma),
            NoiseModel::Logistic { scale } => ("scale", scale),
            NoiseModel::Uniform { half_width } => ("half_width", half_width),
            NoiseModel::Zero => return Ok(()),
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(ModelError::InvalidNoise(format!(
                "{name} must be positive and finite, got {v}"
            )))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => normal_cdf(x / sigma),
            NoiseModel::Logistic { scale } => {
                // 1 / (1 + e^{-x/s}), written to avoid overflow on either tail
                let z = x / scale;
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            NoiseModel::Uniform { half_width } => {
                ((x + half_width) / (2.0 * half_width)).clamp(0.0, 1.0)
            }
            NoiseModel::Zero => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => normal_pdf(x / sigma) / sigma,
            NoiseModel::Logistic { scale } => {
                let e = (-(x / scale).abs()).exp();
                e / (scale * (1.0 + e) * (1.0 + e))
            }
            NoiseModel::Uniform { half_width } => {
                if x.abs() <= half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            NoiseModel::Zero => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::Logistic { scale } => scale * scale * std::f64::consts::PI.powi(2) / 3.0,
            NoiseModel::Uniform { half_width } => half_width * half_width / 3.0,
            NoiseModel::Zero => 0.0,
        }
    }

    /// All non-degenerate kinds are symmetric about 0 with a density that is
    /// nonincreasing in `|x|`.
    pub fn is_symmetric_unimodal(&self) -> bool {
        !matches!(self, NoiseModel::Zero)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => Normal::new(0.0, sigma)
                .expect("validated sigma")
                .sample(rng),
            NoiseModel::Logistic { scale } => {
                let u: f64 = rng.random();
                // u == 0 has probability 2^-53; map it to the smallest positive draw
                let u = u.max(f64::MIN_POSITIVE);
                scale * (u / (1.0 - u)).ln()
            }
            NoiseModel::Uniform { half_width } => Uniform::new_inclusive(-half_width, half_width)
                .expect("validated half width")
                .sample(rng),
            NoiseModel::Zero => 0.0,
        }
    }
}
