//! Assumption checks and the closed-form constants behind the boundedness,
//! excitation and convergence-rate guarantees.

use serde::Serialize;

use crate::error::AnalysisError;
use crate::model::{QuantizerSpec, ReferenceTrace, Regressor};
use crate::noise::NoiseModel;

/// Smallest eigenvalue of the symmetric matrix `[[a, b], [b, c]]`.
pub fn lambda_min_2x2(a: f64, b: f64, c: f64) -> f64 {
    let mid = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    mid - half_diff.hypot(b)
}

/// Running sum of outer products `Σ v vᵀ` over a sliding window, stored as
/// the three distinct entries.
#[derive(Debug, Clone, Copy, Default)]
struct Gram {
    a: f64,
    b: f64,
    c: f64,
}

impl Gram {
    fn of(window: impl Iterator<Item = (f64, f64)>) -> Self {
        window.fold(Gram::default(), |g, (x, y)| Gram {
            a: g.a + x * x,
            b: g.b + x * y,
            c: g.c + y * y,
        })
    }

    fn lambda_min(&self) -> f64 {
        lambda_min_2x2(self.a, self.b, self.c)
    }
}

/// Minimum over `k ∈ [1, K-h+1]` of
/// `λ_min(Σ_{i=k+1}^{k+h-1} 𝒴(i)𝒴(i)ᵀ)` with `𝒴(i) = [y*(i), y*(i-1)]`,
/// where `K` is the trace length. Each window is summed afresh so the result
/// does not depend on accumulated rounding.
///
/// Windows reaching past the trace are skipped, so with `K` values the last
/// window ends at `i = K`.
pub fn check_reference_excitation(trace: &ReferenceTrace, h: usize) -> Result<f64, AnalysisError> {
    if h <= 2 {
        return Err(AnalysisError::WindowTooShort { h });
    }
    let horizon = trace.len();
    if horizon < h {
        return Err(AnalysisError::HorizonTooShort { horizon, h });
    }
    let min = (1..=horizon + 1 - h)
        .map(|k| Gram::of((k + 1..=k + h - 1).map(|i| (trace.at(i), trace.at(i - 1)))).lambda_min())
        .fold(f64::INFINITY, f64::min);
    Ok(min)
}

/// Minimum of the noise density on `[-d1, d1]`.
///
/// Symmetric unimodal laws attain it at the edge; anything else falls back
/// to a dense grid with step `1e-4 · d1`.
pub fn f_star(noise: &NoiseModel, d1: f64) -> Result<f64, AnalysisError> {
    if !(d1.is_finite() && d1 >= 0.0) {
        return Err(AnalysisError::InvalidInterval(d1));
    }
    if noise.is_symmetric_unimodal() || d1 == 0.0 {
        return Ok(noise.pdf(d1));
    }
    let n = 20_000;
    let step = 2.0 * d1 / n as f64;
    Ok((0..=n)
        .map(|i| noise.pdf(-d1 + i as f64 * step))
        .fold(f64::INFINITY, f64::min))
}

/// Regime of the mean-square convergence rate, selected by comparing the
/// rate exponent `ζ` with 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum RateClass {
    /// `ζ > 1`: `O(1/k)`.
    OneOverK,
    /// `ζ = 1`: `O(ln k / k)`.
    LogKOverK,
    /// `ζ < 1`: `O(k^-ζ)`.
    Power { zeta: f64 },
}

impl RateClass {
    pub fn from_zeta(zeta: f64) -> Self {
        if zeta > 1.0 {
            RateClass::OneOverK
        } else if zeta == 1.0 {
            RateClass::LogKOverK
        } else {
            RateClass::Power { zeta }
        }
    }

    pub fn label(&self) -> String {
        match self {
            RateClass::OneOverK => "one_over_k".to_string(),
            RateClass::LogKOverK => "log_k_over_k".to_string(),
            RateClass::Power { zeta } => format!("power({zeta:e})"),
        }
    }
}

/// Inputs to [`derive_constants`].
#[derive(Debug, Clone)]
pub struct ConstantInputs<'a> {
    pub y_bar: f64,
    pub h: usize,
    pub delta_y: f64,
    pub theta_lower: f64,
    pub theta_bar: f64,
    pub m_bar: f64,
    pub quantizer: &'a QuantizerSpec,
    pub noise: &'a NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub y_bar: f64,
    pub h: usize,
    pub delta_y: f64,
    pub theta_lower: f64,
    pub theta_bar: f64,
    pub m_bar: f64,
    /// Input bound `√2·ȳ*/(θ̲ - θ̄)` on `‖φ(k)‖`.
    pub input_bound: f64,
    /// Excitation constant `δ_y / (4(h-1)M̄²)`.
    pub delta: f64,
    /// `max(|C_m|, |C_1|) + M·M̄`.
    pub d1: f64,
    pub f_star: f64,
    /// `2(β_0 - β_m)·δ·f*/h`.
    pub zeta: f64,
    pub rate_class: RateClass,
}

pub fn input_bound(y_bar: f64, theta_lower: f64, theta_bar: f64) -> f64 {
    std::f64::consts::SQRT_2 * y_bar / (theta_lower - theta_bar)
}

pub fn excitation_constant(delta_y: f64, h: usize, m_bar: f64) -> f64 {
    delta_y / (4.0 * (h as f64 - 1.0) * m_bar * m_bar)
}

pub fn interval_half_width(quantizer: &QuantizerSpec, input_bound: f64, m_bar: f64) -> f64 {
    let c = quantizer.thresholds();
    c[c.len() - 1].abs().max(c[0].abs()) + input_bound * m_bar
}

pub fn rate_exponent(quantizer: &QuantizerSpec, delta: f64, f_star: f64, h: usize) -> f64 {
    2.0 * quantizer.weight_span() * delta * f_star / h as f64
}

pub fn derive_constants(inputs: &ConstantInputs<'_>) -> Result<ProblemConstants, AnalysisError> {
    let ConstantInputs {
        y_bar,
        h,
        delta_y,
        theta_lower,
        theta_bar,
        m_bar,
        quantizer,
        noise,
    } = *inputs;
    if h <= 2 {
        return Err(AnalysisError::WindowTooShort { h });
    }
    if !(0.0 < theta_bar && theta_bar < theta_lower && theta_lower <= m_bar) {
        return Err(AnalysisError::InvalidBounds {
            theta_lower,
            theta_bar,
            m_bar,
        });
    }
    let input_bound = input_bound(y_bar, theta_lower, theta_bar);
    let delta = excitation_constant(delta_y, h, m_bar);
    let d1 = interval_half_width(quantizer, input_bound, m_bar);
    let f_star = f_star(noise, d1)?;
    let zeta = rate_exponent(quantizer, delta, f_star, h);
    Ok(ProblemConstants {
        y_bar,
        h,
        delta_y,
        theta_lower,
        theta_bar,
        m_bar,
        input_bound,
        delta,
        d1,
        f_star,
        zeta,
        rate_class: RateClass::from_zeta(zeta),
    })
}

/// Windowed excitation of a regressor trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationTrace {
    /// `λ_min(Σ_{i=k+2}^{k+h+1} φ(i)φ(i)ᵀ)` for `k = 0, 1, …` while the
    /// window fits in the trajectory.
    pub lambda_min: Vec<f64>,
    /// First window index from which every later window exceeds the
    /// threshold, or `None` if the last window does not.
    pub k0: Option<usize>,
    /// Smallest trace value from `k0` on.
    pub min_after_k0: Option<f64>,
}

/// `phis[i-1]` holds `φ(i)`. Windows are indexed by `k ≥ 0` and cover
/// `φ(k+2)..=φ(k+h+1)`.
pub fn excitation_trace(phis: &[Regressor], h: usize, threshold: f64) -> ExcitationTrace {
    let n = phis.len();
    let windows = (n + 1).saturating_sub(h + 1);
    let lambda_min: Vec<f64> = (0..windows)
        .map(|k| Gram::of(phis[k + 1..k + 1 + h].iter().map(|p| (p.u_curr, p.u_prev))).lambda_min())
        .collect();
    let tail_start = lambda_min
        .iter()
        .rposition(|&l| l <= threshold)
        .map_or(0, |i| i + 1);
    let (k0, min_after_k0) = if tail_start < lambda_min.len() {
        let min = lambda_min[tail_start..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        (Some(tail_start), Some(min))
    } else {
        (None, None)
    };
    ExcitationTrace {
        lambda_min,
        k0,
        min_after_k0,
    }
}
