//! Problem data shared by every stage of the loop: parameter vectors,
//! regressors, the multi-threshold quantizer, the projection set and the
//! reference signal.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Two-dimensional parameter (or estimate) vector.
///
/// `c1` multiplies the current input `u(k)`, `c2` the previous input `u(k-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ParamVec {
    pub c1: f64,
    pub c2: f64,
}

impl From<[f64; 2]> for ParamVec {
    fn from(v: [f64; 2]) -> Self {
        ParamVec { c1: v[0], c2: v[1] }
    }
}

impl From<ParamVec> for [f64; 2] {
    fn from(p: ParamVec) -> Self {
        [p.c1, p.c2]
    }
}

impl ParamVec {
    pub const fn new(c1: f64, c2: f64) -> Self {
        ParamVec { c1, c2 }
    }

    pub fn is_finite(&self) -> bool {
        self.c1.is_finite() && self.c2.is_finite()
    }

    pub fn dot(&self, phi: &Regressor) -> f64 {
        self.c1 * phi.u_curr + self.c2 * phi.u_prev
    }

    pub fn distance_sq(&self, other: &ParamVec) -> f64 {
        let d1 = self.c1 - other.c1;
        let d2 = self.c2 - other.c2;
        d1 * d1 + d2 * d2
    }

    pub fn distance(&self, other: &ParamVec) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.c1.hypot(self.c2)
    }
}

/// Regressor `φ(k) = [u(k), u(k-1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Regressor {
    pub u_curr: f64,
    pub u_prev: f64,
}

impl Regressor {
    pub const fn new(u_curr: f64, u_prev: f64) -> Self {
        Regressor { u_curr, u_prev }
    }

    pub fn norm_sq(&self) -> f64 {
        self.u_curr * self.u_curr + self.u_prev * self.u_prev
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

/// `min_{|ω| ≤ 1} |θ(1) + θ(2)ω|`.
///
/// The minimum of an affine function's modulus over `[-1, 1]` is reached at
/// an endpoint unless the root lies inside, which gives
/// `max(0, |θ(1)| - |θ(2)|)`.
pub fn min_phase_margin(theta: ParamVec) -> f64 {
    (theta.c1.abs() - theta.c2.abs()).max(0.0)
}

/// Ascending finite thresholds `C_1 < … < C_m` and strictly decreasing
/// weights `β_0 > … > β_m`. The outer thresholds `C_0 = -∞` and
/// `C_{m+1} = +∞` are implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuantizer", into = "RawQuantizer")]
pub struct QuantizerSpec {
    thresholds: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawQuantizer {
    thresholds: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawQuantizer> for QuantizerSpec {
    type Error = ModelError;
    fn try_from(raw: RawQuantizer) -> Result<Self, Self::Error> {
        QuantizerSpec::new(raw.thresholds, raw.weights)
    }
}

impl From<QuantizerSpec> for RawQuantizer {
    fn from(q: QuantizerSpec) -> Self {
        RawQuantizer {
            thresholds: q.thresholds,
            weights: q.weights,
        }
    }
}

/// Checks every quantizer invariant on raw slices.
pub fn validate_quantizer(thresholds: &[f64], weights: &[f64]) -> Result<(), ModelError> {
    if thresholds.is_empty() {
        return Err(ModelError::EmptyQuantizer);
    }
    if thresholds.iter().chain(weights).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteValue {
            what: "quantizer thresholds and weights",
        });
    }
    if let Some(i) = thresholds.windows(2).position(|w| w[0] >= w[1]) {
        return Err(ModelError::NonAscendingThresholds {
            index: i + 1,
            lower: thresholds[i],
            upper: thresholds[i + 1],
        });
    }
    if weights.len() != thresholds.len() + 1 {
        return Err(ModelError::WeightCountMismatch {
            thresholds: thresholds.len(),
            weights: weights.len(),
        });
    }
    if let Some(i) = weights.windows(2).position(|w| w[0] <= w[1]) {
        return Err(ModelError::NonDecreasingWeights {
            index: i,
            upper: weights[i],
            lower: weights[i + 1],
        });
    }
    Ok(())
}

impl QuantizerSpec {
    pub fn new(thresholds: Vec<f64>, weights: Vec<f64>) -> Result<Self, ModelError> {
        validate_quantizer(&thresholds, &weights)?;
        Ok(QuantizerSpec {
            thresholds,
            weights,
        })
    }

    /// Thresholds `[-2, 0, 2]` with weights `[80, 50, -50, -80]`.
    pub fn standard() -> Self {
        QuantizerSpec {
            thresholds: vec![-2.0, 0.0, 2.0],
            weights: vec![80.0, 50.0, -50.0, -80.0],
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of finite thresholds `m`; levels run over `0..=m`.
    pub fn m(&self) -> usize {
        self.thresholds.len()
    }

    /// `β_0`, the largest weight.
    pub fn beta_first(&self) -> f64 {
        self.weights[0]
    }

    /// `β_m`, the smallest weight.
    pub fn beta_last(&self) -> f64 {
        self.weights[self.m()]
    }

    pub fn weight_span(&self) -> f64 {
        self.beta_first() - self.beta_last()
    }

    pub fn weight_abs_sum(&self) -> f64 {
        self.weights.iter().map(|b| b.abs()).sum()
    }

    /// Lower and upper edge of bucket `p`, with infinite outer edges.
    pub fn bucket(&self, p: usize) -> (f64, f64) {
        let lo = if p == 0 {
            f64::NEG_INFINITY
        } else {
            self.thresholds[p - 1]
        };
        let hi = if p == self.m() {
            f64::INFINITY
        } else {
            self.thresholds[p]
        };
        (lo, hi)
    }
}

/// Convex compact projection set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaSet {
    /// Axis-aligned box `[lo1, hi1] × [lo2, hi2]`.
    Box { lo1: f64, hi1: f64, lo2: f64, hi2: f64 },
    /// Known-sign construction: `θ(1)` has the given sign with magnitude in
    /// `[theta_lower, m_bar]`, and `|θ(2)| ≤ theta_bar`.
    SignedBox {
        sign: f64,
        theta_lower: f64,
        m_bar: f64,
        theta_bar: f64,
    },
}

impl Default for OmegaSet {
    fn default() -> Self {
        OmegaSet::Box {
            lo1: -6.0,
            hi1: 6.0,
            lo2: -2.0,
            hi2: 2.0,
        }
    }
}

impl OmegaSet {
    pub fn symmetric_box(half1: f64, half2: f64) -> Self {
        OmegaSet::Box {
            lo1: -half1,
            hi1: half1,
            lo2: -half2,
            hi2: half2,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            OmegaSet::Box { lo1, hi1, lo2, hi2 } => {
                if ![lo1, hi1, lo2, hi2].iter().all(|v| v.is_finite()) {
                    return Err(ModelError::InvalidOmega("box bounds must be finite".into()));
                }
                if lo1 > hi1 || lo2 > hi2 {
                    return Err(ModelError::InvalidOmega(format!(
                        "box needs lo <= hi per coordinate, got [{lo1}, {hi1}] x [{lo2}, {hi2}]"
                    )));
                }
                Ok(())
            }
            OmegaSet::SignedBox {
                sign,
                theta_lower,
                m_bar,
                theta_bar,
            } => {
                if sign != 1.0 && sign != -1.0 {
                    return Err(ModelError::InvalidOmega(format!(
                        "signed box sign must be +1 or -1, got {sign}"
                    )));
                }
                if ![theta_lower, m_bar, theta_bar].iter().all(|v| v.is_finite())
                    || !(0.0 < theta_bar && theta_bar < theta_lower && theta_lower <= m_bar)
                {
                    return Err(ModelError::InvalidOmega(format!(
                        "signed box needs 0 < theta_bar < theta_lower <= m_bar, got \
                         theta_bar = {theta_bar}, theta_lower = {theta_lower}, m_bar = {m_bar}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Coordinate intervals `([lo1, hi1], [lo2, hi2])`.
    pub fn intervals(&self) -> ((f64, f64), (f64, f64)) {
        match *self {
            OmegaSet::Box { lo1, hi1, lo2, hi2 } => ((lo1, hi1), (lo2, hi2)),
            OmegaSet::SignedBox {
                sign,
                theta_lower,
                m_bar,
                theta_bar,
            } => {
                let first = if sign > 0.0 {
                    (theta_lower, m_bar)
                } else {
                    (-m_bar, -theta_lower)
                };
                (first, (-theta_bar, theta_bar))
            }
        }
    }

    /// Euclidean projection. Both variants are boxes, so this is
    /// coordinate-wise clamping.
    pub fn project(&self, x: ParamVec) -> ParamVec {
        let ((lo1, hi1), (lo2, hi2)) = self.intervals();
        ParamVec::new(x.c1.clamp(lo1, hi1), x.c2.clamp(lo2, hi2))
    }

    pub fn contains(&self, x: ParamVec) -> bool {
        let ((lo1, hi1), (lo2, hi2)) = self.intervals();
        (lo1..=hi1).contains(&x.c1) && (lo2..=hi2).contains(&x.c2)
    }

    /// `sup_{v ∈ Ω} ‖v‖`, attained at a corner.
    pub fn sup_norm(&self) -> f64 {
        let ((lo1, hi1), (lo2, hi2)) = self.intervals();
        lo1.abs().max(hi1.abs()).hypot(lo2.abs().max(hi2.abs()))
    }

    /// `(θ̲, θ̄)` when the set keeps `|θ(1)| ≥ θ̲ > θ̄ ≥ |θ(2)|`, i.e. when the
    /// first coordinate is bounded away from zero by more than the second
    /// coordinate's magnitude. `None` when no such pair exists (for example
    /// when the first interval contains 0).
    pub fn lower_bounds(&self) -> Option<(f64, f64)> {
        match *self {
            OmegaSet::SignedBox {
                theta_lower,
                theta_bar,
                ..
            } => Some((theta_lower, theta_bar)),
            OmegaSet::Box { lo1, hi1, lo2, hi2 } => {
                if lo1 <= 0.0 && hi1 >= 0.0 {
                    return None;
                }
                let theta_lower = lo1.abs().min(hi1.abs());
                let theta_bar = lo2.abs().max(hi2.abs());
                (theta_bar > 0.0 && theta_lower > theta_bar).then_some((theta_lower, theta_bar))
            }
        }
    }

    /// Magnitude bound used for `M̄` in the excitation and rate constants:
    /// the configured `m_bar` for the signed construction, the corner norm
    /// for a plain box.
    pub fn m_bar(&self) -> f64 {
        match *self {
            OmegaSet::SignedBox { m_bar, .. } => m_bar,
            OmegaSet::Box { .. } => self.sup_norm(),
        }
    }
}

/// Generator closure for custom references: `(k, rng) -> y*(k)`, called in
/// order `k = 1, 2, …`.
pub type ReferenceFn = dyn Fn(usize, &mut dyn rand::RngCore) -> f64 + Send + Sync;

/// Reference signal `y*(k)`, `k ≥ 1`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSignal {
    /// `y*(2j-1) = odd_level`, `y*(2j) = even_base + e(j)` with
    /// `e(j) ~ U(0, jitter)` drawn from the reference stream.
    Alternating {
        #[serde(default = "default_odd_level")]
        odd_level: f64,
        #[serde(default = "default_even_base")]
        even_base: f64,
        #[serde(default = "default_jitter")]
        jitter: f64,
    },
    /// Fixed values `y*(1), y*(2), …`.
    Table { values: Vec<f64> },
    #[serde(skip)]
    Custom { bound: f64, generator: Arc<ReferenceFn> },
}

fn default_odd_level() -> f64 {
    1.0
}
fn default_even_base() -> f64 {
    2.0
}
fn default_jitter() -> f64 {
    0.1
}

impl fmt::Debug for ReferenceSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceSignal::Alternating {
                odd_level,
                even_base,
                jitter,
            } => f
                .debug_struct("Alternating")
                .field("odd_level", odd_level)
                .field("even_base", even_base)
                .field("jitter", jitter)
                .finish(),
            ReferenceSignal::Table { values } => {
                f.debug_struct("Table").field("len", &values.len()).finish()
            }
            ReferenceSignal::Custom { bound, .. } => {
                f.debug_struct("Custom").field("bound", bound).finish_non_exhaustive()
            }
        }
    }
}

impl ReferenceSignal {
    pub fn alternating() -> Self {
        ReferenceSignal::Alternating {
            odd_level: 1.0,
            even_base: 2.0,
            jitter: 0.1,
        }
    }

    pub fn custom<F>(bound: f64, generator: F) -> Self
    where
        F: Fn(usize, &mut dyn rand::RngCore) -> f64 + Send + Sync + 'static,
    {
        ReferenceSignal::Custom {
            bound,
            generator: Arc::new(generator),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ReferenceSignal::Alternating {
                odd_level,
                even_base,
                jitter,
            } => {
                if !(odd_level.is_finite() && even_base.is_finite() && jitter.is_finite()) {
                    return Err(ModelError::NonFiniteValue {
                        what: "reference parameters",
                    });
                }
                if *jitter < 0.0 {
                    return Err(ModelError::InvalidReference(format!(
                        "jitter must be nonnegative, got {jitter}"
                    )));
                }
                Ok(())
            }
            ReferenceSignal::Table { values } => {
                if values.is_empty() {
                    return Err(ModelError::InvalidReference("table is empty".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::NonFiniteValue {
                        what: "reference table",
                    });
                }
                Ok(())
            }
            ReferenceSignal::Custom { bound, .. } => {
                if bound.is_finite() && *bound > 0.0 {
                    Ok(())
                } else {
                    Err(ModelError::InvalidReference(format!(
                        "custom bound must be positive, got {bound}"
                    )))
                }
            }
        }
    }

    /// The bound `ȳ*` with `|y*(k)| ≤ ȳ*` for every generated `k`.
    pub fn bound(&self) -> f64 {
        match self {
            ReferenceSignal::Alternating {
                odd_level,
                even_base,
                jitter,
            } => odd_level
                .abs()
                .max(even_base.abs().max((even_base + jitter).abs())),
            ReferenceSignal::Table { values } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            ReferenceSignal::Custom { bound, .. } => *bound,
        }
    }

    /// Realizes `y*(1..=len)`. Replays identically for the same RNG state.
    pub fn generate<R: rand::RngCore>(
        &self,
        len: usize,
        rng: &mut R,
    ) -> Result<ReferenceTrace, ModelError> {
        let values = match self {
            ReferenceSignal::Alternating {
                odd_level,
                even_base,
                jitter,
            } => {
                let jitter_law = (*jitter > 0.0)
                    .then(|| Uniform::new(0.0, *jitter).expect("positive jitter"));
                (1..=len)
                    .map(|k| {
                        if k % 2 == 1 {
                            *odd_level
                        } else {
                            even_base + jitter_law.as_ref().map_or(0.0, |law| law.sample(rng))
                        }
                    })
                    .collect()
            }
            ReferenceSignal::Table { values } => {
                if values.len() < len {
                    return Err(ModelError::ReferenceTooShort {
                        available: values.len(),
                        required: len,
                    });
                }
                values[..len].to_vec()
            }
            ReferenceSignal::Custom { bound, generator } => {
                let mut out = Vec::with_capacity(len);
                for k in 1..=len {
                    let v = generator(k, rng);
                    if !v.is_finite() || v.abs() > *bound {
                        return Err(ModelError::InvalidReference(format!(
                            "custom value {v} at k = {k} exceeds bound {bound}"
                        )));
                    }
                    out.push(v);
                }
                out
            }
        };
        Ok(ReferenceTrace { values })
    }
}

/// A realized reference `y*(1..=len)` with `y*(k) = 0` for `k ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrace {
    values: Vec<f64>,
}

impl ReferenceTrace {
    pub fn from_values(values: Vec<f64>) -> Self {
        ReferenceTrace { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `y*(k)` for `1 ≤ k ≤ len`, 0 for `k = 0`.
    ///
    /// # Panics
    /// If `k > len`.
    pub fn at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
