//! Monte Carlo runner: independent closed-loop trials, per-step invariant
//! checks, and deterministic aggregation into convergence and tracking
//! curves.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    check_reference_excitation, derive_constants, excitation_constant, excitation_trace,
    input_bound, ConstantInputs, ProblemConstants,
};
use crate::config::ExperimentConfig;
use crate::controller::{ClosedLoop, ControllerState};
use crate::error::{ControlError, HarnessError};
use crate::estimator::{estimation_error, EstimatorState};
use crate::model::{ParamVec, ReferenceTrace, Regressor};
use crate::plant::PlantState;
use crate::rng::{trial_rng, Stream};

/// Magnitude beyond which a trial is treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Relative slack on the per-step move bound, covering rounding in
/// `θ̂ + φ/k·(A - S̄)`.
const STEP_BOUND_SLACK: f64 = 1e-12;

/// Full trajectory of one trial. Index `i` holds step `k = i + 1`.
#[derive(Debug, Clone, Default)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub y_star: Vec<f64>,
    pub level: Vec<usize>,
    pub s_bar: Vec<f64>,
    pub theta_hat: Vec<ParamVec>,
    pub err_sq: Vec<f64>,
    pub track_sq: Vec<f64>,
    /// `‖θ̃(0)‖²`.
    pub initial_err_sq: f64,
    /// Steps whose input was computed with the epsilon guard engaged.
    pub guard_steps: usize,
    /// Steps where `‖θ̂(k) - θ̂(k-1)‖` exceeded `(‖φ(k)‖/k)(β_0 - β_m)`.
    pub step_bound_violations: usize,
    /// Steps where `‖φ(k)‖` exceeded the input bound (only checked when the
    /// projection set bounds `|θ̂(1)|` away from `|θ̂(2)|`).
    pub input_bound_violations: usize,
    pub input_bound: Option<f64>,
    pub max_phi_norm: f64,
    /// Realized reference over `1..=K+1`.
    pub reference: Vec<f64>,
}

impl TrialRecord {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `φ(k) = [u(k), u(k-1)]` for every recorded step.
    pub fn regressors(&self) -> Vec<Regressor> {
        (0..self.u.len())
            .map(|i| Regressor::new(self.u[i], if i == 0 { 0.0 } else { self.u[i - 1] }))
            .collect()
    }
}

fn check_finite(trial: usize, step: usize, values: &[(&str, f64)]) -> Result<(), HarnessError> {
    for (name, v) in values {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(HarnessError::TrialDiverged {
                trial,
                step,
                reason: format!("{name} = {v}"),
            });
        }
    }
    Ok(())
}

fn control_error(trial: usize, step: usize, e: ControlError) -> HarnessError {
    match e {
        ControlError::Model(m) => HarnessError::Model(m),
        other => HarnessError::TrialDiverged {
            trial,
            step,
            reason: other.to_string(),
        },
    }
}

/// The reference realization used by trial `trial_index`, covering
/// `y*(1..=K+1)`.
pub fn trial_reference(config: &ExperimentConfig, trial_index: usize) -> Result<ReferenceTrace, HarnessError> {
    let mut rng = trial_rng(config.master_seed, trial_index, Stream::Reference);
    Ok(config.reference.generate(config.horizon + 1, &mut rng)?)
}

/// Runs `K` closed-loop steps. Deterministic in `(master_seed, trial_index)`.
pub fn run_trial(config: &ExperimentConfig, trial_index: usize) -> Result<TrialRecord, HarnessError> {
    let reference = trial_reference(config, trial_index)?;
    run_trial_with_reference(config, trial_index, reference)
}

fn run_trial_with_reference(
    config: &ExperimentConfig,
    trial_index: usize,
    reference: ReferenceTrace,
) -> Result<TrialRecord, HarnessError> {
    let k_max = config.horizon;
    let mut plant = PlantState::new(config.theta, config.quantizer.clone(), config.noise);
    if config.enforce_assumptions {
        plant = plant.with_phase_check(config.mu)?;
    }
    let estimator = EstimatorState::new(
        config.theta_hat0,
        config.omega,
        config.quantizer.clone(),
        config.noise,
    );
    let bound = config
        .omega
        .lower_bounds()
        .map(|(lower, bar)| input_bound(config.reference.bound(), lower, bar));
    let reference_values = reference.values().to_vec();
    let mut closed_loop = ClosedLoop::new(
        plant,
        estimator,
        ControllerState::new(config.epsilon_guard),
        reference,
    )
    .map_err(|e| control_error(trial_index, 0, e))?;

    let mut rec = TrialRecord {
        trial_index,
        u: Vec::with_capacity(k_max),
        y: Vec::with_capacity(k_max),
        y_star: Vec::with_capacity(k_max),
        level: Vec::with_capacity(k_max),
        s_bar: Vec::with_capacity(k_max),
        theta_hat: Vec::with_capacity(k_max),
        err_sq: Vec::with_capacity(k_max),
        track_sq: Vec::with_capacity(k_max),
        initial_err_sq: estimation_error(config.theta_hat0, config.theta),
        input_bound: bound,
        reference: reference_values,
        ..Default::default()
    };
    let span = config.quantizer.weight_span();
    let mut noise_rng = trial_rng(config.master_seed, trial_index, Stream::Noise);

    for _ in 0..k_max {
        let step = closed_loop
            .step(&mut noise_rng)
            .map_err(|e| control_error(trial_index, closed_loop.k(), e))?;
        let k = step.k;
        check_finite(
            trial_index,
            k,
            &[
                ("u", step.phi.u_curr),
                ("y", step.y),
                ("theta_hat(1)", step.theta_hat.c1),
                ("theta_hat(2)", step.theta_hat.c2),
                ("u_next", step.u_next),
            ],
        )?;

        let phi_norm = step.phi.norm();
        let moved = step.theta_hat.distance(&step.theta_hat_prev);
        let limit = phi_norm / k as f64 * span;
        if moved > limit * (1.0 + STEP_BOUND_SLACK) {
            rec.step_bound_violations += 1;
        }
        if let Some(b) = bound {
            if phi_norm > b {
                rec.input_bound_violations += 1;
            }
        }
        rec.max_phi_norm = rec.max_phi_norm.max(phi_norm);
        if step.guard_active {
            rec.guard_steps += 1;
        }

        rec.u.push(step.phi.u_curr);
        rec.y.push(step.y);
        rec.y_star.push(step.y_star);
        rec.level.push(step.level);
        rec.s_bar.push(step.s_bar);
        rec.theta_hat.push(step.theta_hat);
        rec.err_sq.push(step.err_sq);
        rec.track_sq.push(step.track_sq);
    }
    Ok(rec)
}

/// Least-squares slope of `ln v` against `ln k`, with its standard error
/// (`NaN` with fewer than three points).
pub fn fit_loglog_slope(ks: &[usize], values: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = ks
        .iter()
        .zip(values)
        .map(|(&k, &v)| ((k as f64).ln(), v.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let se = if pts.len() > 2 {
        let intercept = my - slope * mx;
        let ssr: f64 = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, se)
}

/// Checkpoints used for the slope fit: the second half of the list.
pub fn fit_window(checkpoints: &[usize]) -> &[usize] {
    &checkpoints[checkpoints.len() / 2..]
}

/// Per-trial statistics kept after the trajectory is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trial_index: usize,
    pub err_at: Vec<f64>,
    pub track_at: Vec<f64>,
    pub tail_track_mean: f64,
    pub final_err_sq: f64,
    pub step_bound_violations: usize,
    pub input_bound_violations: usize,
    pub guard_steps: usize,
    pub max_phi_norm: f64,
    pub excitation_k0: Option<usize>,
    pub excitation_min_after_k0: Option<f64>,
}

/// First index of the tail window `k ∈ [K/2, K]`, 0-based.
fn tail_start(horizon: usize) -> usize {
    (horizon / 2).max(1) - 1
}

pub fn summarize_trial(
    record: &TrialRecord,
    checkpoints: &[usize],
    window: usize,
    excitation_threshold: f64,
) -> TrialSummary {
    let k_max = record.len();
    let tail = &record.track_sq[tail_start(k_max)..];
    let excitation = excitation_trace(&record.regressors(), window, excitation_threshold);
    TrialSummary {
        trial_index: record.trial_index,
        err_at: checkpoints.iter().map(|&k| record.err_sq[k - 1]).collect(),
        track_at: checkpoints.iter().map(|&k| record.track_sq[k - 1]).collect(),
        tail_track_mean: tail.iter().sum::<f64>() / tail.len() as f64,
        final_err_sq: record.err_sq[k_max - 1],
        step_bound_violations: record.step_bound_violations,
        input_bound_violations: record.input_bound_violations,
        guard_steps: record.guard_steps,
        max_phi_norm: record.max_phi_norm,
        excitation_k0: excitation.k0,
        excitation_min_after_k0: excitation.min_after_k0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub checkpoints: Vec<usize>,
    pub mse_curve: Vec<f64>,
    pub mse_se: Vec<f64>,
    /// `k · mse(k)`, flat under an `O(1/k)` rate.
    pub k_times_mse: Vec<f64>,
    pub mse_median: Vec<f64>,
    pub tracking_curve: Vec<f64>,
    pub tracking_se: Vec<f64>,
    pub tail_tracking_mean: f64,
    pub tail_tracking_se: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub noise_variance: f64,
    pub trials_requested: usize,
    pub trials_completed: usize,
    pub trials_diverged: usize,
    /// Set when some (but at most 20%) of the trials diverged.
    pub flagged: bool,
    pub first_divergence: Option<String>,
    pub step_bound_violations: usize,
    pub input_bound_violations: usize,
    pub guard_steps: usize,
    pub max_phi_norm: f64,
    /// Minimum over trials of the measured reference excitation.
    pub delta_y_hat: f64,
    /// `δ` computed from `delta_y_hat`; the threshold for the excitation trace.
    pub excitation_delta: f64,
    /// Largest per-trial `K0`; `None` if any trial never settles above `δ`.
    pub empirical_k0: Option<usize>,
    pub trials_without_k0: usize,
    /// Smallest windowed `λ_min` observed after each trial's `K0`.
    pub min_excitation_after_k0: Option<f64>,
    /// Closed-form constants, when the projection set certifies them.
    pub constants: Option<ProblemConstants>,
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Certified constants for `config` given a measured `δ_y`, when the
/// projection set provides `θ̲ > θ̄`.
pub fn certified_constants(config: &ExperimentConfig, delta_y: f64) -> Option<ProblemConstants> {
    let (theta_lower, theta_bar) = config.omega.lower_bounds()?;
    derive_constants(&ConstantInputs {
        y_bar: config.reference.bound(),
        h: config.window,
        delta_y,
        theta_lower,
        theta_bar,
        m_bar: config.omega.m_bar(),
        quantizer: &config.quantizer,
        noise: &config.noise,
    })
    .ok()
}

/// Minimum over trials of the reference excitation level.
pub fn measured_reference_excitation(config: &ExperimentConfig) -> Result<f64, HarnessError> {
    let mut min = f64::INFINITY;
    for trial in 0..config.trials {
        let reference = trial_reference(config, trial)?;
        let truncated = ReferenceTrace::from_values(reference.values()[..config.horizon].to_vec());
        min = min.min(check_reference_excitation(&truncated, config.window)?);
    }
    Ok(min)
}

/// Runs every trial on the current rayon pool and aggregates in trial
/// order, so the result does not depend on the number of workers.
pub fn run_montecarlo(config: &ExperimentConfig) -> Result<MonteCarloSummary, HarnessError> {
    config.validate()?;
    let delta_y_hat = measured_reference_excitation(config)?;
    let delta = excitation_constant(delta_y_hat, config.window, config.omega.m_bar()).max(0.0);

    let outcomes: Vec<Result<TrialSummary, HarnessError>> = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            run_trial(config, i).map(|rec| summarize_trial(&rec, &config.checkpoints, config.window, delta))
        })
        .collect();

    let mut completed = Vec::with_capacity(outcomes.len());
    let mut diverged = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(s) => completed.push(s),
            Err(e @ HarnessError::TrialDiverged { .. }) => diverged.push(e),
            Err(e) => return Err(e),
        }
    }
    if diverged.len() * 5 > config.trials {
        return Err(HarnessError::TooManyDiverged {
            diverged: diverged.len(),
            trials: config.trials,
            first: diverged[0].to_string(),
        });
    }
    let mut summary = aggregate(config, &completed, delta_y_hat, delta);
    summary.trials_diverged = diverged.len();
    summary.flagged = !diverged.is_empty();
    summary.first_divergence = diverged.first().map(|e| e.to_string());
    Ok(summary)
}

/// [`run_montecarlo`] on a dedicated pool of `workers` threads.
pub fn run_montecarlo_with_workers(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<MonteCarloSummary, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| run_montecarlo(config))
}

fn aggregate(
    config: &ExperimentConfig,
    trials: &[TrialSummary],
    delta_y_hat: f64,
    delta: f64,
) -> MonteCarloSummary {
    let cps = &config.checkpoints;
    let mut mse_curve = Vec::with_capacity(cps.len());
    let mut mse_se = Vec::with_capacity(cps.len());
    let mut mse_median = Vec::with_capacity(cps.len());
    let mut tracking_curve = Vec::with_capacity(cps.len());
    let mut tracking_se = Vec::with_capacity(cps.len());
    for j in 0..cps.len() {
        let (m, se) = mean_and_se(trials.iter().map(|t| t.err_at[j]));
        mse_curve.push(m);
        mse_se.push(se);
        mse_median.push(median(trials.iter().map(|t| t.err_at[j]).collect()));
        let (m, se) = mean_and_se(trials.iter().map(|t| t.track_at[j]));
        tracking_curve.push(m);
        tracking_se.push(se);
    }
    let k_times_mse = cps.iter().zip(&mse_curve).map(|(&k, m)| k as f64 * m).collect();
    let fit_from = cps.len() / 2;
    let (slope, slope_se) = fit_loglog_slope(&cps[fit_from..], &mse_curve[fit_from..]);
    let (tail_tracking_mean, tail_tracking_se) = mean_and_se(trials.iter().map(|t| t.tail_track_mean));

    let trials_without_k0 = trials.iter().filter(|t| t.excitation_k0.is_none()).count();
    let empirical_k0 = if trials_without_k0 == 0 {
        trials.iter().filter_map(|t| t.excitation_k0).max()
    } else {
        None
    };
    let min_excitation_after_k0 = trials
        .iter()
        .filter_map(|t| t.excitation_min_after_k0)
        .reduce(f64::min);

    MonteCarloSummary {
        checkpoints: cps.clone(),
        mse_curve,
        mse_se,
        k_times_mse,
        mse_median,
        tracking_curve,
        tracking_se,
        tail_tracking_mean,
        tail_tracking_se,
        slope,
        slope_se,
        noise_variance: config.noise.variance(),
        trials_requested: config.trials,
        trials_completed: trials.len(),
        trials_diverged: 0,
        flagged: false,
        first_divergence: None,
        step_bound_violations: trials.iter().map(|t| t.step_bound_violations).sum(),
        input_bound_violations: trials.iter().map(|t| t.input_bound_violations).sum(),
        guard_steps: trials.iter().map(|t| t.guard_steps).sum(),
        max_phi_norm: trials.iter().map(|t| t.max_phi_norm).fold(0.0, f64::max),
        delta_y_hat,
        excitation_delta: delta,
        empirical_k0,
        trials_without_k0,
        min_excitation_after_k0,
        constants: certified_constants(config, delta_y_hat),
    }
}

/// Summary of a noiseless power law `mse(k) = k^-power`, used to exercise
/// the slope fit without simulating.
pub fn synthetic_summary(checkpoints: &[usize], power: f64) -> MonteCarloSummary {
    let mse_curve: Vec<f64> = checkpoints.iter().map(|&k| (k as f64).powf(-power)).collect();
    let fit_from = checkpoints.len() / 2;
    let (slope, slope_se) = fit_loglog_slope(&checkpoints[fit_from..], &mse_curve[fit_from..]);
    let zeros = vec![0.0; checkpoints.len()];
    MonteCarloSummary {
        checkpoints: checkpoints.to_vec(),
        k_times_mse: checkpoints.iter().zip(&mse_curve).map(|(&k, m)| k as f64 * m).collect(),
        mse_median: mse_curve.clone(),
        mse_curve,
        mse_se: zeros.clone(),
        tracking_curve: zeros.clone(),
        tracking_se: zeros,
        tail_tracking_mean: 0.0,
        tail_tracking_se: 0.0,
        slope,
        slope_se,
        noise_variance: 0.0,
        trials_requested: 0,
        trials_completed: 0,
        trials_diverged: 0,
        flagged: false,
        first_divergence: None,
        step_bound_violations: 0,
        input_bound_violations: 0,
        guard_steps: 0,
        max_phi_norm: 0.0,
        delta_y_hat: f64::NAN,
        excitation_delta: f64::NAN,
        empirical_k0: None,
        trials_without_k0: 0,
        min_excitation_after_k0: None,
        constants: None,
    }
}
