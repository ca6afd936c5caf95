//! Command implementations behind the `qtrack` binary.
//!
//! Exit codes: 0 success, 2 config unreadable or unparsable, 3 validation
//! failure (the message names the violated invariant), 4 trial divergence,
//! 5 more than 20% of Monte Carlo trials diverged.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use qtrack_core::analysis::{check_reference_excitation, derive_constants, f_star, ConstantInputs};
use qtrack_core::config::{ConfigFile, QuantizerField};
use qtrack_core::harness::{self, MonteCarloSummary, TrialRecord};
use qtrack_core::{min_phase_margin, ExperimentConfig, HarnessError, OmegaSet, ReferenceTrace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_TOO_MANY_DIVERGED: i32 = 5;

/// Environment variable overriding the Monte Carlo worker count.
pub const WORKERS_ENV: &str = "QTRACK_WORKERS";

pub const TRIAL_CSV: &str = "trial.csv";
pub const MSE_CSV: &str = "mse_curve.csv";
pub const TRACKING_CSV: &str = "tracking_curve.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Diverged(String),
    #[error("{0}")]
    TooManyDiverged(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Parse(_) => EXIT_PARSE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Diverged(_) => EXIT_DIVERGED,
            CliError::TooManyDiverged(_) => EXIT_TOO_MANY_DIVERGED,
            // output failures are not part of the contract; report them as
            // divergence-free runtime errors
            CliError::Io { .. } => 1,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::TrialDiverged { .. } => CliError::Diverged(e.to_string()),
            HarnessError::TooManyDiverged { .. } => CliError::TooManyDiverged(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<usize>,
    pub trials: Option<usize>,
    pub quantizer_preset: Option<String>,
}

/// A validated config plus the exact bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub bytes: Vec<u8>,
    pub path: PathBuf,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<LoadedConfig, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut file = ConfigFile::from_json(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if let Some(seed) = overrides.seed {
        file.master_seed = seed;
    }
    if let Some(h) = overrides.horizon {
        file.horizon = h;
    }
    if let Some(r) = overrides.trials {
        file.trials = r;
    }
    if let Some(preset) = &overrides.quantizer_preset {
        file.quantizer = Some(QuantizerField::Preset(preset.clone()));
    }
    let config = ExperimentConfig::from_file(file).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(LoadedConfig {
        config,
        bytes,
        path: path.to_path_buf(),
    })
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_path: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub started_at: String,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(contents).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    loaded: &LoadedConfig,
    outputs: &[&str],
) -> Result<(), CliError> {
    let manifest = RunManifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_path: loaded.path.display().to_string(),
        config_sha256: sha256_hex(&loaded.bytes),
        master_seed: loaded.config.master_seed,
        started_at: chrono::Utc::now().to_rfc3339(),
        outputs: outputs
            .iter()
            .map(|f| out_dir.join(f).display().to_string())
            .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&out_dir.join(MANIFEST), text.as_bytes())
}

fn ensure_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })
}

/// Shortest string that parses back to the same `f64`; switches to
/// exponent notation for very small or large magnitudes.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn trial_csv(record: &TrialRecord) -> String {
    let mut out = String::from("k,u,y,S,S_bar,theta1_hat,theta2_hat,err_sq,track_sq\n");
    for i in 0..record.len() {
        let th = record.theta_hat[i];
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            i + 1,
            num(record.u[i]),
            num(record.y[i]),
            record.level[i],
            num(record.s_bar[i]),
            num(th.c1),
            num(th.c2),
            num(record.err_sq[i]),
            num(record.track_sq[i]),
        )
        .unwrap();
    }
    out
}

pub fn mse_csv(s: &MonteCarloSummary) -> String {
    let mut out = String::from("k,mse,mse_se,k_times_mse\n");
    for j in 0..s.checkpoints.len() {
        writeln!(
            out,
            "{},{},{},{}",
            s.checkpoints[j],
            num(s.mse_curve[j]),
            num(s.mse_se[j]),
            num(s.k_times_mse[j])
        )
        .unwrap();
    }
    out
}

pub fn tracking_csv(s: &MonteCarloSummary) -> String {
    let mut out = String::from("k,track,track_se\n");
    for j in 0..s.checkpoints.len() {
        writeln!(
            out,
            "{},{},{}",
            s.checkpoints[j],
            num(s.tracking_curve[j]),
            num(s.tracking_se[j])
        )
        .unwrap();
    }
    out
}

pub fn summary_csv(s: &MonteCarloSummary) -> String {
    let (rate_class, zeta) = match &s.constants {
        Some(c) => (c.rate_class.label(), num(c.zeta)),
        None => ("not_certified".to_string(), String::new()),
    };
    let k0 = s
        .empirical_k0
        .map_or_else(|| "never".to_string(), |k| k.to_string());
    format!(
        "slope,slope_se,tail_tracking_mean,tail_tracking_se,rate_class,zeta,empirical_K0,delta_y_hat\n\
         {},{},{},{},{},{},{},{}\n",
        num(s.slope),
        num(s.slope_se),
        num(s.tail_tracking_mean),
        num(s.tail_tracking_se),
        rate_class,
        zeta,
        k0,
        num(s.delta_y_hat),
    )
}

/// Runs trial 0 of the config and writes `trial.csv`.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let loaded = load_config(config_path, overrides)?;
    ensure_dir(out_dir)?;
    write_manifest(out_dir, "simulate", &loaded, &[TRIAL_CSV])?;
    let record = harness::run_trial(&loaded.config, 0)?;
    write_atomic(&out_dir.join(TRIAL_CSV), trial_csv(&record).as_bytes())?;
    println!(
        "simulated {} steps: final err_sq {}, guard steps {}",
        record.len(),
        record.err_sq.last().copied().unwrap_or(f64::NAN),
        record.guard_steps
    );
    Ok(())
}

fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
}

/// Runs the Monte Carlo experiment (or a synthetic power law when
/// `synthetic_power` is given) and writes the curve and summary CSVs.
pub fn cmd_montecarlo(
    config_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
    synthetic_power: Option<f64>,
    workers: Option<usize>,
) -> Result<MonteCarloSummary, CliError> {
    let loaded = load_config(config_path, overrides)?;
    ensure_dir(out_dir)?;
    let outputs = [MSE_CSV, TRACKING_CSV, SUMMARY_CSV, SUMMARY_JSON];
    write_manifest(out_dir, "montecarlo", &loaded, &outputs)?;
    let summary = match synthetic_power {
        Some(p) => harness::synthetic_summary(&loaded.config.checkpoints, p),
        None => match workers.or_else(workers_from_env) {
            Some(w) => harness::run_montecarlo_with_workers(&loaded.config, w)?,
            None => harness::run_montecarlo(&loaded.config)?,
        },
    };
    write_atomic(&out_dir.join(MSE_CSV), mse_csv(&summary).as_bytes())?;
    write_atomic(&out_dir.join(TRACKING_CSV), tracking_csv(&summary).as_bytes())?;
    write_atomic(&out_dir.join(SUMMARY_CSV), summary_csv(&summary).as_bytes())?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&out_dir.join(SUMMARY_JSON), json.as_bytes())?;
    println!(
        "{} trials: slope {} (se {}), tail tracking {} (se {}), diverged {}",
        summary.trials_completed,
        summary.slope,
        summary.slope_se,
        summary.tail_tracking_mean,
        summary.tail_tracking_se,
        summary.trials_diverged
    );
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
    NotCertifiable,
}

impl CheckStatus {
    fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Warn => "warn",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotCertifiable => "not-certifiable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckRow {
    pub item: String,
    pub status: CheckStatus,
    pub detail: String,
}

fn row(item: &str, status: CheckStatus, detail: String) -> CheckRow {
    CheckRow {
        item: item.to_string(),
        status,
        detail,
    }
}

/// Evaluates every standing assumption and derived constant for `config`.
pub fn check_rows(config: &ExperimentConfig) -> Result<Vec<CheckRow>, CliError> {
    use CheckStatus::*;
    let mut rows = Vec::new();

    let y_bar = config.reference.bound();
    rows.push(row("reference bounded", Pass, format!("y_bar = {y_bar}")));

    let reference = harness::trial_reference(config, 0)?;
    let horizon_trace = ReferenceTrace::from_values(reference.values()[..config.horizon].to_vec());
    let delta_y = check_reference_excitation(&horizon_trace, config.window)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    rows.push(row(
        "reference excitation",
        if delta_y > 0.0 { Pass } else { Fail },
        format!("delta_y_hat = {delta_y} (h = {}, K = {})", config.window, config.horizon),
    ));

    let margin = min_phase_margin(config.theta);
    rows.push(row(
        "minimum phase",
        if margin > config.mu { Pass } else { Fail },
        format!("margin = {margin} vs mu = {}", config.mu),
    ));

    let theta_inside = config.omega.contains(config.theta);
    rows.push(row(
        "theta in omega",
        if theta_inside { Pass } else { Fail },
        format!("theta = [{}, {}]", config.theta.c1, config.theta.c2),
    ));

    let bounds = config.omega.lower_bounds();
    let omega_detail = match (config.omega, bounds) {
        (_, Some((lower, bar))) => format!("theta_lower = {lower}, theta_bar = {bar}"),
        (OmegaSet::Box { lo1, hi1, .. }, None) if lo1 <= 0.0 && hi1 >= 0.0 => {
            "violates the parameter-set assumption (contains theta(1) = 0); epsilon guard in use"
                .to_string()
        }
        _ => "violates the parameter-set assumption (no theta_lower > theta_bar)".to_string(),
    };
    rows.push(row(
        "omega bounded away from zero",
        if bounds.is_some() { Pass } else { Warn },
        omega_detail,
    ));

    let noise = config.noise;
    rows.push(row(
        "noise zero-mean, finite variance",
        Pass,
        format!("{noise:?}, variance = {}", noise.variance()),
    ));

    let m_bar = config.omega.m_bar();
    rows.push(row("M_bar", Pass, num(m_bar)));
    let delta = qtrack_core::analysis::excitation_constant(delta_y, config.window, m_bar);
    rows.push(row(
        "delta",
        if delta > 0.0 { Pass } else { Fail },
        num(delta),
    ));

    match bounds {
        Some((theta_lower, theta_bar)) => {
            let c = derive_constants(&ConstantInputs {
                y_bar,
                h: config.window,
                delta_y,
                theta_lower,
                theta_bar,
                m_bar,
                quantizer: &config.quantizer,
                noise: &config.noise,
            })
            .map_err(|e| CliError::Validation(e.to_string()))?;
            rows.push(row("M (input bound)", Pass, num(c.input_bound)));
            rows.push(row("D1", Pass, num(c.d1)));
            rows.push(row(
                "f_star",
                if c.f_star > 0.0 { Pass } else { Fail },
                num(c.f_star),
            ));
            rows.push(row("zeta", Pass, num(c.zeta)));
            rows.push(row("rate class", Pass, c.rate_class.label()));
        }
        None => {
            for item in ["M (input bound)", "D1", "f_star", "zeta", "rate class"] {
                rows.push(row(item, NotCertifiable, "needs theta_lower > theta_bar".to_string()));
            }
            // f* on the quantizer span alone is still informative
            let c = config.quantizer.thresholds();
            let span = c[c.len() - 1].abs().max(c[0].abs());
            if let Ok(f) = f_star(&config.noise, span) {
                rows.push(row(
                    "f_star on threshold span",
                    if f > 0.0 { Pass } else { Warn },
                    format!("{} on [-{span}, {span}]", num(f)),
                ));
            }
        }
    }
    Ok(rows)
}

pub fn render_rows(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.item.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in rows {
        writeln!(out, "{:<width$}  {:<15}  {}", r.item, r.status.label(), r.detail).unwrap();
    }
    out
}

/// Prints the assumption table. Hard failures map to exit code 3.
pub fn cmd_check(config_path: &Path, overrides: &Overrides) -> Result<Vec<CheckRow>, CliError> {
    let loaded = load_config(config_path, overrides)?;
    let rows = check_rows(&loaded.config)?;
    print!("{}", render_rows(&rows));
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| r.status == CheckStatus::Fail)
        .map(|r| r.item.as_str())
        .collect();
    if failed.is_empty() {
        Ok(rows)
    } else {
        Err(CliError::Validation(format!(
            "AssumptionFailed: {}",
            failed.join(", ")
        )))
    }
}
