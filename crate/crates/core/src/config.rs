//! Flat `key=value` run configuration.
//!
//! Angles take a `deg` suffix for degrees and are radians otherwise. Every key
//! has a default, so an empty file is a complete configuration.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fock::FockCutoff;
use crate::homodyne::{AcquisitionConfig, PhaseModel};
use crate::io;
use crate::state_prep::HeraldConfig;
use crate::tomography::{FitOptions, PhaseAssignment, QuantileLevels, ReconstructionSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseModelKind {
    Linear,
    RandomWalk,
    Fixed,
}

impl PhaseModelKind {
    fn name(self) -> &'static str {
        match self {
            PhaseModelKind::Linear => "linear",
            PhaseModelKind::RandomWalk => "random_walk",
            PhaseModelKind::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub theta: f64,
    pub eta_t: f64,
    pub p_dark: f64,
    pub eta_s: f64,
    pub cutoff: usize,

    pub windows: usize,
    pub samples_per_window: usize,
    pub seed: u64,
    pub vacuum_samples: usize,
    pub gain: f64,
    pub phase_model: PhaseModelKind,
    pub phase_start: f64,
    pub phase_span: f64,
    pub phase_step: f64,

    pub max_iterations: usize,
    pub loglik_tolerance: f64,
    pub phase_bins: usize,
    pub q_bins: usize,
    pub variance_smoothing: usize,
    pub fit_levels: QuantileLevels,

    /// Sweep angles, radians.
    pub thetas: Vec<f64>,
    pub output_dir: PathBuf,
}

pub const KEYS: &[&str] = &[
    "lambda",
    "theta",
    "eta_t",
    "p_dark",
    "eta_s",
    "cutoff",
    "windows",
    "samples_per_window",
    "seed",
    "vacuum_samples",
    "gain",
    "phase_model",
    "phase_start",
    "phase_span",
    "phase_step",
    "max_iterations",
    "loglik_tolerance",
    "phase_bins",
    "q_bins",
    "variance_smoothing",
    "fit_levels",
    "thetas",
    "output_dir",
];

impl Default for RunConfig {
    fn default() -> Self {
        let acq = AcquisitionConfig::default();
        let rec = ReconstructionSettings::default();
        let fit = FitOptions::default();
        RunConfig {
            lambda: 0.12,
            theta: 0.0,
            eta_t: 0.1,
            p_dark: 1e-5,
            eta_s: 0.55,
            cutoff: rec.cutoff.dim(),
            windows: acq.windows,
            samples_per_window: acq.samples_per_window,
            seed: acq.rng_seed,
            vacuum_samples: acq.vacuum_samples,
            gain: acq.gain,
            phase_model: PhaseModelKind::Linear,
            phase_start: 0.0,
            phase_span: std::f64::consts::PI,
            phase_step: 0.1,
            max_iterations: rec.max_iterations,
            loglik_tolerance: rec.log_likelihood_tolerance,
            phase_bins: rec.phase_bins,
            q_bins: rec.q_bins,
            variance_smoothing: fit.smoothing,
            fit_levels: fit.levels,
            thetas: [0.0, 11.25, 16.0, 19.0, 22.5].iter().map(|d: &f64| d.to_radians()).collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("{}: invalid value '{}': {}", key, value, why))
}

pub fn parse_angle(key: &str, value: &str) -> Result<f64> {
    let v = value.trim();
    let (num, deg) = match v.strip_suffix("deg") {
        Some(n) => (n.trim(), true),
        None => (v, false),
    };
    let x: f64 = num.parse().map_err(|_| bad(key, value, "expected an angle"))?;
    if !x.is_finite() {
        return Err(bad(key, value, "angle must be finite"));
    }
    Ok(if deg { x.to_radians() } else { x })
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value, "not a number"))
}

impl RunConfig {
    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{}:{}: expected key=value", source, i + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("{}:{}: {}", source, i + 1, strip_prefix(&e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_file(path).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_text(&text, &path.display().to_string())
    }

    /// Sets one key without validating cross-field constraints.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lambda" => self.lambda = parse_num(key, value)?,
            "theta" => self.theta = parse_angle(key, value)?,
            "eta_t" => self.eta_t = parse_num(key, value)?,
            "p_dark" => self.p_dark = parse_num(key, value)?,
            "eta_s" => self.eta_s = parse_num(key, value)?,
            "cutoff" => self.cutoff = parse_num(key, value)?,
            "windows" => self.windows = parse_num(key, value)?,
            "samples_per_window" => self.samples_per_window = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "vacuum_samples" => self.vacuum_samples = parse_num(key, value)?,
            "gain" => self.gain = parse_num(key, value)?,
            "phase_model" => {
                self.phase_model = match value.trim() {
                    "linear" => PhaseModelKind::Linear,
                    "random_walk" => PhaseModelKind::RandomWalk,
                    "fixed" => PhaseModelKind::Fixed,
                    _ => return Err(bad(key, value, "expected linear, random_walk or fixed")),
                }
            }
            "phase_start" => self.phase_start = parse_angle(key, value)?,
            "phase_span" => self.phase_span = parse_angle(key, value)?,
            "phase_step" => self.phase_step = parse_angle(key, value)?,
            "max_iterations" => self.max_iterations = parse_num(key, value)?,
            "loglik_tolerance" => self.loglik_tolerance = parse_num(key, value)?,
            "phase_bins" => self.phase_bins = parse_num(key, value)?,
            "q_bins" => self.q_bins = parse_num(key, value)?,
            "variance_smoothing" => self.variance_smoothing = parse_num(key, value)?,
            "fit_levels" => {
                self.fit_levels = match value.trim() {
                    "extremes" => QuantileLevels::Extremes,
                    v => match v.parse::<usize>() {
                        Ok(n) if n >= 2 => QuantileLevels::Curve(n),
                        _ => return Err(bad(key, value, "expected 'extremes' or an integer >= 2")),
                    },
                }
            }
            "thetas" => {
                self.thetas = value
                    .split(',')
                    .map(|t| parse_angle(key, t))
                    .collect::<Result<Vec<_>>>()?;
            }
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            _ => return Err(Error::Config(format!("unknown key '{}'", key))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{}' is not key=value", assignment)))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{}: {}", key, msg)))
            }
        };
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        check((0.0..1.0).contains(&self.lambda), "lambda", "must lie in [0, 1)")?;
        check(unit(self.eta_t), "eta_t", "must lie in [0, 1]")?;
        check((0.0..1.0).contains(&self.p_dark), "p_dark", "must lie in [0, 1)")?;
        check(unit(self.eta_s), "eta_s", "must lie in [0, 1]")?;
        check(self.cutoff >= 2, "cutoff", "must be at least 2")?;
        check(self.windows > 0, "windows", "must be positive")?;
        check(self.samples_per_window > 0, "samples_per_window", "must be positive")?;
        check(self.vacuum_samples >= 2, "vacuum_samples", "must be at least 2")?;
        check(self.gain > 0.0 && self.gain.is_finite(), "gain", "must be positive and finite")?;
        check(self.phase_step >= 0.0, "phase_step", "must be non-negative")?;
        check(self.phase_start.is_finite() && self.phase_span.is_finite(), "phase_span", "must be finite")?;
        check(self.max_iterations > 0, "max_iterations", "must be positive")?;
        check(self.loglik_tolerance > 0.0, "loglik_tolerance", "must be positive")?;
        check(self.phase_bins > 0, "phase_bins", "must be positive")?;
        check(self.q_bins > 0, "q_bins", "must be positive")?;
        check(!self.thetas.is_empty(), "thetas", "must not be empty")?;
        for &t in std::iter::once(&self.theta).chain(&self.thetas) {
            self.herald_config_at(t).map_err(|e| match e {
                Error::InvalidParameter { name, reason } => Error::Config(format!("{}: {}", name, reason)),
                Error::InvalidCutoff(d) => Error::Config(format!("cutoff: {} is below the minimum of 2", d)),
                Error::TruncationLeakage { lambda, cutoff, leakage } => Error::Config(format!(
                    "lambda: truncation leakage {:e} at lambda={} exceeds 1e-6 for cutoff {}",
                    leakage, lambda, cutoff
                )),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn herald_config(&self) -> Result<HeraldConfig<f64>> {
        self.herald_config_at(self.theta)
    }

    pub fn herald_config_at(&self, theta: f64) -> Result<HeraldConfig<f64>> {
        HeraldConfig::new(self.lambda, theta, self.eta_t, self.p_dark, self.eta_s, self.cutoff)
    }

    pub fn acquisition(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            windows: self.windows,
            samples_per_window: self.samples_per_window,
            rng_seed: self.seed,
            vacuum_samples: self.vacuum_samples,
            gain: self.gain,
        }
    }

    pub fn phase_model(&self) -> PhaseModel {
        match self.phase_model {
            PhaseModelKind::Linear => PhaseModel::LinearSweep {
                start: self.phase_start,
                span: self.phase_span,
            },
            PhaseModelKind::RandomWalk => PhaseModel::RandomWalk {
                start: self.phase_start,
                step: self.phase_step,
            },
            PhaseModelKind::Fixed => PhaseModel::Fixed(self.phase_start),
        }
    }

    pub fn reconstruction_settings(&self) -> Result<ReconstructionSettings> {
        Ok(ReconstructionSettings {
            cutoff: FockCutoff::new(self.cutoff)?,
            max_iterations: self.max_iterations,
            log_likelihood_tolerance: self.loglik_tolerance,
            phase_bins: self.phase_bins,
            q_bins: self.q_bins,
        })
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            smoothing: self.variance_smoothing,
            levels: self.fit_levels,
            ..FitOptions::default()
        }
    }

    pub fn phase_assignment(&self) -> PhaseAssignment {
        PhaseAssignment {
            smoothing: self.variance_smoothing,
            ..PhaseAssignment::default()
        }
    }

    /// All keys with their resolved values, angles in radians. Reading the
    /// result back with [`RunConfig::from_text`] reproduces `self`.
    pub fn entries(&self) -> Vec<(String, String)> {
        let thetas: Vec<String> = self.thetas.iter().map(|t| t.to_string()).collect();
        let levels = match self.fit_levels {
            QuantileLevels::Extremes => "extremes".to_string(),
            QuantileLevels::Curve(n) => n.to_string(),
        };
        let values = [
            self.lambda.to_string(),
            self.theta.to_string(),
            self.eta_t.to_string(),
            self.p_dark.to_string(),
            self.eta_s.to_string(),
            self.cutoff.to_string(),
            self.windows.to_string(),
            self.samples_per_window.to_string(),
            self.seed.to_string(),
            self.vacuum_samples.to_string(),
            self.gain.to_string(),
            self.phase_model.name().to_string(),
            self.phase_start.to_string(),
            self.phase_span.to_string(),
            self.phase_step.to_string(),
            self.max_iterations.to_string(),
            self.loglik_tolerance.to_string(),
            self.phase_bins.to_string(),
            self.q_bins.to_string(),
            self.variance_smoothing.to_string(),
            levels,
            thetas.join(","),
            self.output_dir.display().to_string(),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    /// Resolved configuration without `output_dir`, so that output trees do
    /// not depend on where they are written.
    pub fn manifest(&self) -> String {
        let entries: Vec<_> = self.entries().into_iter().filter(|(k, _)| k != "output_dir").collect();
        io::format_report(&entries)
    }

    /// Sweep angles in ascending order.
    pub fn sweep(&self) -> SweepSpec {
        let mut thetas = self.thetas.clone();
        thetas.sort_by(f64::total_cmp);
        SweepSpec {
            base: self.clone(),
            thetas,
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Angles to run through the full pipeline, sharing one base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub thetas: Vec<f64>,
}

impl SweepSpec {
    pub fn point(&self, theta: f64) -> RunConfig {
        RunConfig {
            theta,
            ..self.base.clone()
        }
    }
}
