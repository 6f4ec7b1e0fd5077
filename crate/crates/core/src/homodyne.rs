//! Homodyne statistics in the Fock basis and seeded Monte Carlo acquisition.
//!
//! Quadratures are normalized so the vacuum variance is 1/2. The density of
//! `Q_φ` is `pr(q|φ) = Σ ρ_nm ψ_n(q) ψ_m(q) e^{i(n−m)φ}`.
//!
//! Seeding rule: the vacuum calibration block draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream 0, window `w` on stream
//! `w + 1`, and random-walk phase trajectories on stream `u64::MAX`. Windows are
//! therefore independent of evaluation order and may be sampled in parallel.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockCutoff};
use crate::scalar::{cis, cr, Real, C};

/// Normalized Hermite functions `ψ_0(q) … ψ_{count−1}(q)` via the recurrence
/// `ψ_{n+1} = √(2/(n+1)) q ψ_n − √(n/(n+1)) ψ_{n−1}`.
pub fn hermite_functions<T: Real>(q: T, count: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let psi0 = T::pi().powf(T::lit(-0.25)) * (-q * q * T::lit(0.5)).exp();
    out.push(psi0);
    if count == 1 {
        return out;
    }
    out.push(T::lit(2.0).sqrt() * q * psi0);
    for n in 1..count - 1 {
        let nf = T::from_count(n);
        let next = (T::lit(2.0) / (nf + T::one())).sqrt() * q * out[n]
            - (nf / (nf + T::one())).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Signature of a Hermite-function provider; lets the self-test swap in a
/// deliberately broken recurrence.
pub type HermiteFn<T> = fn(T, usize) -> Vec<T>;

/// `pr(q|φ)` on every point of `q_grid`.
pub fn quadrature_pdf<T: Real>(rho: &DensityMatrix<T>, phi: T, q_grid: &[T]) -> Result<Vec<T>> {
    quadrature_pdf_with(rho, phi, q_grid, hermite_functions::<T>)
}

pub fn quadrature_pdf_with<T: Real>(
    rho: &DensityMatrix<T>,
    phi: T,
    q_grid: &[T],
    hermite: HermiteFn<T>,
) -> Result<Vec<T>> {
    if q_grid.iter().any(|q| !q.is_finite()) || !phi.is_finite() {
        return Err(Error::param("q_grid", "non-finite value"));
    }
    let d = rho.dim();
    let phases: Vec<C<T>> = (0..d).map(|n| cis(phi * T::from_count(n))).collect();
    let m = rho.matrix();
    Ok(q_grid
        .iter()
        .map(|&q| {
            let psi = hermite(q, d);
            // u_n = ψ_n e^{inφ};  pr = uᵀ ρ ū
            let u: Vec<C<T>> = psi.iter().zip(&phases).map(|(&p, &e)| e * cr(p)).collect();
            let mut acc = cr(T::zero());
            for n in 0..d {
                let mut row = cr(T::zero());
                for k in 0..d {
                    row += m[(n, k)] * u[k].conj();
                }
                acc += u[n] * row;
            }
            acc.re
        })
        .collect())
}

/// Evenly spaced grid of `points` values on `[-bound, bound]`.
pub fn symmetric_grid(bound: f64, points: usize) -> Vec<f64> {
    let step = 2.0 * bound / (points - 1) as f64;
    (0..points).map(|i| -bound + step * i as f64).collect()
}

/// Trapezoid rule on an arbitrary sorted grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Grid used for inverse-CDF sampling; widened automatically until the pdf
/// integrates to one within `max_norm_error`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    pub bound: f64,
    pub points: usize,
    pub max_bound: f64,
    pub max_norm_error: f64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        SamplingGrid {
            bound: 6.0,
            points: 1201,
            max_bound: 24.0,
            max_norm_error: 1e-6,
        }
    }
}

/// Tabulated inverse CDF of `pr(q|φ)`.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuadratureSampler {
    pub fn new<T: Real>(rho: &DensityMatrix<T>, phi: f64, spec: SamplingGrid) -> Result<Self> {
        let mut bound = spec.bound;
        // keep the grid spacing as the bound grows
        let spacing = 2.0 * spec.bound / (spec.points - 1) as f64;
        loop {
            let points = ((2.0 * bound / spacing).round() as usize) + 1;
            let grid = symmetric_grid(bound, points);
            let qs: Vec<T> = grid.iter().map(|&q| T::lit(q)).collect();
            let pdf: Vec<f64> = quadrature_pdf(rho, T::lit(phi), &qs)?
                .into_iter()
                .map(|p| p.as_f64().max(0.0))
                .collect();
            let mut cdf = Vec::with_capacity(points);
            let mut acc = 0.0;
            cdf.push(0.0);
            for i in 1..points {
                acc += 0.5 * (grid[i] - grid[i - 1]) * (pdf[i] + pdf[i - 1]);
                cdf.push(acc);
            }
            let err = (acc - 1.0).abs();
            if err < spec.max_norm_error {
                cdf.iter_mut().for_each(|c| *c /= acc);
                return Ok(QuadratureSampler { grid, cdf });
            }
            if bound * 1.5 > spec.max_bound {
                let d = rho.dim() as f64;
                return Err(Error::GridTooNarrow {
                    error: err,
                    required_bound: ((2.0 * d + 1.0).sqrt() + 5.0).max(bound * 1.5),
                });
            }
            bound *= 1.5;
        }
    }

    /// Maps a uniform variate to a quadrature value by linear interpolation.
    pub fn invert(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (q0, q1) = (self.grid[i - 1], self.grid[i]);
        if c1 > c0 {
            q0 + (q1 - q0) * (u - c0) / (c1 - c0)
        } else {
            q0
        }
    }

    pub fn cdf_at(&self, q: f64) -> f64 {
        let i = self.grid.partition_point(|&g| g <= q);
        if i == 0 {
            return 0.0;
        }
        if i >= self.grid.len() {
            return 1.0;
        }
        let t = (q - self.grid[i - 1]) / (self.grid[i] - self.grid[i - 1]);
        self.cdf[i - 1] + t * (self.cdf[i] - self.cdf[i - 1])
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.invert(rng.random::<f64>())).collect()
    }
}

/// How the local-oscillator phase evolves from window to window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseModel {
    /// `φ_w = start + span · w / windows`.
    LinearSweep { start: f64, span: f64 },
    /// Gaussian steps of standard deviation `step` from `start`.
    RandomWalk { start: f64, step: f64 },
    Fixed(f64),
}

impl Default for PhaseModel {
    fn default() -> Self {
        PhaseModel::LinearSweep {
            start: 0.0,
            span: std::f64::consts::PI,
        }
    }
}

/// One local-oscillator phase per acquisition window.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub phases: Vec<f64>,
    pub model: PhaseModel,
}

impl PhaseTrajectory {
    pub fn generate(model: PhaseModel, windows: usize, seed: u64) -> Result<Self> {
        let phases: Vec<f64> = match model {
            PhaseModel::Fixed(phi) => vec![phi; windows],
            PhaseModel::LinearSweep { start, span } => (0..windows)
                .map(|w| start + span * w as f64 / windows as f64)
                .collect(),
            PhaseModel::RandomWalk { start, step } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::MAX);
                let normal = Normal::new(0.0, step)
                    .map_err(|e| Error::param("phase_step", e.to_string()))?;
                let mut phi = start;
                (0..windows)
                    .map(|_| {
                        let out = phi;
                        phi += normal.sample(&mut rng);
                        out
                    })
                    .collect()
            }
        };
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("phase", "non-finite trajectory"));
        }
        Ok(PhaseTrajectory { phases, model })
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    pub windows: usize,
    pub samples_per_window: usize,
    pub rng_seed: u64,
    pub vacuum_samples: usize,
    /// Detector gain applied to every raw sample (signal and vacuum).
    pub gain: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            windows: 100,
            samples_per_window: 1000,
            rng_seed: 1,
            vacuum_samples: 100_000,
            gain: 1.0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.windows == 0 {
            return Err(Error::param("windows", "must be positive"));
        }
        if self.samples_per_window == 0 {
            return Err(Error::param("samples_per_window", "must be positive"));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::param("gain", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.windows * self.samples_per_window
    }
}

/// Windowed homodyne record plus the vacuum calibration block.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    pub samples: Vec<Vec<f64>>,
    pub vacuum_calibration: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl QuadratureDataset {
    pub fn windows(&self) -> usize {
        self.samples.len()
    }

    pub fn total_samples(&self) -> usize {
        self.samples.iter().map(Vec::len).sum()
    }

    pub fn all_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().flatten().copied()
    }

    /// Variance of all signal samples pooled together.
    pub fn pooled_variance(&self) -> Option<f64> {
        let all: Vec<f64> = self.all_samples().collect();
        sample_variance(&all)
    }

    pub fn scale_factor(&self) -> Option<f64> {
        self.metadata.get("scale_factor").and_then(|s| s.parse().ok())
    }
}

/// Unbiased variance; `None` for fewer than two values.
pub fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    if values.iter().all(|&v| v == values[0]) {
        return Some(0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `samples_per_window` values per window from `pr(q|φ_w)` and
/// `vacuum_samples` values from the vacuum density.
pub fn sample_quadratures<T: Real>(
    rho: &DensityMatrix<T>,
    trajectory: &PhaseTrajectory,
    acq: &AcquisitionConfig,
) -> Result<QuadratureDataset> {
    sample_quadratures_on(rho, trajectory, acq, SamplingGrid::default())
}

pub fn sample_quadratures_on<T: Real>(
    rho: &DensityMatrix<T>,
    trajectory: &PhaseTrajectory,
    acq: &AcquisitionConfig,
    grid: SamplingGrid,
) -> Result<QuadratureDataset> {
    acq.validate()?;
    if trajectory.len() != acq.windows {
        return Err(Error::DimensionMismatch {
            expected: acq.windows,
            found: trajectory.len(),
        });
    }
    let samples = trajectory
        .phases
        .par_iter()
        .enumerate()
        .map(|(w, &phi)| {
            let sampler = QuadratureSampler::new(rho, phi, grid)?;
            let mut rng = stream_rng(acq.rng_seed, w as u64 + 1);
            let mut v = sampler.sample(&mut rng, acq.samples_per_window);
            v.iter_mut().for_each(|q| *q *= acq.gain);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let vacuum = DensityMatrix::<f64>::vacuum(FockCutoff::new(2)?);
    let vac_sampler = QuadratureSampler::new(&vacuum, 0.0, grid)?;
    let mut rng = stream_rng(acq.rng_seed, 0);
    let mut vacuum_calibration = vac_sampler.sample(&mut rng, acq.vacuum_samples);
    vacuum_calibration.iter_mut().for_each(|q| *q *= acq.gain);

    let mut metadata = BTreeMap::new();
    metadata.insert("seed".into(), acq.rng_seed.to_string());
    metadata.insert("windows".into(), acq.windows.to_string());
    metadata.insert("samples_per_window".into(), acq.samples_per_window.to_string());
    metadata.insert("vacuum_samples".into(), acq.vacuum_samples.to_string());
    metadata.insert("gain".into(), acq.gain.to_string());
    metadata.insert("cutoff".into(), rho.dim().to_string());
    Ok(QuadratureDataset {
        samples,
        vacuum_calibration,
        metadata,
    })
}

/// Rescales every sample so the calibration block has variance 1/2 and records
/// the factor as `scale_factor` (cumulative over repeated calls).
pub fn calibrate_scale(dataset: &QuadratureDataset) -> Result<QuadratureDataset> {
    if dataset.vacuum_calibration.is_empty() {
        return Err(Error::Calibration("empty vacuum calibration".into()));
    }
    let var = sample_variance(&dataset.vacuum_calibration)
        .ok_or_else(|| Error::Calibration("calibration needs at least two samples".into()))?;
    let (lo, hi) = dataset
        .vacuum_calibration
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &q| (lo.min(q), hi.max(q)));
    if !(var > 0.0) || !var.is_finite() || lo == hi {
        return Err(Error::Calibration(format!("calibration variance {}", var)));
    }
    let s = (0.5 / var).sqrt();
    let mut out = dataset.clone();
    out.samples
        .iter_mut()
        .flatten()
        .chain(out.vacuum_calibration.iter_mut())
        .for_each(|q| *q *= s);
    let total = dataset.scale_factor().unwrap_or(1.0) * s;
    out.metadata.insert("scale_factor".into(), total.to_string());
    Ok(out)
}
