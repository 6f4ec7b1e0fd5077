//! Phase recovery from window variances and maximum-likelihood reconstruction.
//!
//! The variance of each window locates its local-oscillator phase on the law
//! `A + B cos 2φ`; the phased samples are then binned in `(q, φ)` and fed to
//! the RρR iteration.

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockCutoff};
use crate::homodyne::{hermite_functions, sample_variance, QuadratureDataset};
use crate::linalg;
use crate::scalar::{cis, cr, Real, C};

/// Sample variance of one acquisition window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowVariance {
    pub window_index: usize,
    pub variance: f64,
    pub count: usize,
    /// `variance · √(2/count)`.
    pub sigma_error: f64,
}

pub fn window_variances(dataset: &QuadratureDataset) -> Result<Vec<WindowVariance>> {
    dataset
        .samples
        .iter()
        .enumerate()
        .map(|(w, s)| {
            let variance = sample_variance(s).ok_or(Error::WindowTooSmall {
                window: w,
                count: s.len(),
            })?;
            Ok(WindowVariance {
                window_index: w,
                variance,
                count: s.len(),
                sigma_error: variance * (2.0 / s.len() as f64).sqrt(),
            })
        })
        .collect()
}

/// Fitted `Δ²Q_φ = A + B cos 2(φ − phase_offset)`.
///
/// The window data fix only the distribution of variances, so the fit is
/// expressed in a frame whose variance maximum sits at `phase_offset = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceFit {
    pub a: f64,
    pub b: f64,
    pub phase_offset: f64,
}

impl VarianceFit {
    pub fn q2_plus(&self) -> f64 {
        self.a + self.b
    }

    pub fn q2_minus(&self) -> f64 {
        self.a - self.b
    }

    pub fn uncertainty_product(&self) -> f64 {
        self.q2_plus() * self.q2_minus()
    }

    pub fn at(&self, phi: f64) -> f64 {
        self.a + self.b * (2.0 * (phi - self.phase_offset)).cos()
    }

    pub fn is_phase_sensitive(&self) -> bool {
        self.b > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    /// Windows whose spread passes a χ² test against `sigma_error` at this
    /// level are declared phase-insensitive.
    pub significance: f64,
    /// Remove the estimation noise from the quantiles before reading off `A`
    /// and `B`.
    pub deconvolve: bool,
    /// Odd moving-average width applied to the variances before the
    /// quantiles are taken; 0 or 1 disables it.
    pub smoothing: usize,
    pub levels: QuantileLevels,
}

/// Which empirical quantiles of the window variances enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantileLevels {
    /// Only the lower and upper quantile: `A` and `B` are their half-sum and
    /// half-difference.
    Extremes,
    /// `n` evenly spaced levels from the lower to the upper quantile, fitted
    /// by least squares to the quantile function of the drifting-phase model.
    Curve(usize),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lower_quantile: 0.02,
            upper_quantile: 0.98,
            significance: 0.01,
            deconvolve: true,
            smoothing: 3,
            levels: QuantileLevels::Curve(25),
        }
    }
}

pub const MIN_FIT_WINDOWS: usize = 3;

pub fn fit_variance_law(variances: &[WindowVariance]) -> Result<VarianceFit> {
    fit_variance_law_with(variances, &FitOptions::default())
}

pub fn fit_variance_law_with(variances: &[WindowVariance], opts: &FitOptions) -> Result<VarianceFit> {
    if variances.len() < MIN_FIT_WINDOWS {
        return Err(Error::TooFewWindows {
            required: MIN_FIT_WINDOWS,
            found: variances.len(),
        });
    }
    if !(0.0..0.5).contains(&opts.lower_quantile) || !(0.5..1.0).contains(&opts.upper_quantile) {
        return Err(Error::param("quantiles", "need 0 <= lower < 0.5 < upper < 1"));
    }
    let total: usize = variances.iter().map(|v| v.count).sum();
    let mean = variances.iter().map(|v| v.variance * v.count as f64).sum::<f64>() / total as f64;

    // Phase-insensitive if the scatter is explained by estimation noise.
    let chi2: f64 = variances
        .iter()
        .map(|v| (v.variance - mean).powi(2) * v.count as f64 / (2.0 * mean * mean))
        .sum();
    let dist = ChiSquared::new((variances.len() - 1) as f64).map_err(|e| Error::param("windows", e.to_string()))?;
    if mean <= 0.0 || 1.0 - dist.cdf(chi2) > opts.significance {
        return Ok(VarianceFit {
            a: mean.max(0.0),
            b: 0.0,
            phase_offset: 0.0,
        });
    }

    let smoothed = smooth_variances(variances, opts.smoothing);
    let mut sorted: Vec<f64> = smoothed.iter().map(|v| v.variance).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (p_lo, p_hi) = (opts.lower_quantile, opts.upper_quantile);
    let lo = quantile(&sorted, p_lo);
    let hi = quantile(&sorted, p_hi);
    let mut a = 0.5 * (hi + lo);
    let mut b = 0.5 * (hi - lo);

    let levels: Vec<f64> = match opts.levels {
        QuantileLevels::Extremes => vec![p_lo, p_hi],
        QuantileLevels::Curve(n) => {
            let n = n.max(2);
            (0..n).map(|i| p_lo + (p_hi - p_lo) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let rel_noise = (smoothed.iter().map(|v| 2.0 / v.count as f64).sum::<f64>() / smoothed.len() as f64).sqrt();
    let noisy = opts.deconvolve && rel_noise > 0.0;
    if noisy || opts.levels != QuantileLevels::Extremes {
        let model = NoisyLaw::new(if noisy { rel_noise } else { 0.0 });
        let observed: Vec<f64> = levels.iter().map(|&p| quantile(&sorted, p)).collect();
        let shape: Vec<f64> = levels.iter().map(|&p| -(std::f64::consts::PI * p).cos()).collect();
        // Gauss–Newton with the noise-free shape as Jacobian
        let n = levels.len() as f64;
        let sg: f64 = shape.iter().sum();
        let sgg: f64 = shape.iter().map(|g| g * g).sum();
        let det = n * sgg - sg * sg;
        for _ in 0..200 {
            let resid: Vec<f64> = levels
                .iter()
                .zip(&observed)
                .map(|(&p, &o)| o - model.quantile(a, b, p))
                .collect();
            let sr: f64 = resid.iter().sum();
            let sgr: f64 = resid.iter().zip(&shape).map(|(r, g)| r * g).sum();
            let da = (sgg * sr - sg * sgr) / det;
            let db = (n * sgr - sg * sr) / det;
            a += da;
            b = (b + db).max(0.0);
            if da.abs() < 1e-12 && db.abs() < 1e-12 {
                break;
            }
        }
    }
    Ok(VarianceFit {
        a,
        b: b.min(a).max(0.0),
        phase_offset: 0.0,
    })
}

/// Sample-weighted moving average over `width` consecutive windows (odd;
/// truncated at the ends). `count` becomes the number of pooled samples.
pub fn smooth_variances(variances: &[WindowVariance], width: usize) -> Vec<WindowVariance> {
    let half = width.max(1) / 2;
    (0..variances.len())
        .map(|w| {
            let span = &variances[w.saturating_sub(half)..(w + half + 1).min(variances.len())];
            let count: usize = span.iter().map(|v| v.count).sum();
            let variance = span.iter().map(|v| v.variance * v.count as f64).sum::<f64>() / count as f64;
            WindowVariance {
                window_index: variances[w].window_index,
                variance,
                count,
                sigma_error: variance * (2.0 / count as f64).sqrt(),
            }
        })
        .collect()
}

/// Linear-interpolation empirical quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Distribution of `V(1 + c Z)` with `V = A + B cos(πU)`, `U` uniform and `Z`
/// standard normal: the window variance of a uniformly drifting phase.
struct NoisyLaw {
    rel_noise: f64,
    normal: Normal,
    nodes: Vec<f64>,
}

impl NoisyLaw {
    fn new(rel_noise: f64) -> Self {
        let n = 256;
        NoisyLaw {
            rel_noise,
            normal: Normal::standard(),
            nodes: (0..n).map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos()).collect(),
        }
    }

    fn cdf(&self, a: f64, b: f64, x: f64) -> f64 {
        let sum: f64 = self
            .nodes
            .iter()
            .map(|&c| {
                let v = (a + b * c).max(1e-300);
                self.normal.cdf((x / v - 1.0) / self.rel_noise)
            })
            .sum();
        sum / self.nodes.len() as f64
    }

    fn quantile(&self, a: f64, b: f64, p: f64) -> f64 {
        if self.rel_noise == 0.0 {
            return a - b * (std::f64::consts::PI * p).cos();
        }
        let spread = 10.0 * self.rel_noise;
        let mut lo = (a - b) * (1.0 - spread) - 1e-12;
        let mut hi = (a + b) * (1.0 + spread) + 1e-12;
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(a, b, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A quadrature value with its assigned local-oscillator phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasedSample {
    pub q: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseAssignment {
    /// Resolve `φ ↔ π − φ` by continuity across consecutive windows,
    /// producing phases in `[0, π)`.
    pub unfold: bool,
    /// Phase used for every window when the fit has `B = 0`.
    pub fixed_phase: Option<f64>,
    /// Odd moving-average width applied to window variances before inverting
    /// the law; 0 or 1 disables it.
    pub smoothing: usize,
}

/// `½ arccos((v − A)/B)`, clamped to `[0, π/2]`.
pub fn phase_from_variance(v: f64, fit: &VarianceFit) -> f64 {
    0.5 * ((v - fit.a) / fit.b).clamp(-1.0, 1.0).acos()
}

pub fn assign_phases(dataset: &QuadratureDataset, fit: &VarianceFit) -> Result<Vec<PhasedSample>> {
    assign_phases_with(dataset, fit, &PhaseAssignment::default())
}

pub fn assign_phases_with(
    dataset: &QuadratureDataset,
    fit: &VarianceFit,
    opts: &PhaseAssignment,
) -> Result<Vec<PhasedSample>> {
    let phases = window_phases(dataset, fit, opts)?;
    Ok(dataset
        .samples
        .iter()
        .zip(&phases)
        .flat_map(|(s, &phi)| s.iter().map(move |&q| PhasedSample { q, phi }))
        .collect())
}

/// Per-window phases under the same rules as [`assign_phases_with`].
pub fn window_phases(dataset: &QuadratureDataset, fit: &VarianceFit, opts: &PhaseAssignment) -> Result<Vec<f64>> {
    if !fit.is_phase_sensitive() {
        return match opts.fixed_phase {
            Some(phi) => Ok(vec![phi.rem_euclid(std::f64::consts::PI); dataset.windows()]),
            None => Err(Error::PhaseInsensitive),
        };
    }
    let smoothed = smooth_variances(&window_variances(dataset)?, opts.smoothing);
    let folded: Vec<f64> = smoothed.iter().map(|v| phase_from_variance(v.variance, fit)).collect();
    Ok(if opts.unfold { unfold(&folded) } else { folded })
}

/// Picks `f` or `π − f` for each window, whichever lies closer (modulo π) to
/// a linear extrapolation of the preceding windows. The slope is a
/// least-squares fit over the last few unfolded phases, long enough to bridge
/// the short plateaus that clamping leaves at the variance extremes.
fn unfold(folded: &[f64]) -> Vec<f64> {
    use std::f64::consts::PI;
    const HISTORY: usize = 8;
    let circ = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    };
    // continuous lift of the chosen branch
    let mut lifted: Vec<f64> = Vec::with_capacity(folded.len());
    for &f in folded {
        let candidates = [f, PI - f];
        let next = match lifted.len() {
            0 => f,
            k => {
                let start = k.saturating_sub(HISTORY);
                let hist = &lifted[start..];
                let m = hist.len() as f64;
                let slope = if hist.len() >= 2 {
                    let xm = (m - 1.0) / 2.0;
                    let ym = hist.iter().sum::<f64>() / m;
                    let sxy: f64 = hist.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
                    let sxx: f64 = (0..hist.len()).map(|i| (i as f64 - xm).powi(2)).sum();
                    sxy / sxx
                } else {
                    0.0
                };
                let predicted = lifted[k - 1] + slope;
                let best = if circ(candidates[1], predicted) < circ(candidates[0], predicted) {
                    candidates[1]
                } else {
                    candidates[0]
                };
                // lift next to the prediction
                let delta = (best - predicted).rem_euclid(PI);
                let delta = if delta > PI / 2.0 { delta - PI } else { delta };
                predicted + delta
            }
        };
        lifted.push(next);
    }
    lifted.into_iter().map(|p| p.rem_euclid(PI)).collect()
}

/// `|x_φ⟩⟨x_φ|` at `q` in the Fock basis, normalized so that
/// `Tr[Π ρ] = pr(q|φ)`. Entries are `ψ_n ψ_m e^{−i(n−m)φ}`.
pub fn quadrature_projector<T: Real>(q: T, phi: T, cutoff: FockCutoff) -> DMatrix<C<T>> {
    let u = projector_vector(q, phi, cutoff.dim());
    DMatrix::from_fn(u.len(), u.len(), |r, c| u[r].conj() * u[c])
}

fn projector_vector<T: Real>(q: T, phi: T, d: usize) -> Vec<C<T>> {
    hermite_functions(q, d)
        .into_iter()
        .enumerate()
        .map(|(n, p)| cis(phi * T::from_count(n)) * cr(p))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionSettings {
    pub cutoff: FockCutoff,
    pub max_iterations: usize,
    /// Stop once the per-sample log-likelihood gain falls below this.
    pub log_likelihood_tolerance: f64,
    pub phase_bins: usize,
    pub q_bins: usize,
}

impl Default for ReconstructionSettings {
    fn default() -> Self {
        ReconstructionSettings {
            cutoff: FockCutoff::default(),
            max_iterations: 2000,
            log_likelihood_tolerance: 1e-10,
            phase_bins: 12,
            q_bins: 100,
        }
    }
}

impl ReconstructionSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be positive"));
        }
        if !(self.log_likelihood_tolerance > 0.0) {
            return Err(Error::param("loglik_tolerance", "must be positive"));
        }
        if self.phase_bins == 0 || self.q_bins == 0 {
            return Err(Error::param("bins", "bin counts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedState<T: Real> {
    pub rho: DensityMatrix<T>,
    pub iterations_used: usize,
    /// Per-sample log-likelihood, starting with the initial `I/D`.
    pub log_likelihood_trace: Vec<f64>,
    /// Bins dropped because their probability underflowed.
    pub skipped_bins: usize,
}

impl<T: Real> ReconstructedState<T> {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().unwrap_or(&f64::NEG_INFINITY)
    }
}

/// Measurement operators and relative frequencies of the occupied bins.
#[derive(Debug, Clone)]
pub struct BinnedData<T: Real> {
    cutoff: FockCutoff,
    projectors: Vec<DMatrix<C<T>>>,
    frequencies: Vec<f64>,
}

/// Three-point Gauss–Legendre rule on `[-1, 1]`.
const GAUSS_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
const BIN_CHUNK: usize = 64;

fn q_range(max_abs_q: f64, cutoff: FockCutoff) -> f64 {
    let classical = (2.0 * cutoff.dim() as f64 + 1.0).sqrt() + 4.0;
    (max_abs_q * (1.0 + 1e-9)).max(classical)
}

fn bin_index(x: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1)
}

/// `∫ over a q-bin of Π(q, φ) dq`, given a per-point projector vector.
fn integrated_projector<T: Real>(
    q_lo: f64,
    q_hi: f64,
    d: usize,
    vector: impl Fn(f64) -> Vec<C<T>>,
) -> DMatrix<C<T>> {
    let half = 0.5 * (q_hi - q_lo);
    let mid = 0.5 * (q_hi + q_lo);
    let mut m = DMatrix::zeros(d, d);
    for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
        let u = vector(mid + half * x);
        let wt = cr(T::lit(w * half));
        for r in 0..d {
            let ur = u[r].conj() * wt;
            for c in 0..d {
                m[(r, c)] += ur * u[c];
            }
        }
    }
    m
}

impl<T: Real> BinnedData<T> {
    /// Bins phased samples on a `q_bins × phase_bins` grid over `[0, π/2]`.
    /// Each phase bin uses the mean phase of its samples.
    ///
    /// Folded phases carry no information on the sign of `φ`, so when every
    /// phase lies in `[0, π/2]` each sample is also entered at `π − φ` and
    /// `2·phase_bins` bins cover `[0, π)`. This ties the likelihood to states
    /// symmetric under `φ → −φ`, which is what folding presumes. Phases beyond
    /// `π/2` are binned as given over `[0, π)` with `2·phase_bins` bins.
    pub fn from_phased(samples: &[PhasedSample], settings: &ReconstructionSettings) -> Result<Self> {
        use std::f64::consts::PI;
        settings.validate()?;
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        if samples.iter().any(|s| !s.q.is_finite() || !s.phi.is_finite()) {
            return Err(Error::param("samples", "non-finite quadrature or phase"));
        }
        let d = settings.cutoff.dim();
        let qmax = q_range(samples.iter().fold(0.0f64, |m, s| m.max(s.q.abs())), settings.cutoff);
        let q_width = 2.0 * qmax / settings.q_bins as f64;
        let folded = samples.iter().all(|s| s.phi.rem_euclid(PI) <= PI / 2.0 + 1e-12);
        let phase_bins = 2 * settings.phase_bins;
        let phi_width = PI / phase_bins as f64;

        let mut counts = vec![0usize; phase_bins * settings.q_bins];
        let mut phase_sum = vec![0.0; phase_bins];
        let mut phase_count = vec![0usize; phase_bins];
        let mut entries = 0usize;
        let mut enter = |phi: f64, q: f64| {
            let k = bin_index(phi, 0.0, phi_width, phase_bins);
            let j = bin_index(q, -qmax, q_width, settings.q_bins);
            counts[k * settings.q_bins + j] += 1;
            phase_sum[k] += phi;
            phase_count[k] += 1;
            entries += 1;
        };
        for s in samples {
            let phi = s.phi.rem_euclid(PI);
            enter(phi, s.q);
            if folded {
                enter((PI - phi).rem_euclid(PI), s.q);
            }
        }
        let total = entries as f64;
        let occupied: Vec<(usize, usize, usize)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(idx, &c)| (idx / settings.q_bins, idx % settings.q_bins, c))
            .collect();
        let projectors: Vec<DMatrix<C<T>>> = occupied
            .par_iter()
            .map(|&(k, j, _)| {
                let phi = T::lit(phase_sum[k] / phase_count[k] as f64);
                let lo = -qmax + j as f64 * q_width;
                integrated_projector(lo, lo + q_width, d, |q| projector_vector(T::lit(q), phi, d))
            })
            .collect();
        Ok(BinnedData {
            cutoff: settings.cutoff,
            projectors,
            frequencies: occupied.iter().map(|&(_, _, c)| c as f64 / total).collect(),
        })
    }

    /// Bins quadratures of unknown phase against the phase-averaged projector
    /// `Σ_n ψ_n(q)² |n⟩⟨n|`; the result is diagonal in the Fock basis.
    pub fn from_phase_averaged(samples: &[f64], settings: &ReconstructionSettings) -> Result<Self> {
        settings.validate()?;
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        if samples.iter().any(|q| !q.is_finite()) {
            return Err(Error::param("samples", "non-finite quadrature"));
        }
        let d = settings.cutoff.dim();
        let qmax = q_range(samples.iter().fold(0.0f64, |m, q| m.max(q.abs())), settings.cutoff);
        let q_width = 2.0 * qmax / settings.q_bins as f64;
        let mut counts = vec![0usize; settings.q_bins];
        for &q in samples {
            counts[bin_index(q, -qmax, q_width, settings.q_bins)] += 1;
        }
        let total = samples.len() as f64;
        let mut projectors = Vec::new();
        let mut frequencies = Vec::new();
        for (j, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let lo = -qmax + j as f64 * q_width;
            let half = 0.5 * q_width;
            let mid = lo + half;
            let mut diag = vec![0.0; d];
            for (x, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                for (acc, p) in diag.iter_mut().zip(hermite_functions(mid + half * x, d)) {
                    *acc += w * half * p * p;
                }
            }
            projectors.push(DMatrix::from_fn(d, d, |r, c| if r == c { cr(T::lit(diag[r])) } else { cr(T::zero()) }));
            frequencies.push(c as f64 / total);
        }
        Ok(BinnedData {
            cutoff: settings.cutoff,
            projectors,
            frequencies,
        })
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[DMatrix<C<T>>] {
        &self.projectors
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Replaces the observed frequencies, e.g. with exact bin probabilities.
    pub fn with_frequencies(mut self, frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.len() != self.projectors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.projectors.len(),
                found: frequencies.len(),
            });
        }
        self.frequencies = frequencies;
        Ok(self)
    }

    /// Bin probabilities `Tr[Π_j ρ]`.
    pub fn probabilities(&self, rho: &DensityMatrix<T>) -> Vec<f64> {
        self.projectors.iter().map(|p| trace_product(p, rho.matrix()).as_f64()).collect()
    }

    /// Per-sample log-likelihood of `rho`.
    pub fn log_likelihood(&self, rho: &DensityMatrix<T>) -> f64 {
        self.evaluate(rho.matrix()).0
    }

    /// One full iteration `R ρ R / Tr[R ρ R]`.
    pub fn rho_r_step(&self, rho: &DensityMatrix<T>) -> DensityMatrix<T> {
        let (_, r, _) = self.evaluate(rho.matrix());
        DensityMatrix::from_raw(normalized_sandwich(&r, rho.matrix()))
    }

    /// Per-sample log-likelihood and `R(ρ)`; degenerate bins are skipped.
    /// Partial sums are formed over fixed chunks and combined in order, so the
    /// result does not depend on the thread count.
    fn evaluate(&self, rho: &DMatrix<C<T>>) -> (f64, DMatrix<C<T>>, usize) {
        let d = self.cutoff.dim();
        let partials: Vec<(f64, DMatrix<C<T>>, usize)> = self
            .projectors
            .par_chunks(BIN_CHUNK)
            .zip(self.frequencies.par_chunks(BIN_CHUNK))
            .map(|(projs, freqs)| {
                let mut ll = 0.0;
                let mut r = DMatrix::zeros(d, d);
                let mut skipped = 0;
                for (p, &f) in projs.iter().zip(freqs) {
                    let prob = trace_product(p, rho).as_f64();
                    if !(prob >= 1e-300) {
                        skipped += 1;
                        continue;
                    }
                    ll += f * prob.ln();
                    r += p * cr(T::lit(f / prob));
                }
                (ll, r, skipped)
            })
            .collect();
        let mut ll = 0.0;
        let mut r = DMatrix::zeros(d, d);
        let mut skipped = 0;
        for (l, m, s) in partials {
            ll += l;
            r += m;
            skipped += s;
        }
        (ll, r, skipped)
    }
}

/// `Tr[A B]` for Hermitian `A`, `B`.
fn trace_product<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> T {
    let d = a.nrows();
    let mut acc = T::zero();
    for r in 0..d {
        for c in 0..d {
            acc += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    acc
}

fn normalized_sandwich<T: Real>(m: &DMatrix<C<T>>, rho: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let out = linalg::hermitize(&(m * rho * m));
    let tr = linalg::trace(&out).re;
    out / cr(tr)
}

pub fn maxlik_reconstruct<T: Real>(
    samples: &[PhasedSample],
    settings: &ReconstructionSettings,
) -> Result<ReconstructedState<T>> {
    maxlik_iterate(&BinnedData::from_phased(samples, settings)?, settings)
}

/// Reconstruction for phase-insensitive data (`B = 0`).
pub fn maxlik_reconstruct_phase_averaged<T: Real>(
    samples: &[f64],
    settings: &ReconstructionSettings,
) -> Result<ReconstructedState<T>> {
    maxlik_iterate(&BinnedData::from_phase_averaged(samples, settings)?, settings)
}

pub fn maxlik_iterate<T: Real>(data: &BinnedData<T>, settings: &ReconstructionSettings) -> Result<ReconstructedState<T>> {
    maxlik_iterate_observed(data, settings, |_, _| {})
}

/// RρR iteration from `I/D`. When a full step would lower the likelihood the
/// diluted step `(I + εR) ρ (I + εR)` is taken instead, halving `ε` until the
/// likelihood does not decrease. `observe` sees every accepted iterate.
pub fn maxlik_iterate_observed<T: Real>(
    data: &BinnedData<T>,
    settings: &ReconstructionSettings,
    mut observe: impl FnMut(usize, &DMatrix<C<T>>),
) -> Result<ReconstructedState<T>> {
    settings.validate()?;
    if data.is_empty() {
        return Err(Error::NoSamples);
    }
    if data.cutoff != settings.cutoff {
        return Err(Error::DimensionMismatch {
            expected: settings.cutoff.dim(),
            found: data.cutoff.dim(),
        });
    }
    let d = settings.cutoff.dim();
    let identity = DMatrix::<C<T>>::identity(d, d);
    let mut rho = identity.clone() / cr(T::from_count(d));
    let (mut ll, mut r, skipped) = data.evaluate(&rho);
    if skipped == data.len() {
        return Err(Error::DegenerateLikelihood);
    }
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut last_skipped = skipped;
    observe(0, &rho);
    while iterations < settings.max_iterations {
        let mut accepted = None;
        let full = normalized_sandwich(&r, &rho);
        let (ll_full, r_full, s_full) = data.evaluate(&full);
        if s_full < data.len() && ll_full >= ll {
            accepted = Some((full, ll_full, r_full, s_full));
        } else {
            let mut eps = 1.0;
            for _ in 0..40 {
                let m = &identity + &r * cr(T::lit(eps));
                let cand = normalized_sandwich(&m, &rho);
                let (l, rr, s) = data.evaluate(&cand);
                if s < data.len() && l >= ll {
                    accepted = Some((cand, l, rr, s));
                    break;
                }
                eps *= 0.5;
            }
        }
        let Some((next, ll_next, r_next, s_next)) = accepted else {
            break;
        };
        iterations += 1;
        let gain = ll_next - ll;
        rho = next;
        ll = ll_next;
        r = r_next;
        last_skipped = s_next;
        trace.push(ll);
        observe(iterations, &rho);
        if gain < settings.log_likelihood_tolerance {
            break;
        }
    }
    if last_skipped > 0 {
        warn!("{} of {} bins skipped with vanishing probability", last_skipped, data.len());
    }
    Ok(ReconstructedState {
        rho: DensityMatrix::from_unnormalized(rho)?,
        iterations_used: iterations,
        log_likelihood_trace: trace,
        skipped_bins: last_skipped,
    })
}
