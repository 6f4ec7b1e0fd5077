//! Observables and figures of merit computed from a density matrix.
//!
//! Phase-space conventions: `q = (a + a†)/√2`, `p = (a − a†)/(i√2)`, vacuum
//! variance 1/2, `∫∫ W dq dp = 1`. The measured quadrature
//! `Q_φ = (a e^{iφ} + a† e^{−iφ})/√2` equals `q` at `φ = 0` and `−p` at
//! `φ = π/2`.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::linalg;
use crate::scalar::{cis, cr, Real, C};

/// Standard-quantum-limit variance of any quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// `⟨a⟩`, `⟨a²⟩`, `⟨a†a⟩`.
fn ladder_moments<T: Real>(rho: &DensityMatrix<T>) -> (C<T>, C<T>, T) {
    let d = rho.dim();
    let mut a1 = cr(T::zero());
    let mut a2 = cr(T::zero());
    for m in 1..d {
        a1 += rho.get(m, m - 1) * cr(T::from_count(m).sqrt());
        if m >= 2 {
            a2 += rho.get(m, m - 2) * cr((T::from_count(m) * T::from_count(m - 1)).sqrt());
        }
    }
    (a1, a2, rho.mean_photon_number())
}

/// `⟨Q_φ²⟩ − ⟨Q_φ⟩²` from ladder-operator moments.
pub fn marginal_variance<T: Real>(rho: &DensityMatrix<T>, phi: T) -> T {
    let (a1, a2, n) = ladder_moments(rho);
    let mean = T::lit(2.0).sqrt() * (cis(phi) * a1).re;
    let second = (cis(phi * T::lit(2.0)) * a2).re + n + T::lit(0.5);
    second - mean * mean
}

/// `Δ²Q_φ = A + B cos(2(φ − φ₀))`, exact for every state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceLaw<T: Real> {
    pub a: T,
    pub b: T,
    /// Phase of the variance maximum, in `[0, π)`.
    pub phase_offset: T,
}

impl<T: Real> VarianceLaw<T> {
    pub fn of(rho: &DensityMatrix<T>) -> Self {
        let (a1, a2, n) = ladder_moments(rho);
        let z = a2 - a1 * a1;
        let a = n + T::lit(0.5) - a1.norm_sqr();
        let b = z.norm_sqr().sqrt();
        let mut phase = -z.im.atan2(z.re) * T::lit(0.5);
        if phase < T::zero() {
            phase += T::pi();
        }
        if phase >= T::pi() {
            phase -= T::pi();
        }
        VarianceLaw {
            a,
            b,
            phase_offset: phase,
        }
    }

    pub fn at(&self, phi: T) -> T {
        self.a + self.b * ((phi - self.phase_offset) * T::lit(2.0)).cos()
    }

    /// `⟨Q²₊⟩ = A + B`.
    pub fn q2_plus(&self) -> T {
        self.a + self.b
    }

    /// `⟨Q²₋⟩ = A − B`.
    pub fn q2_minus(&self) -> T {
        self.a - self.b
    }

    /// `(A+B)(A−B)`; 1/4 for minimum-uncertainty states.
    pub fn uncertainty_product(&self) -> T {
        self.q2_plus() * self.q2_minus()
    }
}

/// Rotates `rho` so that its quadrature variance peaks at `φ = 0`.
pub fn align_to_variance_maximum<T: Real>(rho: &DensityMatrix<T>) -> DensityMatrix<T> {
    let law = VarianceLaw::of(rho);
    if law.b <= T::tol(1e-12) {
        return rho.clone();
    }
    rho.rotated(law.phase_offset)
}

/// `η = Δ²Q − 1/2` under the model `η|1⟩⟨1| + (1−η)|0⟩⟨0|`.
pub fn efficiency_single_photon<T: Real>(variance: T) -> T {
    let half = T::lit(VACUUM_VARIANCE);
    if variance < half {
        warn!("variance {} below the vacuum level; single-photon efficiency is negative", variance);
    }
    variance - half
}

/// Efficiency from the extreme variances of a squeezed state:
/// `(2Q₊ + 2Q₋ − 4Q₊Q₋ − 1) / (2Q₊ + 2Q₋ − 2)`.
pub fn efficiency_squeezed<T: Real>(q2_plus: T, q2_minus: T) -> Result<T> {
    let two = T::lit(2.0);
    let denom = two * q2_plus + two * q2_minus - two;
    if denom.abs() < T::lit(1e-12) {
        return Err(Error::Unsqueezed(denom.as_f64()));
    }
    if q2_minus <= T::zero() || q2_plus < q2_minus {
        warn!("efficiency_squeezed expects q2_plus >= q2_minus > 0, got {} / {}", q2_plus, q2_minus);
    }
    let num = two * q2_plus + two * q2_minus - T::lit(4.0) * q2_plus * q2_minus - T::one();
    Ok(num / denom)
}

/// `−10 log₁₀(Q₋ / (1/2))`; positive below the standard quantum limit.
pub fn squeezing_db<T: Real>(q2_minus: T) -> T {
    -T::lit(10.0) * (q2_minus / T::lit(VACUUM_VARIANCE)).log10()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let s = linalg::psd_sqrt(rho.matrix());
    let inner = &s * sigma.matrix() * &s;
    let (vals, _) = linalg::hermitian_eigen(&linalg::hermitize(&inner));
    let tr = vals.iter().fold(T::zero(), |acc, &v| acc + v.max(T::zero()).sqrt());
    Ok((tr * tr).min(T::one()))
}

/// Efficiency figures derived from a state's variance law.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyReport<T: Real> {
    pub eta_single: T,
    /// `None` when the state is indistinguishable from vacuum.
    pub eta_squeezed: Option<T>,
    pub q2_plus: T,
    pub q2_minus: T,
    pub squeezing_db: T,
    pub warnings: Vec<String>,
}

impl<T: Real> EfficiencyReport<T> {
    /// `eta_single` uses the phase-averaged variance `A`; efficiencies outside
    /// `[0, 1]` are clamped and the raw value recorded in `warnings`.
    pub fn from_state(rho: &DensityMatrix<T>) -> Self {
        let law = VarianceLaw::of(rho);
        Self::from_variances(law.a, law.q2_plus(), law.q2_minus())
    }

    pub fn from_variances(mean_variance: T, q2_plus: T, q2_minus: T) -> Self {
        let mut warnings = Vec::new();
        let eta_single = clamp_unit("eta_single", efficiency_single_photon(mean_variance), &mut warnings);
        let eta_squeezed = match efficiency_squeezed(q2_plus, q2_minus) {
            Ok(v) => Some(clamp_unit("eta_squeezed", v, &mut warnings)),
            Err(e) => {
                warnings.push(format!("eta_squeezed undefined: {}", e));
                None
            }
        };
        for w in &warnings {
            warn!("{}", w);
        }
        EfficiencyReport {
            eta_single,
            eta_squeezed,
            q2_plus,
            q2_minus,
            squeezing_db: squeezing_db(q2_minus),
            warnings,
        }
    }
}

fn clamp_unit<T: Real>(name: &str, v: T, warnings: &mut Vec<String>) -> T {
    if v < T::zero() || v > T::one() {
        warnings.push(format!("{} = {} outside [0, 1]; clamped", name, v));
        v.max(T::zero()).min(T::one())
    } else {
        v
    }
}

/// Square phase-space grid `[-bound, bound]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerSpec {
    pub bound: f64,
    pub points: usize,
    /// Widening stops once the bound would exceed this.
    pub max_bound: f64,
}

impl Default for WignerSpec {
    fn default() -> Self {
        WignerSpec {
            bound: 4.0,
            points: 161,
            max_bound: 16.0,
        }
    }
}

/// Wigner function sampled on a grid; `values[(i, j)] = W(q_i, p_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid<T: Real> {
    pub q_axis: Vec<T>,
    pub p_axis: Vec<T>,
    pub values: DMatrix<T>,
}

impl<T: Real> WignerGrid<T> {
    pub fn integral(&self) -> T {
        let dq = self.q_axis[1] - self.q_axis[0];
        let dp = self.p_axis[1] - self.p_axis[0];
        let nq = self.q_axis.len();
        let np = self.p_axis.len();
        let mut acc = T::zero();
        for i in 0..nq {
            let wi = if i == 0 || i == nq - 1 { T::lit(0.5) } else { T::one() };
            for j in 0..np {
                let wj = if j == 0 || j == np - 1 { T::lit(0.5) } else { T::one() };
                acc += wi * wj * self.values[(i, j)];
            }
        }
        acc * dq * dp
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b))
    }
}

/// Fock-basis Wigner kernel evaluation at a single point.
///
/// `W_{|m⟩⟨n|}(q,p) = ((−1)ⁿ/π) √(n!/m!) (√2 (q − ip))^{m−n} e^{−r²} L_n^{(m−n)}(2r²)`
/// for `m ≥ n`; the `m < n` terms follow by conjugation.
pub fn wigner_point<T: Real>(rho: &DensityMatrix<T>, q: T, p: T) -> T {
    let d = rho.dim();
    let r2 = q * q + p * p;
    let x = T::lit(2.0) * r2;
    let gauss = (-r2).exp() / T::pi();
    let alpha = C::new(q, -p) * cr(T::lit(2.0).sqrt());
    let mut total = T::zero();
    // power = (√2 (q − ip))^k
    let mut power = cr(T::one());
    for k in 0..d {
        // L_n^{(k)}(x) for n = 0 … d−1−k by upward recurrence
        let kf = T::from_count(k);
        let mut l_prev = T::zero();
        let mut l_cur = T::one();
        // ratio = √(n!/(n+k)!)
        let mut ratio = T::one();
        for i in 1..=k {
            ratio /= T::from_count(i).sqrt();
        }
        for n in 0..(d - k) {
            if n > 0 {
                let nf = T::from_count(n);
                let next = ((T::lit(2.0) * nf - T::one() + kf - x) * l_cur
                    - (nf - T::one() + kf) * l_prev)
                    / nf;
                l_prev = l_cur;
                l_cur = next;
                ratio *= (nf / (nf + kf)).sqrt();
            }
            let sign = if n % 2 == 0 { T::one() } else { -T::one() };
            let kernel = power * cr(sign * ratio * l_cur);
            let m = n + k;
            if k == 0 {
                total += rho.get(n, n).re * kernel.re;
            } else {
                total += T::lit(2.0) * (rho.get(m, n) * kernel).re;
            }
        }
        power *= alpha;
    }
    total * gauss
}

/// Wigner function on a square grid, widening the grid (with a warning) until
/// the integral is 1 ± 1e−3.
pub fn wigner_function<T: Real>(rho: &DensityMatrix<T>, spec: WignerSpec) -> Result<WignerGrid<T>> {
    let mut bound = spec.bound;
    let spacing = 2.0 * spec.bound / (spec.points - 1) as f64;
    loop {
        let points = (2.0 * bound / spacing).round() as usize + 1;
        let axis: Vec<T> = crate::homodyne::symmetric_grid(bound, points)
            .into_iter()
            .map(T::lit)
            .collect();
        let values = DMatrix::from_fn(points, points, |i, j| wigner_point(rho, axis[i], axis[j]));
        let grid = WignerGrid {
            q_axis: axis.clone(),
            p_axis: axis,
            values,
        };
        let err = (grid.integral() - T::one()).abs();
        if err <= T::lit(1e-3) {
            return Ok(grid);
        }
        if bound * 1.5 > spec.max_bound {
            return Err(Error::GridTooNarrow {
                error: err.as_f64(),
                required_bound: bound * 1.5,
            });
        }
        warn!("Wigner integral off by {} on [-{b}, {b}]²; widening", err, b = bound);
        bound *= 1.5;
    }
}

/// Axis of a Wigner cross-section through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceAxis {
    /// `W(q, 0)`.
    Q,
    /// `W(0, p)`.
    P,
}

pub fn wigner_cross_section<T: Real>(grid: &WignerGrid<T>, axis: SliceAxis) -> Vec<(T, T)> {
    let nearest_zero = |ax: &[T]| {
        ax.iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0)
    };
    match axis {
        SliceAxis::Q => {
            let j = nearest_zero(&grid.p_axis);
            grid.q_axis.iter().enumerate().map(|(i, &q)| (q, grid.values[(i, j)])).collect()
        }
        SliceAxis::P => {
            let i = nearest_zero(&grid.q_axis);
            grid.p_axis.iter().enumerate().map(|(j, &p)| (p, grid.values[(i, j)])).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{squeezed_vacuum, FockCutoff};
    use crate::homodyne::{hermite_functions, quadrature_pdf, symmetric_grid, trapezoid};
    use crate::state_prep::{loss_apply, LossChannel};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn cut(d: usize) -> FockCutoff {
        FockCutoff::new(d).unwrap()
    }

    /// Wigner transform by direct integration,
    /// `W(q,p) = (1/π) ∫ ⟨q+y|ρ|q−y⟩ e^{−2ipy} dy`.
    fn wigner_by_integration(rho: &DensityMatrix<f64>, q: f64, p: f64) -> f64 {
        let ys = symmetric_grid(10.0, 4001);
        let d = rho.dim();
        let vals: Vec<f64> = ys
            .iter()
            .map(|&y| {
                let a = hermite_functions(q + y, d);
                let b = hermite_functions(q - y, d);
                let mut acc = C::new(0.0, 0.0);
                for n in 0..d {
                    for m in 0..d {
                        acc += rho.get(n, m) * a[n] * b[m];
                    }
                }
                (acc * C::new(0.0, -2.0 * p * y).exp()).re
            })
            .collect();
        trapezoid(&ys, &vals) / PI
    }

    #[test]
    fn wigner_origin_values() {
        let c = cut(6);
        let vac = DensityMatrix::<f64>::vacuum(c);
        assert_abs_diff_eq!(wigner_point(&vac, 0.0, 0.0), 1.0 / PI, epsilon = 1e-15);
        let one = DensityMatrix::<f64>::fock(1, c).unwrap();
        assert_abs_diff_eq!(wigner_point(&one, 0.0, 0.0), -1.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wigner_by_integration(&one, 0.0, 0.0), -1.0 / PI, epsilon = 1e-9);
        let mix = DensityMatrix::diagonal(&[0.45, 0.55, 0.0]).unwrap();
        assert_abs_diff_eq!(wigner_point(&mix, 0.0, 0.0), (1.0 - 1.1) / PI, epsilon = 1e-15);
    }

    #[test]
    fn wigner_kernel_matches_integration_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rho = DensityMatrix::<f64>::random(cut(6), &mut rng);
        for &(q, p) in &[(0.0, 0.0), (0.7, -0.3), (-1.2, 1.9), (2.5, 0.4)] {
            assert_abs_diff_eq!(
                wigner_point(&rho, q, p),
                wigner_by_integration(&rho, q, p),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn wigner_marginals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rho = DensityMatrix::<f64>::random(cut(8), &mut rng);
        let grid = wigner_function(&rho, WignerSpec::default()).unwrap();
        let dp = grid.p_axis[1] - grid.p_axis[0];
        let pdf0 = quadrature_pdf(&rho, 0.0, &grid.q_axis).unwrap();
        let pdf90 = quadrature_pdf(&rho, PI / 2.0, &grid.q_axis).unwrap();
        let n = grid.q_axis.len();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| grid.values[(i, j)]).sum::<f64>() * dp;
            assert_abs_diff_eq!(row, pdf0[i], epsilon = 1e-4);
            // integrating over q gives the φ = π/2 statistics at −p
            let col: f64 = (0..n).map(|j| grid.values[(j, i)]).sum::<f64>() * dp;
            assert_abs_diff_eq!(col, pdf90[n - 1 - i], epsilon = 1e-4);
        }
        assert_abs_diff_eq!(grid.integral(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn wigner_linearity() {
        let c = cut(5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let a = DensityMatrix::<f64>::random(c, &mut rng);
        let b = DensityMatrix::<f64>::random(c, &mut rng);
        let m = a.mix(&b, 0.3).unwrap();
        for &(q, p) in &[(0.1, 0.2), (-1.0, 0.5), (2.0, -2.0)] {
            let lhs = wigner_point(&m, q, p);
            let rhs = 0.3 * wigner_point(&a, q, p) + 0.7 * wigner_point(&b, q, p);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn wigner_auto_widens() {
        let rho = DensityMatrix::<f64>::fock(6, cut(8)).unwrap();
        let spec = WignerSpec {
            bound: 2.0,
            points: 81,
            max_bound: 16.0,
        };
        let grid = wigner_function(&rho, spec).unwrap();
        assert!(grid.q_axis[grid.q_axis.len() - 1] > 2.0);
        assert!(grid.min_value() >= -1.0 / PI - 1e-6);
    }

    #[test]
    fn cross_sections() {
        let vac = DensityMatrix::<f64>::vacuum(cut(4));
        let g = wigner_function(&vac, WignerSpec::default()).unwrap();
        let s = wigner_cross_section(&g, SliceAxis::Q);
        let n = s.len();
        for i in 0..n {
            assert_abs_diff_eq!(s[i].1, s[n - 1 - i].1, epsilon = 1e-15);
        }
        let one = DensityMatrix::diagonal(&[0.45, 0.55, 0.0, 0.0]).unwrap();
        let g = wigner_function(&one, WignerSpec::default()).unwrap();
        let sq = wigner_cross_section(&g, SliceAxis::Q);
        let sp = wigner_cross_section(&g, SliceAxis::P);
        for (a, b) in sq.iter().zip(&sp) {
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-9);
        }
        let crossings = sq.windows(2).filter(|w| f64::signum(w[0].1) != f64::signum(w[1].1)).count();
        assert_eq!(crossings, 2);
    }

    #[test]
    fn fock_variances() {
        for n in 0..=5 {
            let rho = DensityMatrix::<f64>::fock(n, cut(7)).unwrap();
            for k in 0..8 {
                let v = marginal_variance(&rho, k as f64 * PI / 8.0);
                assert_abs_diff_eq!(v, (2 * n + 1) as f64 / 2.0, epsilon = 1e-12);
            }
        }
        let mix = DensityMatrix::diagonal(&[0.45, 0.55, 0.0]).unwrap();
        for k in 0..8 {
            assert_abs_diff_eq!(marginal_variance(&mix, k as f64 * 0.4), 1.05, epsilon = 1e-12);
        }
    }

    #[test]
    fn squeezed_extremes() {
        let rho = squeezed_vacuum(0.1, cut(20)).unwrap();
        let law = VarianceLaw::of(&rho);
        assert_abs_diff_eq!(law.q2_plus(), 1.1 / 0.9 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(law.q2_minus(), 0.9 / 1.1 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(law.uncertainty_product(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(marginal_variance(&rho, PI / 2.0), 0.40909090909, epsilon = 1e-10);
        for k in 0..64 {
            let phi = k as f64 * PI / 64.0;
            assert_abs_diff_eq!(law.at(phi), marginal_variance(&rho, phi), epsilon = 1e-12);
        }
    }

    #[test]
    fn variance_matches_pdf_moment() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rho = DensityMatrix::<f64>::random(cut(6), &mut rng);
        let grid = symmetric_grid(10.0, 4001);
        for &phi in &[0.0, 0.6, 2.0] {
            let pdf = quadrature_pdf(&rho, phi, &grid).unwrap();
            let m1 = trapezoid(&grid, &grid.iter().zip(&pdf).map(|(q, p)| q * p).collect::<Vec<_>>());
            let m2 = trapezoid(&grid, &grid.iter().zip(&pdf).map(|(q, p)| q * q * p).collect::<Vec<_>>());
            assert_abs_diff_eq!(marginal_variance(&rho, phi), m2 - m1 * m1, epsilon = 1e-9);
        }
    }

    #[test]
    fn aligned_state_peaks_at_zero() {
        let rho = squeezed_vacuum(0.2, cut(12)).unwrap().rotated(0.7);
        let al = align_to_variance_maximum(&rho);
        let law = VarianceLaw::of(&al);
        assert!(f64::min(law.phase_offset, PI - law.phase_offset) < 1e-9);
    }

    #[test]
    fn single_photon_efficiency() {
        assert_abs_diff_eq!(efficiency_single_photon(1.05), 0.55, epsilon = 1e-15);
        assert_eq!(efficiency_single_photon(0.5), 0.0);
        assert_eq!(efficiency_single_photon(1.5), 1.0);
        assert!(efficiency_single_photon(0.4) < 0.0);
    }

    #[test]
    fn squeezed_efficiency() {
        let (p, m) = (1.1 / 0.9 / 2.0, 0.9 / 1.1 / 2.0);
        assert_abs_diff_eq!(efficiency_squeezed(p, m).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(efficiency_squeezed(0.5, 0.5), Err(Error::Unsqueezed(_))));
        // composed with the loss channel on a well-converged truncation
        let rho = squeezed_vacuum(0.1, cut(24)).unwrap();
        let lossy = loss_apply(&rho, &LossChannel::new(0.5).unwrap()).unwrap();
        let law = VarianceLaw::of(&lossy);
        assert_abs_diff_eq!(efficiency_squeezed(law.q2_plus(), law.q2_minus()).unwrap(), 0.5, epsilon = 1e-9);
        assert!(law.uncertainty_product() > 0.25);
    }

    #[test]
    fn efficiency_29_percent_round_trip() {
        // Q₊ that pairs with Q₋ = 0.43325 at η = 0.29, solved from the estimator
        let (eta, m) = (0.29, 0.43325);
        let p = (2.0 * m - 1.0 - 2.0 * eta * (m - 1.0)) / (2.0 * eta - 2.0 + 4.0 * m);
        assert_abs_diff_eq!(efficiency_squeezed(p, m).unwrap(), eta, epsilon = 1e-12);
        // the same pair from a pure squeezed state behind loss 0.29
        let s = (m - 0.5 * (1.0 - eta)) / (0.5 * eta);
        let lambda = (1.0 - s) / (1.0 + s);
        let rho = squeezed_vacuum(lambda, cut(48)).unwrap();
        let law = VarianceLaw::of(&loss_apply(&rho, &LossChannel::new(eta).unwrap()).unwrap());
        assert_abs_diff_eq!(law.q2_minus(), m, epsilon = 1e-9);
        assert_abs_diff_eq!(law.q2_plus(), p, epsilon = 1e-9);
        assert_abs_diff_eq!(efficiency_squeezed(law.q2_plus(), law.q2_minus()).unwrap(), eta, epsilon = 1e-9);
    }

    #[test]
    fn db_values() {
        assert_abs_diff_eq!(squeezing_db(0.5), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(squeezing_db(0.43325), 0.62, epsilon = 5e-3);
        assert_abs_diff_eq!(squeezing_db(0.25), 3.0103, epsilon = 1e-4);
    }

    #[test]
    fn fidelity_cases() {
        let c = cut(4);
        let v = DensityMatrix::<f64>::vacuum(c);
        let one = DensityMatrix::<f64>::fock(1, c).unwrap();
        let mix = DensityMatrix::diagonal(&[0.45, 0.55, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(fidelity(&v, &v).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&v, &one).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&v, &mix).unwrap(), 0.45, epsilon = 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = DensityMatrix::<f64>::random(c, &mut rng);
        let b = DensityMatrix::<f64>::random(c, &mut rng);
        assert_abs_diff_eq!(fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap(), epsilon = 1e-9);
        assert!(fidelity(&a, &DensityMatrix::vacuum(cut(5))).is_err());
    }

    #[test]
    fn report_for_lossy_photon_and_vacuum() {
        let mix = DensityMatrix::diagonal(&[0.45, 0.55, 0.0, 0.0]).unwrap();
        let r = EfficiencyReport::from_state(&mix);
        assert_abs_diff_eq!(r.eta_single, 0.55, epsilon = 1e-12);
        assert_eq!(r.eta_squeezed, Some(0.0));
        assert!(!r.warnings.is_empty());
        let vac = DensityMatrix::<f64>::vacuum(cut(4));
        let r = EfficiencyReport::from_state(&vac);
        assert_abs_diff_eq!(r.squeezing_db, 0.0, epsilon = 1e-9);
        assert!(r.eta_squeezed.is_none());
    }
}
