//! Truncated Fock-space states and operators for one or two bosonic modes.
//!
//! Two-mode objects use the basis `|n⟩_signal ⊗ |m⟩_trigger` flattened as
//! `k = n·D + m`, where `D` is the single-mode cutoff.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{cis, cr, Real, C};

/// Number of retained Fock levels `D` (basis `|0⟩ … |D−1⟩`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockCutoff(usize);

impl FockCutoff {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidCutoff(dim));
        }
        Ok(FockCutoff(dim))
    }

    #[inline]
    pub fn dim(self) -> usize {
        self.0
    }

    /// Dimension of the two-mode space, `D²`.
    #[inline]
    pub fn joint_dim(self) -> usize {
        self.0 * self.0
    }

    #[inline]
    pub fn joint_index(self, signal: usize, trigger: usize) -> usize {
        signal * self.0 + trigger
    }

    fn check(self, found: usize) -> Result<()> {
        if found != self.0 {
            return Err(Error::DimensionMismatch {
                expected: self.0,
                found,
            });
        }
        Ok(())
    }
}

impl Default for FockCutoff {
    fn default() -> Self {
        FockCutoff(10)
    }
}

/// Single-mode density matrix over a truncated Fock basis.
///
/// Construction checks Hermiticity (1e−10), unit trace (1e−9) and positivity
/// (smallest eigenvalue ≥ −1e−9).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    entries: DMatrix<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(entries: DMatrix<C<T>>) -> Result<Self> {
        let rho = DensityMatrix { entries };
        rho.validate()?;
        Ok(rho)
    }

    /// Hermitizes and trace-normalizes `entries` before validating.
    pub fn from_unnormalized(entries: DMatrix<C<T>>) -> Result<Self> {
        let h = linalg::hermitize(&entries);
        let tr = linalg::trace(&h).re;
        if !(tr > T::zero()) {
            return Err(Error::InvalidState(format!("non-positive trace {}", tr)));
        }
        Self::new(h / cr(tr))
    }

    pub fn fock(n: usize, cutoff: FockCutoff) -> Result<Self> {
        if n >= cutoff.dim() {
            return Err(Error::param("n", format!("{} outside cutoff {}", n, cutoff.dim())));
        }
        let mut m = DMatrix::zeros(cutoff.dim(), cutoff.dim());
        m[(n, n)] = cr(T::one());
        Ok(DensityMatrix { entries: m })
    }

    pub fn vacuum(cutoff: FockCutoff) -> Self {
        Self::fock(0, cutoff).expect("vacuum is inside any cutoff")
    }

    /// Diagonal state from Fock populations (normalized).
    pub fn diagonal(populations: &[T]) -> Result<Self> {
        FockCutoff::new(populations.len())?;
        let d = DVector::from_iterator(populations.len(), populations.iter().map(|&p| cr(p)));
        Self::from_unnormalized(DMatrix::from_diagonal(&d))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) amplitude vector.
    pub fn from_pure(amplitudes: &DVector<C<T>>) -> Result<Self> {
        FockCutoff::new(amplitudes.len())?;
        Self::from_unnormalized(amplitudes * amplitudes.adjoint())
    }

    /// Random full-rank state `G G† / Tr(G G†)` from a complex Ginibre matrix.
    pub fn random<R: rand::Rng>(cutoff: FockCutoff, rng: &mut R) -> Self {
        let d = cutoff.dim();
        let normal = rand_distr::StandardNormal;
        let g = DMatrix::<C<T>>::from_fn(d, d, |_, _| {
            let re: f64 = rng.sample(normal);
            let im: f64 = rng.sample(normal);
            C::new(T::lit(re), T::lit(im))
        });
        Self::from_unnormalized(&g * g.adjoint()).expect("Ginibre product is a valid state")
    }

    /// Wraps a matrix without checking invariants.
    pub(crate) fn from_raw(entries: DMatrix<C<T>>) -> Self {
        DensityMatrix { entries }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.entries;
        if !m.is_square() {
            return Err(Error::InvalidState("matrix is not square".into()));
        }
        FockCutoff::new(m.nrows())?;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let herm = linalg::hermiticity_defect(m);
        if herm > T::tol(1e-10) {
            return Err(Error::InvalidState(format!("not Hermitian (defect {})", herm)));
        }
        let tr = linalg::trace(m);
        if (tr.re - T::one()).abs() > T::tol(1e-9) || tr.im.abs() > T::tol(1e-9) {
            return Err(Error::InvalidState(format!("trace {} != 1", tr)));
        }
        let min = linalg::min_eigenvalue(m);
        if min < -T::tol(1e-9) {
            return Err(Error::InvalidState(format!("not positive semidefinite (eigenvalue {})", min)));
        }
        Ok(())
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.entries
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cutoff(&self) -> FockCutoff {
        FockCutoff(self.dim())
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> C<T> {
        self.entries[(n, m)]
    }

    pub fn populations(&self) -> Vec<T> {
        (0..self.dim()).map(|n| self.entries[(n, n)].re).collect()
    }

    pub fn mean_photon_number(&self) -> T {
        self.populations()
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (n, &p)| acc + T::from_count(n) * p)
    }

    pub fn min_eigenvalue(&self) -> T {
        linalg::min_eigenvalue(&self.entries)
    }

    /// Phase-space rotation `V ρ V†` with `V = diag(e^{i n φ})`.
    pub fn rotated(&self, phi: T) -> Self {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |n, k| {
            self.entries[(n, k)] * cis(phi * (T::from_count(n) - T::from_count(k)))
        });
        DensityMatrix { entries: m }
    }

    /// Elementwise complex conjugate (phase-space reflection p → −p).
    pub fn conjugated(&self) -> Self {
        DensityMatrix {
            entries: self.entries.map(|z| z.conj()),
        }
    }

    /// Embeds into a larger cutoff by zero padding.
    pub fn padded(&self, cutoff: FockCutoff) -> Result<Self> {
        if cutoff.dim() < self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: cutoff.dim(),
            });
        }
        let mut m = DMatrix::zeros(cutoff.dim(), cutoff.dim());
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.entries);
        Ok(DensityMatrix { entries: m })
    }

    /// Convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, other: &Self, w: T) -> Result<Self> {
        self.cutoff().check(other.dim())?;
        Ok(DensityMatrix {
            entries: &self.entries * cr(w) + &other.entries * cr(T::one() - w),
        })
    }

    /// Top-left `D×D` block, renormalized.
    pub fn truncated(&self, cutoff: FockCutoff) -> Result<Self> {
        if cutoff.dim() > self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: cutoff.dim(),
            });
        }
        let block = self.entries.view((0, 0), (cutoff.dim(), cutoff.dim())).into_owned();
        Self::from_unnormalized(block)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        linalg::max_abs(&(&self.entries - &other.entries))
    }
}

/// Which mode of a two-mode state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Signal,
    Trigger,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TwoModeRepr<T: Real> {
    Pure(DVector<C<T>>),
    Mixed(DMatrix<C<T>>),
}

/// Two-mode state over `|n⟩_signal ⊗ |m⟩_trigger`, flat index `n·D + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState<T: Real> {
    cutoff: FockCutoff,
    repr: TwoModeRepr<T>,
}

impl<T: Real> TwoModeState<T> {
    pub fn pure(cutoff: FockCutoff, amplitudes: DVector<C<T>>) -> Result<Self> {
        if amplitudes.len() != cutoff.joint_dim() {
            return Err(Error::DimensionMismatch {
                expected: cutoff.joint_dim(),
                found: amplitudes.len(),
            });
        }
        Ok(TwoModeState {
            cutoff,
            repr: TwoModeRepr::Pure(amplitudes),
        })
    }

    pub fn mixed(cutoff: FockCutoff, rho: DMatrix<C<T>>) -> Result<Self> {
        if rho.nrows() != cutoff.joint_dim() || rho.ncols() != cutoff.joint_dim() {
            return Err(Error::DimensionMismatch {
                expected: cutoff.joint_dim(),
                found: rho.nrows(),
            });
        }
        Ok(TwoModeState {
            cutoff,
            repr: TwoModeRepr::Mixed(rho),
        })
    }

    /// `|n, m⟩`.
    pub fn basis(cutoff: FockCutoff, signal: usize, trigger: usize) -> Result<Self> {
        if signal >= cutoff.dim() || trigger >= cutoff.dim() {
            return Err(Error::param("fock index", "outside cutoff"));
        }
        let mut v = DVector::zeros(cutoff.joint_dim());
        v[cutoff.joint_index(signal, trigger)] = cr(T::one());
        Self::pure(cutoff, v)
    }

    /// `ρ_signal ⊗ ρ_trigger`.
    pub fn product(signal: &DensityMatrix<T>, trigger: &DensityMatrix<T>) -> Result<Self> {
        let cutoff = signal.cutoff();
        cutoff.check(trigger.dim())?;
        Self::mixed(cutoff, signal.matrix().kronecker(trigger.matrix()))
    }

    #[inline]
    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    /// Zero-pads into a larger cutoff.
    pub fn embedded(&self, larger: FockCutoff) -> Result<Self> {
        let d = self.cutoff.dim();
        if larger.dim() < d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: larger.dim(),
            });
        }
        let map = |k: usize| larger.joint_index(k / d, k % d);
        let repr = match &self.repr {
            TwoModeRepr::Pure(v) => {
                let mut w = DVector::zeros(larger.joint_dim());
                for (k, z) in v.iter().enumerate() {
                    w[map(k)] = *z;
                }
                TwoModeRepr::Pure(w)
            }
            TwoModeRepr::Mixed(r) => {
                let mut w = DMatrix::zeros(larger.joint_dim(), larger.joint_dim());
                for i in 0..r.nrows() {
                    for j in 0..r.ncols() {
                        w[(map(i), map(j))] = r[(i, j)];
                    }
                }
                TwoModeRepr::Mixed(w)
            }
        };
        Ok(TwoModeState {
            cutoff: larger,
            repr,
        })
    }

    #[inline]
    pub fn repr(&self) -> &TwoModeRepr<T> {
        &self.repr
    }

    /// Density matrix form (`|ψ⟩⟨ψ|` for pure states).
    pub fn to_density(&self) -> DMatrix<C<T>> {
        match &self.repr {
            TwoModeRepr::Pure(v) => v * v.adjoint(),
            TwoModeRepr::Mixed(m) => m.clone(),
        }
    }

    pub fn into_mixed(self) -> Self {
        let rho = self.to_density();
        TwoModeState {
            cutoff: self.cutoff,
            repr: TwoModeRepr::Mixed(rho),
        }
    }

    /// Norm² for pure states, trace for mixed ones.
    pub fn trace(&self) -> T {
        match &self.repr {
            TwoModeRepr::Pure(v) => v.norm_squared(),
            TwoModeRepr::Mixed(m) => linalg::trace(m).re,
        }
    }

    /// Joint Fock distribution `P(n, m)` as a `D×D` real matrix.
    pub fn joint_populations(&self) -> DMatrix<T> {
        let d = self.cutoff.dim();
        DMatrix::from_fn(d, d, |n, m| {
            let k = self.cutoff.joint_index(n, m);
            match &self.repr {
                TwoModeRepr::Pure(v) => v[k].norm_sqr(),
                TwoModeRepr::Mixed(r) => r[(k, k)].re,
            }
        })
    }

    pub fn mean_total_photons(&self) -> T {
        let p = self.joint_populations();
        let mut acc = T::zero();
        for n in 0..self.cutoff.dim() {
            for m in 0..self.cutoff.dim() {
                acc += p[(n, m)] * T::from_count(n + m);
            }
        }
        acc
    }

    /// Unnormalized signal operator `Tr_trigger[(I ⊗ W) ρ]` for a trigger
    /// operator `W` that is diagonal in the Fock basis.
    pub fn signal_conditioned_on(&self, trigger_weights: &[T]) -> Result<DMatrix<C<T>>> {
        let d = self.cutoff.dim();
        self.cutoff.check(trigger_weights.len())?;
        let mut out = DMatrix::zeros(d, d);
        for n in 0..d {
            for n2 in 0..d {
                let mut acc = cr(T::zero());
                for (m, &w) in trigger_weights.iter().enumerate() {
                    if w == T::zero() {
                        continue;
                    }
                    let i = self.cutoff.joint_index(n, m);
                    let j = self.cutoff.joint_index(n2, m);
                    let z = match &self.repr {
                        TwoModeRepr::Pure(v) => v[i] * v[j].conj(),
                        TwoModeRepr::Mixed(r) => r[(i, j)],
                    };
                    acc += z * cr(w);
                }
                out[(n, n2)] = acc;
            }
        }
        Ok(out)
    }

    fn trigger_reduced(&self) -> DMatrix<C<T>> {
        let d = self.cutoff.dim();
        let mut out = DMatrix::zeros(d, d);
        for m in 0..d {
            for m2 in 0..d {
                let mut acc = cr(T::zero());
                for n in 0..d {
                    let i = self.cutoff.joint_index(n, m);
                    let j = self.cutoff.joint_index(n, m2);
                    acc += match &self.repr {
                        TwoModeRepr::Pure(v) => v[i] * v[j].conj(),
                        TwoModeRepr::Mixed(r) => r[(i, j)],
                    };
                }
                out[(m, m2)] = acc;
            }
        }
        out
    }
}

/// `λ = tanh r` of the two-mode squeezer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingParameter<T: Real>(T);

impl<T: Real> SqueezingParameter<T> {
    /// Rejects `λ ∉ [0, 1)` and cutoffs whose truncation leakage `λ^{2D}`
    /// reaches 1e−6.
    pub fn new(lambda: T, cutoff: FockCutoff) -> Result<Self> {
        if !(lambda >= T::zero() && lambda < T::one()) {
            return Err(Error::param("lambda", format!("{} not in [0, 1)", lambda)));
        }
        let leak = truncation_leakage(lambda, cutoff);
        if leak >= T::lit(1e-6) {
            return Err(Error::TruncationLeakage {
                lambda: lambda.as_f64(),
                cutoff: cutoff.dim(),
                leakage: leak.as_f64(),
            });
        }
        Ok(SqueezingParameter(lambda))
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Probability mass of the two-mode squeezed vacuum beyond the cutoff,
/// `1 − (1−λ²) Σ_{n<D} λ^{2n}`.
pub fn truncation_leakage<T: Real>(lambda: T, cutoff: FockCutoff) -> T {
    let l2 = lambda * lambda;
    let mut kept = T::zero();
    let mut term = T::one() - l2;
    for _ in 0..cutoff.dim() {
        kept += term;
        term *= l2;
    }
    (T::one() - kept).max(T::zero())
}

/// Half-wave-plate angle; the effective beam splitter has `R = cos²(2θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterSetting<T: Real> {
    theta: T,
}

impl<T: Real> BeamSplitterSetting<T> {
    pub fn from_theta(theta: T) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::param("theta", "not finite"));
        }
        Ok(BeamSplitterSetting { theta })
    }

    /// Smallest non-negative angle giving reflectivity `r`.
    pub fn from_reflectivity(r: T) -> Result<Self> {
        if !(r >= T::zero() && r <= T::one()) {
            return Err(Error::param("reflectivity", format!("{} not in [0, 1]", r)));
        }
        Ok(BeamSplitterSetting {
            theta: r.sqrt().acos() * T::lit(0.5),
        })
    }

    #[inline]
    pub fn theta(self) -> T {
        self.theta
    }

    #[inline]
    pub fn reflectivity(self) -> T {
        let c = (self.theta * T::lit(2.0)).cos();
        c * c
    }

    /// Mixing angle `ξ` with `sin²ξ = R`.
    pub fn mixing_angle(self) -> T {
        self.reflectivity().sqrt().min(T::one()).asin()
    }
}

/// Single-mode annihilation operator: `a[n−1, n] = √n`.
pub fn annihilation_operator<T: Real>(cutoff: FockCutoff) -> DMatrix<C<T>> {
    let d = cutoff.dim();
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = cr(T::from_count(n).sqrt());
    }
    a
}

/// `Σ_n √(1−λ²) λⁿ |n, n⟩`, renormalized inside the cutoff.
pub fn two_mode_squeezed_state<T: Real>(
    lambda: SqueezingParameter<T>,
    cutoff: FockCutoff,
) -> TwoModeState<T> {
    let l = lambda.value();
    let mut v = DVector::zeros(cutoff.joint_dim());
    let mut amp = (T::one() - l * l).sqrt();
    for n in 0..cutoff.dim() {
        v[cutoff.joint_index(n, n)] = cr(amp);
        amp *= l;
    }
    let norm = v.norm();
    v /= cr(norm);
    TwoModeState {
        cutoff,
        repr: TwoModeRepr::Pure(v),
    }
}

/// Single-mode squeezed vacuum `(1−λ²)^{1/4} Σ λⁿ √((2n)!)/(2ⁿ n!) |2n⟩`,
/// renormalized inside the cutoff. The squeezed quadrature sits at `φ = π/2`.
pub fn squeezed_vacuum<T: Real>(lambda: T, cutoff: FockCutoff) -> Result<DensityMatrix<T>> {
    if !(lambda > -T::one() && lambda < T::one()) {
        return Err(Error::param("lambda", format!("{} not in (-1, 1)", lambda)));
    }
    let d = cutoff.dim();
    let mut v = DVector::zeros(d);
    // c_{2n} = c_{2n-2} · λ · √((2n−1)/(2n))
    let mut c = (T::one() - lambda * lambda).sqrt().sqrt();
    let mut n = 0;
    while 2 * n < d {
        v[2 * n] = cr(c);
        n += 1;
        c *= lambda * (T::from_count(2 * n - 1) / T::from_count(2 * n)).sqrt();
    }
    DensityMatrix::from_pure(&v)
}

/// Variable beam splitter in the symmetric convention: the reflected
/// amplitude carries a relative phase `+i`.
pub fn beam_splitter_unitary<T: Real>(
    setting: BeamSplitterSetting<T>,
    cutoff: FockCutoff,
) -> DMatrix<C<T>> {
    beam_splitter_unitary_with_phase(setting, T::frac_pi_2(), cutoff)
}

/// `U = exp(ξ (e^{iϕ} a†b − e^{−iϕ} a b†))` with `sin²ξ = R`; `a` is the
/// signal mode and `b` the trigger mode. A photon entering the signal port
/// leaves through the trigger port with amplitude `e^{iϕ} sin ξ`.
///
/// The generator conserves total photon number, so `U` is assembled block by
/// block from small Hermitian eigenproblems. Blocks whose photon number
/// exceeds `D − 1` are truncated but remain exactly unitary.
pub fn beam_splitter_unitary_with_phase<T: Real>(
    setting: BeamSplitterSetting<T>,
    phase: T,
    cutoff: FockCutoff,
) -> DMatrix<C<T>> {
    let d = cutoff.dim();
    let xi = setting.mixing_angle();
    let mut u = DMatrix::zeros(d * d, d * d);
    // H = −i·G = −i e^{iϕ} a†b + i e^{−iϕ} a b†, U = exp(iξH)
    let up = cis(phase) * C::new(T::zero(), -T::one());
    for total in 0..=(2 * d - 2) {
        let lo = total.saturating_sub(d - 1);
        let hi = total.min(d - 1);
        let size = hi - lo + 1;
        let mut h = DMatrix::zeros(size, size);
        for (row, n) in (lo..=hi).enumerate() {
            let m = total - n;
            // a†b |n, m⟩ = √((n+1) m) |n+1, m−1⟩
            if n < hi {
                let amp = cr((T::from_count(n + 1) * T::from_count(m)).sqrt());
                h[(row + 1, row)] = up * amp;
                h[(row, row + 1)] = (up * amp).conj();
            }
        }
        debug_assert!(linalg::hermiticity_defect(&h) <= T::tol(1e-14));
        let (vals, vecs) = linalg::hermitian_eigen(&h);
        let phases = DVector::from_iterator(size, vals.iter().map(|&e| cis(xi * e)));
        let block = &vecs * DMatrix::from_diagonal(&phases) * vecs.adjoint();
        for (r, n) in (lo..=hi).enumerate() {
            for (c, n2) in (lo..=hi).enumerate() {
                u[(cutoff.joint_index(n, total - n), cutoff.joint_index(n2, total - n2))] =
                    block[(r, c)];
            }
        }
    }
    u
}

/// `U|ψ⟩` or `UρU†`.
pub fn apply_unitary<T: Real>(
    state: &TwoModeState<T>,
    u: &DMatrix<C<T>>,
) -> Result<TwoModeState<T>> {
    let n = state.cutoff.joint_dim();
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.nrows(),
        });
    }
    let repr = match &state.repr {
        TwoModeRepr::Pure(v) => TwoModeRepr::Pure(u * v),
        TwoModeRepr::Mixed(r) => TwoModeRepr::Mixed(u * r * u.adjoint()),
    };
    Ok(TwoModeState {
        cutoff: state.cutoff,
        repr,
    })
}

/// Reduced state of one mode.
pub fn partial_trace<T: Real>(state: &TwoModeState<T>, keep: Mode) -> Result<DensityMatrix<T>> {
    let m = match keep {
        Mode::Signal => state.signal_conditioned_on(&vec![T::one(); state.cutoff.dim()])?,
        Mode::Trigger => state.trigger_reduced(),
    };
    Ok(DensityMatrix::from_raw(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cut(d: usize) -> FockCutoff {
        FockCutoff::new(d).unwrap()
    }

    #[test]
    fn cutoff_rejects_below_two() {
        assert!(matches!(FockCutoff::new(1), Err(Error::InvalidCutoff(1))));
        assert!(FockCutoff::new(2).is_ok());
    }

    #[test]
    fn annihilation_small_cutoffs() {
        let a: DMatrix<C<f64>> = annihilation_operator(cut(2));
        assert_eq!(a[(0, 1)], cr(1.0));
        assert_eq!(a.iter().filter(|z| z.norm() > 0.0).count(), 1);
        let a: DMatrix<C<f64>> = annihilation_operator(cut(3));
        assert_abs_diff_eq!(a[(1, 2)].re, 2f64.sqrt(), epsilon = 1e-15);
        let n = a.adjoint() * &a;
        for k in 0..3 {
            assert_abs_diff_eq!(n[(k, k)].re, k as f64, epsilon = 1e-14);
        }
    }

    #[test]
    fn tmsv_amplitudes() {
        let c = cut(10);
        let s = two_mode_squeezed_state(SqueezingParameter::new(0.0, c).unwrap(), c);
        assert_abs_diff_eq!(s.joint_populations()[(0, 0)], 1.0, epsilon = 1e-15);
        let s = two_mode_squeezed_state(SqueezingParameter::new(0.2, c).unwrap(), c);
        if let TwoModeRepr::Pure(v) = s.repr() {
            assert_abs_diff_eq!(v[c.joint_index(1, 1)].re, 0.96f64.sqrt() * 0.2, epsilon = 1e-9);
        }
    }

    #[test]
    fn leakage_guard() {
        let c = cut(10);
        assert!(SqueezingParameter::new(0.25, c).is_ok());
        assert!(matches!(
            SqueezingParameter::new(0.6, c),
            Err(Error::TruncationLeakage { .. })
        ));
        assert!(SqueezingParameter::new(1.0, c).is_err());
        assert!(SqueezingParameter::new(-0.1, c).is_err());
    }

    #[test]
    fn reflectivity_from_theta() {
        for k in 0..50 {
            let th = -1.0 + 0.04 * k as f64;
            let bs = BeamSplitterSetting::from_theta(th).unwrap();
            assert_abs_diff_eq!(bs.reflectivity(), (2.0 * th).cos().powi(2), epsilon = 1e-15);
        }
        let bs = BeamSplitterSetting::from_reflectivity(0.3).unwrap();
        assert_abs_diff_eq!(bs.reflectivity(), 0.3, epsilon = 1e-14);
    }

    #[test]
    fn beam_splitter_identity_at_zero_reflectivity() {
        let c = cut(5);
        let bs = BeamSplitterSetting::from_reflectivity(0.0).unwrap();
        let u: DMatrix<C<f64>> = beam_splitter_unitary(bs, c);
        let id = DMatrix::<C<f64>>::identity(25, 25);
        assert!(linalg::max_abs(&(u - id)) < 1e-12);
    }

    #[test]
    fn balanced_single_photon_split() {
        let c = cut(4);
        let bs = BeamSplitterSetting::from_reflectivity(0.5).unwrap();
        let u = beam_splitter_unitary(bs, c);
        let out = apply_unitary(&TwoModeState::<f64>::basis(c, 1, 0).unwrap(), &u).unwrap();
        let p = out.joint_populations();
        assert_abs_diff_eq!(p[(1, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(0, 1)], 0.5, epsilon = 1e-12);
        if let TwoModeRepr::Pure(v) = out.repr() {
            let s = v[c.joint_index(0, 1)] / v[c.joint_index(1, 0)];
            assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
            // symmetric convention: reflected amplitude carries +i
            assert_abs_diff_eq!(s.im, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hong_ou_mandel_null() {
        let c = cut(4);
        let bs = BeamSplitterSetting::from_reflectivity(0.5).unwrap();
        let u = beam_splitter_unitary(bs, c);
        let out = apply_unitary(&TwoModeState::<f64>::basis(c, 1, 1).unwrap(), &u).unwrap();
        let p = out.joint_populations();
        assert!(p[(1, 1)] < 1e-24);
        assert_abs_diff_eq!(p[(2, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(0, 2)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let s = TwoModeState::<f64>::basis(cut(3), 0, 0).unwrap();
        let u = DMatrix::<C<f64>>::identity(4, 4);
        assert!(matches!(apply_unitary(&s, &u), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn partial_trace_of_product() {
        let c = cut(4);
        let a = DensityMatrix::diagonal(&[0.5, 0.3, 0.2, 0.0]).unwrap();
        let b = squeezed_vacuum(0.2, c).unwrap();
        let joint = TwoModeState::product(&a, &b).unwrap();
        let ra = partial_trace(&joint, Mode::Signal).unwrap();
        let rb = partial_trace(&joint, Mode::Trigger).unwrap();
        assert!(ra.max_abs_diff(&a) < 1e-12);
        assert!(rb.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn tmsv_marginal_is_thermal() {
        let c = cut(10);
        for &l in &[0.05f64, 0.1, 0.2] {
            let s = two_mode_squeezed_state(SqueezingParameter::new(l, c).unwrap(), c);
            for mode in [Mode::Signal, Mode::Trigger] {
                let r = partial_trace(&s, mode).unwrap();
                r.validate().unwrap();
                let norm = 1.0 - l.powi(20);
                for n in 0..10 {
                    for m in 0..10 {
                        let expect = if n == m {
                            (1.0 - l * l) * l.powi(2 * n as i32) / norm
                        } else {
                            0.0
                        };
                        assert_abs_diff_eq!(r.get(n, m).re, expect, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn squeezed_vacuum_is_even() {
        let r = squeezed_vacuum(0.3, cut(12)).unwrap();
        for n in (1..12).step_by(2) {
            assert!(r.get(n, n).re < 1e-30);
        }
        r.validate().unwrap();
    }

    #[test]
    fn density_matrix_validation() {
        let c = cut(3);
        let mut m = DensityMatrix::<f64>::vacuum(c).into_matrix();
        m[(0, 1)] = C::new(0.1, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(1, 0)] = C::new(0.1, 0.0);
        // |0⟩⟨0| with coherence to an empty level is not PSD
        assert!(DensityMatrix::new(m).is_err());
        let m = DMatrix::<C<f64>>::identity(3, 3);
        assert!(DensityMatrix::new(m.clone()).is_err());
        assert!(DensityMatrix::from_unnormalized(m).is_ok());
    }

    #[test]
    fn f32_scalar_path() {
        let c = cut(6);
        let s = two_mode_squeezed_state(SqueezingParameter::new(0.1f32, c).unwrap(), c);
        let bs = BeamSplitterSetting::from_reflectivity(0.5f32).unwrap();
        let out = apply_unitary(&s, &beam_splitter_unitary(bs, c)).unwrap();
        let r = partial_trace(&out, Mode::Signal).unwrap();
        r.validate().unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-5);
    }
}
