//! Conditional state preparation: a two-mode squeezed vacuum is mixed on a
//! variable beam splitter, an on/off detector watches the trigger port, and
//! the signal port is kept on a click.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fock::{
    apply_unitary, beam_splitter_unitary, two_mode_squeezed_state, BeamSplitterSetting,
    DensityMatrix, FockCutoff, SqueezingParameter, TwoModeState,
};
use crate::linalg;
use crate::scalar::{cr, Real, C};

/// Click probabilities below this are treated as "never heralds".
pub const MIN_HERALD_PROBABILITY: f64 = 1e-15;

/// On/off trigger detector with lumped efficiency and per-window dark-count
/// probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel<T: Real> {
    eta_t: T,
    p_dark: T,
}

impl<T: Real> DetectorModel<T> {
    pub fn new(eta_t: T, p_dark: T) -> Result<Self> {
        if !(eta_t >= T::zero() && eta_t <= T::one()) {
            return Err(Error::param("eta_t", format!("{} not in [0, 1]", eta_t)));
        }
        if !(p_dark >= T::zero() && p_dark < T::one()) {
            return Err(Error::param("p_dark", format!("{} not in [0, 1)", p_dark)));
        }
        Ok(DetectorModel { eta_t, p_dark })
    }

    pub fn ideal() -> Self {
        DetectorModel {
            eta_t: T::one(),
            p_dark: T::zero(),
        }
    }

    pub fn efficiency(&self) -> T {
        self.eta_t
    }

    pub fn dark_count_probability(&self) -> T {
        self.p_dark
    }

    /// Diagonal of the click POVM element: `1 − (1−p_dark)(1−η_t)ⁿ`.
    pub fn click_weights(&self, cutoff: FockCutoff) -> Vec<T> {
        let miss = T::one() - self.eta_t;
        let mut no_click = T::one() - self.p_dark;
        (0..cutoff.dim())
            .map(|_| {
                let w = T::one() - no_click;
                no_click *= miss;
                w
            })
            .collect()
    }
}

/// Pure-loss channel of transmission `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossChannel<T: Real> {
    eta: T,
}

impl<T: Real> LossChannel<T> {
    pub fn new(eta: T) -> Result<Self> {
        if !(eta >= T::zero() && eta <= T::one()) {
            return Err(Error::param("eta", format!("{} not in [0, 1]", eta)));
        }
        Ok(LossChannel { eta })
    }

    pub fn lossless() -> Self {
        LossChannel { eta: T::one() }
    }

    pub fn transmission(&self) -> T {
        self.eta
    }

    /// Kraus operator `A_k = Σ_n √(C(n,k) η^{n−k} (1−η)^k) |n−k⟩⟨n|`.
    pub fn kraus_operator(&self, k: usize, cutoff: FockCutoff) -> DMatrix<C<T>> {
        let d = cutoff.dim();
        let mut a = DMatrix::zeros(d, d);
        for n in k..d {
            a[(n - k, n)] = cr(self.binomial_weight(n, k).sqrt());
        }
        a
    }

    /// Probability that exactly `k` of `n` photons are lost.
    fn binomial_weight(&self, n: usize, k: usize) -> T {
        binomial::<T>(n, k) * self.eta.powi((n - k) as i32) * (T::one() - self.eta).powi(k as i32)
    }
}

fn binomial<T: Real>(n: usize, k: usize) -> T {
    let k = k.min(n - k);
    (0..k).fold(T::one(), |acc, i| {
        acc * T::from_count(n - i) / T::from_count(i + 1)
    })
}

/// Everything that determines the heralded signal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldConfig<T: Real> {
    pub lambda: SqueezingParameter<T>,
    pub setting: BeamSplitterSetting<T>,
    pub detector: DetectorModel<T>,
    pub signal_loss: LossChannel<T>,
    pub cutoff: FockCutoff,
}

impl<T: Real> HeraldConfig<T> {
    /// Validating constructor from plain numbers; `theta` in radians.
    pub fn new(
        lambda: T,
        theta: T,
        eta_t: T,
        p_dark: T,
        eta_s: T,
        cutoff: usize,
    ) -> Result<Self> {
        let cutoff = FockCutoff::new(cutoff)?;
        Ok(HeraldConfig {
            lambda: SqueezingParameter::new(lambda, cutoff)?,
            setting: BeamSplitterSetting::from_theta(theta)?,
            detector: DetectorModel::new(eta_t, p_dark)?,
            signal_loss: LossChannel::new(eta_s)?,
            cutoff,
        })
    }

    /// Same source and splitter with an ideal detector and no signal loss.
    pub fn idealized(&self) -> Self {
        HeraldConfig {
            detector: DetectorModel::ideal(),
            signal_loss: LossChannel::lossless(),
            ..*self
        }
    }
}

/// Signal state conditioned on a trigger click, with the click probability.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedState<T: Real> {
    pub state: DensityMatrix<T>,
    pub herald_probability: T,
}

/// Applies the loss channel `ρ → Σ_k A_k ρ A_k†`.
pub fn loss_apply<T: Real>(
    rho: &DensityMatrix<T>,
    channel: &LossChannel<T>,
) -> Result<DensityMatrix<T>> {
    let d = rho.dim();
    let mut out = DMatrix::zeros(d, d);
    // ⟨n−k|A_k ρ A_k†|m−k⟩ = √(B(n,k) B(m,k)) ρ_nm
    let weights: Vec<Vec<T>> = (0..d)
        .map(|n| (0..=n).map(|k| channel.binomial_weight(n, k).sqrt()).collect())
        .collect();
    for n in 0..d {
        for m in 0..d {
            let z = rho.get(n, m);
            if z == cr(T::zero()) {
                continue;
            }
            for k in 0..=n.min(m) {
                out[(n - k, m - k)] += z * cr(weights[n][k] * weights[m][k]);
            }
        }
    }
    DensityMatrix::new(out)
}

/// Click POVM element `I − (1−p_dark) Σ_n (1−η_t)ⁿ |n⟩⟨n|`.
pub fn click_povm<T: Real>(detector: &DetectorModel<T>, cutoff: FockCutoff) -> DMatrix<C<T>> {
    let w = detector.click_weights(cutoff);
    DMatrix::from_diagonal(&DVector::from_iterator(w.len(), w.into_iter().map(cr)))
}

/// Cutoff used for the two-mode stage. The source populates `|n, n⟩` for
/// `n < D`, so every photon-number block the splitter touches fits inside
/// `2D − 1` levels per mode and the splitter acts exactly.
pub fn working_cutoff(cutoff: FockCutoff) -> FockCutoff {
    FockCutoff::new(2 * cutoff.dim() - 1).expect("at least 3 levels")
}

fn source_state<T: Real>(config: &HeraldConfig<T>) -> Result<TwoModeState<T>> {
    two_mode_squeezed_state(config.lambda, config.cutoff).embedded(working_cutoff(config.cutoff))
}

/// Two-mode state after the beam splitter, as a density matrix over the
/// working cutoff.
pub fn joint_state_after_splitter<T: Real>(config: &HeraldConfig<T>) -> Result<TwoModeState<T>> {
    let tmsv = source_state(config)?.into_mixed();
    let u = beam_splitter_unitary(config.setting, working_cutoff(config.cutoff));
    apply_unitary(&tmsv, &u)
}

/// Heralded signal state via the full two-mode density matrix
/// `U |TMSV⟩⟨TMSV| U†`.
pub fn herald_signal<T: Real>(config: &HeraldConfig<T>) -> Result<HeraldedState<T>> {
    let joint = joint_state_after_splitter(config)?;
    condition_and_lose(&joint, &config.detector.click_weights(working_cutoff(config.cutoff)), config)
}

/// Heralded signal state via the pure amplitude vector `U|TMSV⟩`.
pub fn herald_signal_pure<T: Real>(config: &HeraldConfig<T>) -> Result<HeraldedState<T>> {
    let tmsv = source_state(config)?;
    let u = beam_splitter_unitary(config.setting, working_cutoff(config.cutoff));
    let joint = apply_unitary(&tmsv, &u)?;
    condition_and_lose(&joint, &config.detector.click_weights(working_cutoff(config.cutoff)), config)
}

/// Signal state for an arbitrary diagonal trigger outcome operator, given on
/// the working cutoff (`2D − 1` entries).
pub fn herald_signal_with_outcome<T: Real>(
    config: &HeraldConfig<T>,
    trigger_weights: &[T],
) -> Result<HeraldedState<T>> {
    let joint = joint_state_after_splitter(config)?;
    condition_and_lose(&joint, trigger_weights, config)
}

fn condition_and_lose<T: Real>(
    joint: &TwoModeState<T>,
    weights: &[T],
    config: &HeraldConfig<T>,
) -> Result<HeraldedState<T>> {
    let unnorm = joint.signal_conditioned_on(weights)?;
    let p = linalg::trace(&unnorm).re;
    if !(p >= T::lit(MIN_HERALD_PROBABILITY)) {
        return Err(Error::HeraldImpossible(p.as_f64()));
    }
    let conditioned = DensityMatrix::from_unnormalized(unnorm)?;
    let state = loss_apply(&conditioned, &config.signal_loss)?.truncated(config.cutoff)?;
    Ok(HeraldedState {
        state,
        herald_probability: p.min(T::one()),
    })
}

/// Reference state for a configuration: the exact heralded state at the same
/// `λ` and `R` with an ideal detector and no signal loss. For `λ = 0` the
/// weak-squeezing limit `((1−2R)²|1⟩⟨1| + 2R(1−R)|0⟩⟨0|)/(1 − 2R + 2R²)` is
/// returned.
pub fn ideal_target_state<T: Real>(config: &HeraldConfig<T>) -> Result<DensityMatrix<T>> {
    if config.lambda.value() > T::zero() {
        if let Ok(h) = herald_signal_pure(&config.idealized()) {
            return Ok(h.state);
        }
    }
    let r = config.setting.reflectivity();
    let two = T::lit(2.0);
    let one_photon = (T::one() - two * r) * (T::one() - two * r);
    let vacuum = two * r * (T::one() - r);
    let mut pops = vec![T::zero(); config.cutoff.dim()];
    pops[0] = vacuum;
    pops[1] = one_photon;
    DensityMatrix::diagonal(&pops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{partial_trace, squeezed_vacuum, Mode};
    use approx::assert_abs_diff_eq;

    fn cut(d: usize) -> FockCutoff {
        FockCutoff::new(d).unwrap()
    }

    #[test]
    fn splitter_phase_convention_does_not_change_observables() {
        use crate::analysis::{align_to_variance_maximum, fidelity, VarianceLaw};
        use crate::fock::beam_splitter_unitary_with_phase;
        let cfg = HeraldConfig::new(0.2, 0.3, 0.4, 1e-4, 0.7, 8).unwrap();
        let reference = herald_signal(&cfg).unwrap();
        let w = working_cutoff(cfg.cutoff);
        for phase in [0.0, 0.9, -2.1] {
            let u = beam_splitter_unitary_with_phase(cfg.setting, phase, w);
            let joint = apply_unitary(&source_state(&cfg).unwrap().into_mixed(), &u).unwrap();
            let other = condition_and_lose(&joint, &cfg.detector.click_weights(w), &cfg).unwrap();
            assert_abs_diff_eq!(other.herald_probability, reference.herald_probability, epsilon = 1e-12);
            for (a, b) in other.state.populations().iter().zip(reference.state.populations()) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
            }
            let (la, lb) = (VarianceLaw::of(&other.state), VarianceLaw::of(&reference.state));
            assert_abs_diff_eq!(la.q2_minus(), lb.q2_minus(), epsilon = 1e-12);
            assert_abs_diff_eq!(la.q2_plus(), lb.q2_plus(), epsilon = 1e-12);
            let f = fidelity(
                &align_to_variance_maximum(&other.state),
                &align_to_variance_maximum(&reference.state),
            )
            .unwrap();
            assert_abs_diff_eq!(f, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn loss_identity_and_lossy_photon() {
        let c = cut(6);
        let one = DensityMatrix::<f64>::fock(1, c).unwrap();
        let same = loss_apply(&one, &LossChannel::new(1.0).unwrap()).unwrap();
        assert!(same.max_abs_diff(&one) < 1e-15);
        let out = loss_apply(&one, &LossChannel::new(0.55).unwrap()).unwrap();
        assert_abs_diff_eq!(out.get(1, 1).re, 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(out.get(0, 0).re, 0.45, epsilon = 1e-12);
    }

    #[test]
    fn loss_two_photons_binomial() {
        let two = DensityMatrix::<f64>::fock(2, cut(4)).unwrap();
        let out = loss_apply(&two, &LossChannel::new(0.5).unwrap()).unwrap();
        let p = out.populations();
        assert_abs_diff_eq!(p[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn kraus_completeness() {
        let c = cut(8);
        for &eta in &[0.0, 0.3, 0.77, 1.0] {
            let ch = LossChannel::<f64>::new(eta).unwrap();
            let sum = (0..8).fold(DMatrix::<C<f64>>::zeros(8, 8), |acc, k| {
                let a = ch.kraus_operator(k, c);
                acc + a.adjoint() * a
            });
            assert!(linalg::max_abs(&(sum - DMatrix::identity(8, 8))) < 1e-12);
        }
    }

    #[test]
    fn click_povm_cases() {
        let c = cut(4);
        let ideal = click_povm(&DetectorModel::<f64>::ideal(), c);
        assert_eq!(ideal[(0, 0)].re, 0.0);
        assert_eq!(ideal[(3, 3)].re, 1.0);
        let blind = click_povm(&DetectorModel::<f64>::new(0.0, 0.0).unwrap(), c);
        assert!(linalg::max_abs(&blind) == 0.0);
        let real = click_povm(&DetectorModel::<f64>::new(0.5, 0.01).unwrap(), c);
        assert_abs_diff_eq!(real[(1, 1)].re, 0.505, epsilon = 1e-15);
        assert_abs_diff_eq!(real[(0, 0)].re, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn detector_validation() {
        assert!(DetectorModel::new(1.1, 0.0).is_err());
        assert!(DetectorModel::new(0.5, 1.0).is_err());
        assert!(LossChannel::new(-0.01).is_err());
    }

    #[test]
    fn fully_transmissive_heralds_single_photon() {
        let cfg = HeraldConfig::new(0.1, std::f64::consts::FRAC_PI_4, 1.0, 0.0, 1.0, 10).unwrap();
        assert_abs_diff_eq!(cfg.setting.reflectivity(), 0.0, epsilon = 1e-15);
        let h = herald_signal(&cfg).unwrap();
        assert_abs_diff_eq!(h.state.get(1, 1).re, 0.99, epsilon = 1e-12);
        assert_abs_diff_eq!(h.herald_probability, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn balanced_splitter_gives_squeezed_vacuum_regardless_of_click() {
        let cfg = HeraldConfig::new(0.1, std::f64::consts::PI / 8.0, 1.0, 0.0, 1.0, 10).unwrap();
        let h = herald_signal(&cfg).unwrap();
        for n in (1..10).step_by(2) {
            assert!(h.state.get(n, n).re < 1e-10);
        }
        let all = herald_signal_with_outcome(&cfg, &[1.0; 19]).unwrap();
        assert!(h.state.max_abs_diff(&all.state) < 1e-9);
        assert_abs_diff_eq!(all.herald_probability, 1.0, epsilon = 1e-12);
        // same populations as a single-mode squeezed vacuum at λ
        let sv = squeezed_vacuum(0.1, cut(10)).unwrap();
        for n in 0..10 {
            assert_abs_diff_eq!(h.state.get(n, n).re, sv.get(n, n).re, epsilon = 1e-9);
        }
    }

    #[test]
    fn dark_counts_on_vacuum() {
        for &th in &[0.0, 0.3, std::f64::consts::PI / 8.0] {
            let cfg = HeraldConfig::new(0.0, th, 0.4, 0.01, 1.0, 6).unwrap();
            let h = herald_signal(&cfg).unwrap();
            assert_abs_diff_eq!(h.herald_probability, 0.01, epsilon = 1e-15);
            assert_abs_diff_eq!(h.state.get(0, 0).re, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn herald_impossible_without_light_or_darks() {
        let cfg = HeraldConfig::new(0.0, 0.0, 1.0, 0.0, 1.0, 6).unwrap();
        assert!(matches!(herald_signal(&cfg), Err(Error::HeraldImpossible(_))));
    }

    #[test]
    fn ideal_targets() {
        let cfg = HeraldConfig::new(1e-4, 0.0, 0.1, 1e-5, 0.5, 10).unwrap();
        let t = ideal_target_state(&cfg).unwrap();
        assert!(t.get(1, 1).re > 1.0 - 1e-7);
        let cfg = HeraldConfig::new(0.0, 0.0, 0.1, 1e-5, 0.5, 10).unwrap();
        assert_abs_diff_eq!(ideal_target_state(&cfg).unwrap().get(1, 1).re, 1.0, epsilon = 1e-12);
        let cfg = HeraldConfig::new(0.1, std::f64::consts::PI / 8.0, 0.1, 1e-5, 0.5, 10).unwrap();
        let t = ideal_target_state(&cfg).unwrap();
        let sv = squeezed_vacuum(0.1, cut(10)).unwrap();
        assert_abs_diff_eq!(t.get(2, 2).re, sv.get(2, 2).re, epsilon = 1e-9);
        // weak squeezing at R = 1/2: vacuum plus a small two-photon admixture
        let cfg = HeraldConfig::new(0.01, std::f64::consts::PI / 8.0, 1.0, 0.0, 1.0, 10).unwrap();
        let t = ideal_target_state(&cfg).unwrap();
        let p = t.populations();
        assert!(p[0] > 0.99 && p[2] > 0.0 && p[0] + p[2] > 1.0 - 1e-6);
        assert!(t.get(0, 2).norm() > 0.005);
    }

    #[test]
    fn reduced_trigger_matches_signal_for_tmsv() {
        let c = cut(8);
        let s = two_mode_squeezed_state(SqueezingParameter::new(0.2, c).unwrap(), c);
        let a = partial_trace(&s, Mode::Signal).unwrap();
        let b = partial_trace(&s, Mode::Trigger).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }
}
