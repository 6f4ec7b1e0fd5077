use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fockbridge::analysis::{efficiency_squeezed, fidelity, marginal_variance, wigner_point, VarianceLaw};
use fockbridge::config::RunConfig;
use fockbridge::fock::{
    apply_unitary, beam_splitter_unitary, partial_trace, two_mode_squeezed_state, BeamSplitterSetting,
    DensityMatrix, FockCutoff, Mode, SqueezingParameter, TwoModeState,
};
use fockbridge::homodyne::{quadrature_pdf, symmetric_grid, trapezoid};
use fockbridge::io::{format_complex, parse_complex};
use fockbridge::scalar::C;
use fockbridge::state_prep::{herald_signal, loss_apply, HeraldConfig, LossChannel};
use fockbridge::tomography::{maxlik_iterate_observed, BinnedData, PhasedSample, ReconstructionSettings};

fn cut(d: usize) -> FockCutoff {
    FockCutoff::new(d).unwrap()
}

fn random_state(d: usize, seed: u64) -> DensityMatrix<f64> {
    DensityMatrix::random(cut(d), &mut ChaCha8Rng::seed_from_u64(seed))
}

fn assert_physical(rho: &DensityMatrix<f64>) {
    let m = rho.matrix();
    let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(herm <= 1e-10, "hermiticity {}", herm);
    let tr: f64 = rho.populations().iter().sum();
    assert!((tr - 1.0).abs() <= 1e-9, "trace {}", tr);
    assert!(rho.min_eigenvalue() >= -1e-9, "eigenvalue {}", rho.min_eigenvalue());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splitter_is_unitary_and_conserves_photons(r in 0.0..=1.0f64, d in 2usize..=7, seed in any::<u64>()) {
        let c = cut(d);
        let u = beam_splitter_unitary(BeamSplitterSetting::from_reflectivity(r).unwrap(), c);
        let defect = (&u.adjoint() * &u - DMatrix::<C<f64>>::identity(d * d, d * d))
            .iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(defect < 1e-9);
        let state = TwoModeState::product(&random_state(d, seed), &random_state(d, seed ^ 1)).unwrap();
        let out = apply_unitary(&state, &u).unwrap();
        prop_assert!((out.mean_total_photons() - state.mean_total_photons()).abs() < 1e-9);
        prop_assert!((out.trace() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reflectivity_follows_half_wave_plate(theta in -2.0 * PI..2.0 * PI) {
        let r = BeamSplitterSetting::from_theta(theta).unwrap().reflectivity();
        prop_assert!((r - (2.0 * theta).cos().powi(2)).abs() <= 1e-12);
    }

    #[test]
    fn squeezed_marginals_are_thermal(lambda in 0.0..0.25f64) {
        let c = cut(12);
        let tmsv = two_mode_squeezed_state(SqueezingParameter::new(lambda, c).unwrap(), c);
        for mode in [Mode::Signal, Mode::Trigger] {
            let rho = partial_trace(&tmsv, mode).unwrap();
            let norm: f64 = (0..12).map(|n| lambda.powi(2 * n)).sum();
            for n in 0..12 {
                let expected = lambda.powi(2 * n as i32) / norm;
                prop_assert!((rho.get(n, n).re - expected).abs() < 1e-12);
                for m in 0..12 {
                    if m != n {
                        prop_assert!(rho.get(n, m).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn loss_is_trace_preserving_and_composes(eta1 in 0.0..=1.0f64, eta2 in 0.0..=1.0f64, seed in any::<u64>(), phi in 0.0..PI) {
        let rho = random_state(6, seed);
        let l1 = LossChannel::new(eta1).unwrap();
        let l2 = LossChannel::new(eta2).unwrap();
        let once = loss_apply(&rho, &l1).unwrap();
        assert_physical(&once);
        let twice = loss_apply(&once, &l2).unwrap();
        let direct = loss_apply(&rho, &LossChannel::new(eta1 * eta2).unwrap()).unwrap();
        prop_assert!(twice.max_abs_diff(&direct) < 1e-12);
        // commutes with phase rotation
        let a = loss_apply(&rho.rotated(phi), &l1).unwrap();
        let b = once.rotated(phi);
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn heralded_states_are_physical(
        lambda in 0.01..0.25f64,
        theta in 0.0..PI / 4.0,
        eta_t in 0.05..=1.0f64,
        p_dark in 0.0..1e-3f64,
        eta_s in 0.0..=1.0f64,
    ) {
        let h = herald_signal(&HeraldConfig::new(lambda, theta, eta_t, p_dark, eta_s, 8).unwrap()).unwrap();
        assert_physical(&h.state);
        prop_assert!(h.herald_probability > 0.0 && h.herald_probability <= 1.0);
        // only even coherences survive heralding
        for n in 0..8 {
            for m in 0..8 {
                if (n + m) % 2 == 1 {
                    prop_assert!(h.state.get(n, m).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn quadrature_pdf_normalized_and_rotation_covariant(seed in any::<u64>(), phi in -PI..PI) {
        let rho = random_state(5, seed);
        let grid = symmetric_grid(9.0, 1801);
        let pdf = quadrature_pdf(&rho, phi, &grid).unwrap();
        prop_assert!(pdf.iter().all(|&p| p >= -1e-12));
        prop_assert!((trapezoid(&grid, &pdf) - 1.0).abs() < 1e-9);
        let rotated = quadrature_pdf(&rho.rotated(phi), 0.0, &grid).unwrap();
        let diff = pdf.iter().zip(&rotated).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
        // variance from the density matches the ladder-moment variance
        let mean = trapezoid(&grid, &grid.iter().zip(&pdf).map(|(q, p)| q * p).collect::<Vec<_>>());
        let m2 = trapezoid(&grid, &grid.iter().zip(&pdf).map(|(q, p)| q * q * p).collect::<Vec<_>>());
        prop_assert!((m2 - mean * mean - marginal_variance(&rho, phi)).abs() < 1e-8);
    }

    #[test]
    fn variance_law_is_exact_and_bounded(seed in any::<u64>(), phi in 0.0..PI) {
        let rho = random_state(6, seed);
        let law = VarianceLaw::of(&rho);
        prop_assert!((law.at(phi) - marginal_variance(&rho, phi)).abs() < 1e-12);
        prop_assert!(law.uncertainty_product() >= 0.25 - 1e-12);
        prop_assert!(law.q2_minus() <= law.q2_plus());
    }

    #[test]
    fn wigner_bounded_by_parity(seed in any::<u64>(), q in -3.0..3.0f64, p in -3.0..3.0f64) {
        let rho = random_state(6, seed);
        prop_assert!(wigner_point(&rho, q, p).abs() <= 1.0 / PI + 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(a in any::<u64>(), b in any::<u64>()) {
        let x = random_state(5, a);
        let y = random_state(5, b);
        let f = fidelity(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - fidelity(&y, &x).unwrap()).abs() < 1e-8);
        prop_assert!((fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn loss_inversion_recovers_efficiency(lambda in 0.01..0.6f64, eta in 0.01..=1.0f64) {
        let lossy = |v: f64| eta * v + (1.0 - eta) * 0.5;
        let got = efficiency_squeezed(
            lossy(0.5 * (1.0 + lambda) / (1.0 - lambda)),
            lossy(0.5 * (1.0 - lambda) / (1.0 + lambda)),
        ).unwrap();
        prop_assert!((got - eta).abs() < 1e-9);
    }

    #[test]
    fn complex_text_round_trip(re in any::<f64>(), im in any::<f64>()) {
        prop_assume!(re.is_finite() && im.is_finite());
        let z = C::new(re, im);
        prop_assert_eq!(parse_complex(&format_complex(z)), Some(z));
    }

    #[test]
    fn manifest_reproduces_config(
        lambda in 0.0..0.25f64,
        theta in -1.0..1.0f64,
        eta_s in 0.0..=1.0f64,
        seed in any::<u64>(),
        windows in 3usize..500,
    ) {
        let cfg = RunConfig { lambda, theta, eta_s, seed, windows, ..RunConfig::default() };
        let back = RunConfig::from_text(&cfg.manifest(), "manifest").unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn maxlik_iterates_stay_physical_and_climb(seed in any::<u64>(), n in 200usize..2000) {
        let truth = random_state(4, seed);
        let settings = ReconstructionSettings { cutoff: cut(4), max_iterations: 200, ..ReconstructionSettings::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<PhasedSample> = (0..n)
            .map(|k| {
                let phi = PI * (k % 16) as f64 / 16.0;
                let s = fockbridge::homodyne::QuadratureSampler::new(&truth, phi, Default::default()).unwrap();
                PhasedSample { q: s.sample(&mut rng, 1)[0], phi }
            })
            .collect();
        let data = BinnedData::<f64>::from_phased(&samples, &settings).unwrap();
        let mut worst_eig = 0.0f64;
        let state = maxlik_iterate_observed(&data, &settings, |_, m| {
            let rho = DensityMatrix::new(m.clone()).unwrap();
            worst_eig = worst_eig.min(rho.min_eigenvalue());
        }).unwrap();
        prop_assert!(worst_eig >= -1e-9);
        assert_physical(&state.rho);
        for w in state.log_likelihood_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
    }
}
