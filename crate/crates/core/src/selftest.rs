//! Fast invariant checks run by the `selftest` subcommand.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::analysis::{efficiency_squeezed, marginal_variance, wigner_point};
use crate::fock::{beam_splitter_unitary, squeezed_vacuum, BeamSplitterSetting, DensityMatrix, FockCutoff};
use crate::homodyne::{
    hermite_functions, quadrature_pdf_with, sample_quadratures, symmetric_grid, trapezoid, AcquisitionConfig,
    HermiteFn, PhaseModel, PhaseTrajectory,
};
use crate::scalar::C;
use crate::state_prep::{herald_signal, herald_signal_pure, loss_apply, HeraldConfig, LossChannel};
use crate::tomography::{maxlik_iterate_observed, BinnedData, PhasedSample, ReconstructionSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &'static str, worst: f64, limit: f64) -> Check {
    Check {
        name,
        passed: worst.is_finite() && worst <= limit,
        detail: format!("worst {:e} (limit {:e})", worst, limit),
    }
}

fn failed(name: &'static str, e: impl fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        detail: e.to_string(),
    }
}

pub fn run_selftest() -> SelfTestReport {
    run_selftest_with(hermite_functions::<f64>)
}

/// Same suite with the quadrature wavefunctions supplied by `hermite`.
pub fn run_selftest_with(hermite: HermiteFn<f64>) -> SelfTestReport {
    SelfTestReport {
        checks: vec![
            unitarity(),
            loss_cptp(),
            efficiency_identity(),
            pdf_moments(hermite),
            wigner_kernel(),
            herald_paths(),
            maxlik_monotone(),
        ],
    }
}

fn unitarity() -> Check {
    let cutoff = FockCutoff::new(8).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=10 {
        let setting = BeamSplitterSetting::from_reflectivity(k as f64 / 10.0).unwrap();
        let u = beam_splitter_unitary(setting, cutoff);
        let defect = &u.adjoint() * &u - DMatrix::<C<f64>>::identity(u.nrows(), u.ncols());
        worst = worst.max(defect.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    check("unitarity", worst, 1e-9)
}

fn loss_cptp() -> Check {
    let cutoff = FockCutoff::new(8).unwrap();
    let probe = squeezed_vacuum(0.3, cutoff).unwrap().mix(&DensityMatrix::fock(3, cutoff).unwrap(), 0.5).unwrap();
    let mut worst = 0.0f64;
    for k in 0..=10 {
        let channel = LossChannel::new(k as f64 / 10.0).unwrap();
        let mut sum = DMatrix::<C<f64>>::zeros(8, 8);
        for j in 0..8 {
            let a = channel.kraus_operator(j, cutoff);
            sum += a.adjoint() * a;
        }
        let completeness = (sum - DMatrix::identity(8, 8)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let out = match loss_apply(&probe, &channel) {
            Ok(o) => o,
            Err(e) => return failed("cptp", e),
        };
        let trace: f64 = out.populations().iter().sum();
        worst = worst
            .max(completeness)
            .max((trace - 1.0).abs())
            .max((-out.min_eigenvalue()).max(0.0));
    }
    check("cptp", worst, 1e-9)
}

fn efficiency_identity() -> Check {
    let mut worst = 0.0f64;
    for lambda in [0.05, 0.1, 0.2] {
        let q_minus = 0.5 * (1.0 - lambda) / (1.0 + lambda);
        let q_plus = 0.5 * (1.0 + lambda) / (1.0 - lambda);
        for k in 1..=10 {
            let eta = k as f64 / 10.0;
            let lossy = |v: f64| eta * v + (1.0 - eta) * 0.5;
            match efficiency_squeezed(lossy(q_plus), lossy(q_minus)) {
                Ok(e) => worst = worst.max((e - eta).abs()),
                Err(e) => return failed("efficiency_identity", e),
            }
        }
    }
    check("efficiency_identity", worst, 1e-9)
}

fn pdf_moments(hermite: HermiteFn<f64>) -> Check {
    let grid = symmetric_grid(12.0, 4801);
    let mut states: Vec<DensityMatrix<f64>> = (0..4)
        .map(|n| DensityMatrix::fock(n, FockCutoff::new(6).unwrap()).unwrap())
        .collect();
    states.push(squeezed_vacuum(0.3, FockCutoff::new(24).unwrap()).unwrap());
    let mut worst = 0.0f64;
    for rho in &states {
        for phi in [0.0, PI / 4.0, PI / 2.0] {
            let pdf = match quadrature_pdf_with(rho, phi, &grid, hermite) {
                Ok(p) => p,
                Err(e) => return failed("pdf_moments", e),
            };
            let norm = trapezoid(&grid, &pdf);
            let mean = trapezoid(&grid, &grid.iter().zip(&pdf).map(|(q, p)| q * p).collect::<Vec<_>>());
            let second = trapezoid(&grid, &grid.iter().zip(&pdf).map(|(q, p)| q * q * p).collect::<Vec<_>>());
            let var = second - mean * mean;
            worst = worst
                .max((norm - 1.0).abs())
                .max(mean.abs())
                .max((var - marginal_variance(rho, phi)).abs());
        }
    }
    check("pdf_moments", worst, 1e-8)
}

fn wigner_kernel() -> Check {
    let cutoff = FockCutoff::new(4).unwrap();
    let vac = DensityMatrix::<f64>::vacuum(cutoff);
    let one = DensityMatrix::<f64>::fock(1, cutoff).unwrap();
    let worst = (wigner_point(&vac, 0.0, 0.0) - 1.0 / PI)
        .abs()
        .max((wigner_point(&one, 0.0, 0.0) + 1.0 / PI).abs());
    check("wigner_kernel", worst, 1e-12)
}

fn herald_paths() -> Check {
    let mut worst = 0.0f64;
    for (lambda, theta) in [(0.12, 0.0), (0.2, 0.3), (0.1, PI / 8.0)] {
        let cfg = HeraldConfig::new(lambda, theta, 0.1, 1e-5, 0.6, 8).unwrap();
        match (herald_signal(&cfg), herald_signal_pure(&cfg)) {
            (Ok(a), Ok(b)) => {
                worst = worst
                    .max(a.state.max_abs_diff(&b.state))
                    .max((a.herald_probability - b.herald_probability).abs())
            }
            (Err(e), _) | (_, Err(e)) => return failed("herald_paths", e),
        }
    }
    check("herald_paths", worst, 1e-9)
}

/// Likelihood trace on a small canned dataset with known phases.
fn maxlik_monotone() -> Check {
    let run = || -> crate::error::Result<(f64, usize)> {
        let cfg = HeraldConfig::new(0.3, PI / 8.0, 0.1, 1e-5, 0.7, 6)?;
        let rho = herald_signal(&cfg)?.state;
        let acq = AcquisitionConfig {
            windows: 24,
            samples_per_window: 400,
            rng_seed: 11,
            vacuum_samples: 2,
            gain: 1.0,
        };
        let traj = PhaseTrajectory::generate(PhaseModel::default(), acq.windows, acq.rng_seed)?;
        let ds = sample_quadratures(&rho, &traj, &acq)?;
        let samples: Vec<PhasedSample> = ds
            .samples
            .iter()
            .zip(&traj.phases)
            .flat_map(|(s, &phi)| s.iter().map(move |&q| PhasedSample { q, phi }))
            .collect();
        let settings = ReconstructionSettings {
            cutoff: FockCutoff::new(6)?,
            max_iterations: 300,
            ..ReconstructionSettings::default()
        };
        let data = BinnedData::<f64>::from_phased(&samples, &settings)?;
        let state = maxlik_iterate_observed(&data, &settings, |_, _| {})?;
        let drops = state
            .log_likelihood_trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0f64, f64::max);
        Ok((drops, state.log_likelihood_trace.len()))
    };
    match run() {
        Ok((drop, len)) if len >= 2 => check("maxlik_monotone", drop, 1e-9),
        Ok(_) => failed("maxlik_monotone", "likelihood trace too short"),
        Err(e) => failed("maxlik_monotone", e),
    }
}
