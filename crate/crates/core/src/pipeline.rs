//! simulate → persist → reconstruct → analyze → export, plus the angle sweep.

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::analysis::{
    align_to_variance_maximum, efficiency_single_photon, fidelity, marginal_variance, wigner_cross_section,
    wigner_function, wigner_point, EfficiencyReport, SliceAxis, VarianceLaw, WignerGrid, WignerSpec,
};
use crate::config::{RunConfig, SweepSpec};
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::homodyne::{calibrate_scale, sample_quadratures, PhaseTrajectory, QuadratureDataset};
use crate::io::{self, ReconstructionHeader};
use crate::state_prep::{herald_signal, ideal_target_state, HeraldedState};
use crate::tomography::{
    fit_variance_law_with, maxlik_reconstruct, maxlik_reconstruct_phase_averaged, window_phases, window_variances,
    PhasedSample, ReconstructedState, VarianceFit, WindowVariance,
};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const RHO_FILE: &str = "rho.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.txt";
pub const WINDOW_CSV: &str = "window_variances.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const WIGNER_CSV: &str = "wigner.csv";
pub const CROSS_SECTION_CSV: &str = "wigner_cross_section.csv";
pub const VARIANCE_CSV: &str = "variance_vs_phase.csv";
pub const POPULATIONS_CSV: &str = "populations.csv";
pub const SUMMARY_CSV: &str = "summary.csv";

/// Phases at which the variance-vs-phase export is evaluated.
pub const VARIANCE_PHASES: usize = 64;

pub const SUMMARY_COLUMNS: &[&str] = &[
    "theta_rad",
    "theta_deg",
    "reflectivity",
    "rho00",
    "rho11",
    "rho22",
    "q2_minus",
    "squeezing_db",
    "wigner_origin",
    "fidelity_target",
    "fidelity_exact",
    "status",
];

#[derive(Debug, Clone)]
pub struct Simulation {
    pub heralded: HeraldedState<f64>,
    pub trajectory: PhaseTrajectory,
    pub dataset: QuadratureDataset,
}

pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    let herald = cfg.herald_config()?;
    let heralded = herald_signal(&herald)?;
    let acq = cfg.acquisition();
    let trajectory = PhaseTrajectory::generate(cfg.phase_model(), acq.windows, acq.rng_seed)?;
    let mut dataset = sample_quadratures(&heralded.state, &trajectory, &acq)?;
    for (k, v) in cfg.entries().into_iter().filter(|(k, _)| k != "output_dir") {
        dataset.metadata.insert(format!("config.{}", k), v);
    }
    dataset
        .metadata
        .insert("herald_probability".into(), heralded.herald_probability.to_string());
    Ok(Simulation {
        heralded,
        trajectory,
        dataset,
    })
}

/// Writes `dataset.tsv`, `vacuum.tsv` and `manifest.txt` into `out`.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Simulation> {
    let sim = simulate(cfg)?;
    io::write_dataset(out, &sim.dataset)?;
    io::write_file(&out.join(MANIFEST_FILE), &cfg.manifest())?;
    info!("simulated {} samples into {}", sim.dataset.total_samples(), out.display());
    Ok(sim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionPath {
    Phased,
    /// The fit found no phase dependence; all samples are pooled.
    PhaseAveraged,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub scale_factor: f64,
    pub pooled_variance: f64,
    pub variances: Vec<WindowVariance>,
    pub fit: VarianceFit,
    pub phases: Option<Vec<f64>>,
    pub path: ReconstructionPath,
    pub state: ReconstructedState<f64>,
}

pub fn reconstruct(dataset: &QuadratureDataset, cfg: &RunConfig) -> Result<Reconstruction> {
    if dataset.total_samples() == 0 {
        return Err(Error::NoSamples);
    }
    let calibrated = calibrate_scale(dataset)?;
    let settings = cfg.reconstruction_settings()?;
    let variances = window_variances(&calibrated)?;
    let fit = fit_variance_law_with(&variances, &cfg.fit_options())?;
    let pooled_variance = calibrated.pooled_variance().ok_or(Error::NoSamples)?;
    let (path, phases, state) = if fit.is_phase_sensitive() {
        let phases = window_phases(&calibrated, &fit, &cfg.phase_assignment())?;
        let samples: Vec<PhasedSample> = calibrated
            .samples
            .iter()
            .zip(&phases)
            .flat_map(|(s, &phi)| s.iter().map(move |&q| PhasedSample { q, phi }))
            .collect();
        let state = maxlik_reconstruct(&samples, &settings)?;
        (ReconstructionPath::Phased, Some(phases), state)
    } else {
        let pooled: Vec<f64> = calibrated.all_samples().collect();
        let state = maxlik_reconstruct_phase_averaged(&pooled, &settings)?;
        (ReconstructionPath::PhaseAveraged, None, state)
    };
    Ok(Reconstruction {
        scale_factor: calibrated.scale_factor().unwrap_or(1.0),
        pooled_variance,
        variances,
        fit,
        phases,
        path,
        state,
    })
}

impl Reconstruction {
    pub fn header(&self) -> ReconstructionHeader {
        ReconstructionHeader {
            cutoff: self.state.rho.dim(),
            iterations: self.state.iterations_used,
            final_loglik: self.state.final_log_likelihood(),
        }
    }

    pub fn diagnostics(&self) -> Vec<(String, String)> {
        let path = match self.path {
            ReconstructionPath::Phased => "phased",
            ReconstructionPath::PhaseAveraged => "phase_averaged",
        };
        let samples: usize = self.variances.iter().map(|v| v.count).sum();
        [
            ("path", path.to_string()),
            ("windows", self.variances.len().to_string()),
            ("samples", samples.to_string()),
            ("scale_factor", self.scale_factor.to_string()),
            ("pooled_variance", self.pooled_variance.to_string()),
            ("eta_single_pooled", efficiency_single_photon(self.pooled_variance).to_string()),
            ("variance_a", self.fit.a.to_string()),
            ("variance_b", self.fit.b.to_string()),
            ("phase_offset", self.fit.phase_offset.to_string()),
            ("q2_plus", self.fit.q2_plus().to_string()),
            ("q2_minus", self.fit.q2_minus().to_string()),
            ("squeezing_db", crate::analysis::squeezing_db(self.fit.q2_minus()).to_string()),
            ("uncertainty_product", self.fit.uncertainty_product().to_string()),
            ("iterations", self.state.iterations_used.to_string()),
            ("final_loglik", self.state.final_log_likelihood().to_string()),
            ("skipped_bins", self.state.skipped_bins.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Per-window variance table; `phase` is empty on the phase-averaged path.
    pub fn window_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .variances
            .iter()
            .enumerate()
            .map(|(i, v)| {
                vec![
                    v.window_index.to_string(),
                    v.variance.to_string(),
                    v.count.to_string(),
                    v.sigma_error.to_string(),
                    self.phases.as_ref().map(|p| p[i].to_string()).unwrap_or_default(),
                ]
            })
            .collect();
        io::format_csv(&["window", "variance", "count", "sigma_error", "phase"], &rows)
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        io::write_file(&out.join(RHO_FILE), &io::format_reconstruction(&self.state.rho, &self.header()))?;
        io::write_file(&out.join(DIAGNOSTICS_FILE), &io::format_report(&self.diagnostics()))?;
        io::write_file(&out.join(WINDOW_CSV), &self.window_csv())
    }
}

/// Reads the dataset in `data_dir`, reconstructs, and writes `rho.txt`,
/// `diagnostics.txt` and `window_variances.csv` into `out`.
pub fn cmd_reconstruct(data_dir: &Path, cfg: &RunConfig, out: &Path) -> Result<Reconstruction> {
    let dataset = io::read_dataset(data_dir)?;
    let rec = reconstruct(&dataset, cfg)?;
    rec.write(out)?;
    info!(
        "reconstructed {} samples in {} iterations",
        dataset.total_samples(),
        rec.state.iterations_used
    );
    Ok(rec)
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: EfficiencyReport<f64>,
    pub law: VarianceLaw<f64>,
    pub wigner_origin: f64,
    pub wigner: WignerGrid<f64>,
    pub populations: Vec<f64>,
    pub mean_photon_number: f64,
}

pub fn analyze(rho: &DensityMatrix<f64>) -> Result<Analysis> {
    rho.validate()?;
    let wigner = wigner_function(rho, WignerSpec::default())?;
    Ok(Analysis {
        report: EfficiencyReport::from_state(rho),
        law: VarianceLaw::of(rho),
        wigner_origin: wigner_point(rho, 0.0, 0.0),
        wigner,
        populations: rho.populations(),
        mean_photon_number: rho.mean_photon_number(),
    })
}

impl Analysis {
    pub fn report_entries(&self) -> Vec<(String, String)> {
        let r = &self.report;
        let mut out: Vec<(String, String)> = [
            ("eta_single", r.eta_single.to_string()),
            (
                "eta_squeezed",
                r.eta_squeezed.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into()),
            ),
            ("q2_plus", r.q2_plus.to_string()),
            ("q2_minus", r.q2_minus.to_string()),
            ("squeezing_db", r.squeezing_db.to_string()),
            ("variance_a", self.law.a.to_string()),
            ("variance_b", self.law.b.to_string()),
            ("phase_offset", self.law.phase_offset.to_string()),
            ("uncertainty_product", self.law.uncertainty_product().to_string()),
            ("mean_photon_number", self.mean_photon_number.to_string()),
            ("wigner_origin", self.wigner_origin.to_string()),
            ("wigner_min", self.wigner.min_value().to_string()),
            ("wigner_integral", self.wigner.integral().to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        out.extend(r.warnings.iter().map(|w| ("warning".to_string(), w.clone())));
        out
    }

    pub fn wigner_csv(&self) -> String {
        let g = &self.wigner;
        let mut rows = Vec::with_capacity(g.q_axis.len() * g.p_axis.len());
        for (i, q) in g.q_axis.iter().enumerate() {
            for (j, p) in g.p_axis.iter().enumerate() {
                rows.push(vec![q.to_string(), p.to_string(), g.values[(i, j)].to_string()]);
            }
        }
        io::format_csv(&["q", "p", "w"], &rows)
    }

    /// `W(x, 0)` and `W(0, x)` side by side.
    pub fn cross_section_csv(&self) -> String {
        let along_q = wigner_cross_section(&self.wigner, SliceAxis::Q);
        let along_p = wigner_cross_section(&self.wigner, SliceAxis::P);
        let rows: Vec<Vec<String>> = along_q
            .iter()
            .zip(&along_p)
            .map(|(&(x, wq), &(_, wp))| vec![x.to_string(), wq.to_string(), wp.to_string()])
            .collect();
        io::format_csv(&["x", "w_q_axis", "w_p_axis"], &rows)
    }

    pub fn populations_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .populations
            .iter()
            .enumerate()
            .map(|(n, p)| vec![n.to_string(), p.to_string()])
            .collect();
        io::format_csv(&["n", "population"], &rows)
    }
}

pub fn variance_csv(rho: &DensityMatrix<f64>) -> String {
    let rows: Vec<Vec<String>> = (0..VARIANCE_PHASES)
        .map(|k| {
            let phi = std::f64::consts::PI * k as f64 / VARIANCE_PHASES as f64;
            vec![phi.to_string(), marginal_variance(rho, phi).to_string()]
        })
        .collect();
    io::format_csv(&["phi", "variance"], &rows)
}

pub fn write_analysis(rho: &DensityMatrix<f64>, analysis: &Analysis, out: &Path) -> Result<()> {
    io::write_file(&out.join(REPORT_FILE), &io::format_report(&analysis.report_entries()))?;
    io::write_file(&out.join(WIGNER_CSV), &analysis.wigner_csv())?;
    io::write_file(&out.join(CROSS_SECTION_CSV), &analysis.cross_section_csv())?;
    io::write_file(&out.join(VARIANCE_CSV), &variance_csv(rho))?;
    io::write_file(&out.join(POPULATIONS_CSV), &analysis.populations_csv())
}

pub fn cmd_analyze(rho_path: &Path, out: &Path) -> Result<Analysis> {
    let (_, rho) = io::read_reconstruction(rho_path)?;
    let analysis = analyze(&rho)?;
    write_analysis(&rho, &analysis, out)?;
    Ok(analysis)
}

/// Summary values for one sweep angle, computed from the persisted `ρ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepValues {
    pub populations: [f64; 3],
    pub q2_minus: f64,
    pub squeezing_db: f64,
    pub wigner_origin: f64,
    /// Against the lossless, ideal-detector heralded state.
    pub fidelity_target: f64,
    /// Against the exact heralded state that generated the data.
    pub fidelity_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub reflectivity: f64,
    pub outcome: std::result::Result<SweepValues, String>,
}

impl SweepRow {
    fn cells(&self) -> Vec<String> {
        let mut cells = vec![
            self.theta.to_string(),
            self.theta.to_degrees().to_string(),
            self.reflectivity.to_string(),
        ];
        match &self.outcome {
            Ok(v) => {
                cells.extend(v.populations.iter().map(|p| p.to_string()));
                cells.extend(
                    [v.q2_minus, v.squeezing_db, v.wigner_origin, v.fidelity_target, v.fidelity_exact]
                        .iter()
                        .map(|x| x.to_string()),
                );
                cells.push("ok".into());
            }
            Err(msg) => {
                cells.extend(std::iter::repeat_n(String::new(), 8));
                // keep the message inside one CSV cell
                cells.push(msg.replace([',', '\n'], ";"));
            }
        }
        cells
    }
}

pub fn summary_csv(rows: &[SweepRow]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(SweepRow::cells).collect();
    io::format_csv(SUMMARY_COLUMNS, &cells)
}

/// Directory name for one sweep angle.
pub fn point_dir(theta: f64) -> String {
    format!("theta_{:07.3}deg", theta.to_degrees())
}

fn sweep_values(rho: &DensityMatrix<f64>, exact: &DensityMatrix<f64>, target: &DensityMatrix<f64>) -> Result<SweepValues> {
    let law = VarianceLaw::of(rho);
    let pop = rho.populations();
    let at = |n: usize| pop.get(n).copied().unwrap_or(0.0);
    Ok(SweepValues {
        populations: [at(0), at(1), at(2)],
        q2_minus: law.q2_minus(),
        squeezing_db: crate::analysis::squeezing_db(law.q2_minus()),
        wigner_origin: wigner_point(rho, 0.0, 0.0),
        fidelity_target: fidelity(rho, &align_to_variance_maximum(target))?,
        fidelity_exact: fidelity(rho, &align_to_variance_maximum(exact))?,
    })
}

fn run_point(cfg: &RunConfig, dir: &Path) -> Result<SweepValues> {
    let sim = cmd_simulate(cfg, dir)?;
    let rec = reconstruct(&sim.dataset, cfg)?;
    rec.write(dir)?;
    // everything downstream uses the persisted matrix
    let (_, rho) = io::read_reconstruction(&dir.join(RHO_FILE))?;
    let analysis = analyze(&rho)?;
    write_analysis(&rho, &analysis, dir)?;
    let target = ideal_target_state(&cfg.herald_config()?)?;
    sweep_values(&rho, &sim.heralded.state, &target)
}

/// Runs the full pipeline for every angle in parallel. Each angle writes into
/// its own subdirectory of `out`; failures become rows with a status message.
pub fn cmd_sweep(spec: &SweepSpec, out: &Path) -> Result<Vec<SweepRow>> {
    io::write_file(&out.join(MANIFEST_FILE), &spec.base.manifest())?;
    let rows: Vec<SweepRow> = spec
        .thetas
        .par_iter()
        .map(|&theta| {
            let cfg = spec.point(theta);
            let dir: PathBuf = out.join(point_dir(theta));
            let reflectivity = (2.0 * theta).cos().powi(2);
            let outcome = run_point(&cfg, &dir).map_err(|e| format!("error: {}: {}", e.code(), e));
            if let Err(msg) = &outcome {
                log::warn!("theta={} failed: {}", theta, msg);
            }
            SweepRow {
                theta,
                reflectivity,
                outcome,
            }
        })
        .collect();
    io::write_file(&out.join(SUMMARY_CSV), &summary_csv(&rows))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(extra: &[&str]) -> RunConfig {
        let mut cfg = RunConfig::default();
        for kv in ["windows=40", "samples_per_window=500", "vacuum_samples=20000", "cutoff=6"]
            .iter()
            .chain(extra)
        {
            cfg.apply_override(kv).unwrap();
        }
        cfg
    }

    #[test]
    fn simulate_writes_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(&[]);
        let sim = cmd_simulate(&cfg, dir.path()).unwrap();
        let back = io::read_dataset(dir.path()).unwrap();
        assert_eq!(back, sim.dataset);
        assert!(back.metadata.contains_key("config.lambda"));
        let v = crate::homodyne::sample_variance(&back.vacuum_calibration).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 0.01);
        let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(RunConfig::from_text(&manifest, "m").unwrap(), cfg);
    }

    #[test]
    fn phase_insensitive_dataset_takes_pooled_path() {
        let cfg = small(&["theta=0"]);
        let sim = simulate(&cfg).unwrap();
        let rec = reconstruct(&sim.dataset, &cfg).unwrap();
        assert_eq!(rec.path, ReconstructionPath::PhaseAveraged);
        assert!(rec.phases.is_none());
        assert!(rec.window_csv().lines().nth(1).unwrap().ends_with(','));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let ds = QuadratureDataset {
            samples: vec![],
            vacuum_calibration: vec![0.1, 0.2],
            metadata: Default::default(),
        };
        let e = reconstruct(&ds, &RunConfig::default()).unwrap_err();
        assert!(e.to_string().contains("no samples"));
    }

    #[test]
    fn analysis_of_lossy_photon() {
        let rho = DensityMatrix::diagonal(&[0.45, 0.55, 0.0, 0.0]).unwrap();
        let a = analyze(&rho).unwrap();
        let entries = a.report_entries();
        let get = |k: &str| entries.iter().find(|(key, _)| key == k).unwrap().1.parse::<f64>().unwrap();
        assert_abs_diff_eq!(get("eta_single"), 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(get("wigner_origin"), -0.1 / std::f64::consts::PI, epsilon = 1e-12);
        assert_eq!(variance_csv(&rho).lines().count(), VARIANCE_PHASES + 1);
    }

    #[test]
    fn summary_layout() {
        let rows = vec![
            SweepRow {
                theta: 0.0,
                reflectivity: 1.0,
                outcome: Err("error: data: bad, worse".into()),
            },
            SweepRow {
                theta: 0.1,
                reflectivity: 0.9,
                outcome: Ok(SweepValues {
                    populations: [0.5, 0.4, 0.1],
                    q2_minus: 0.5,
                    squeezing_db: 0.0,
                    wigner_origin: 0.1,
                    fidelity_target: 0.9,
                    fidelity_exact: 0.95,
                }),
            },
        ];
        let csv = summary_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SUMMARY_COLUMNS.join(","));
        for l in &lines {
            assert_eq!(l.split(',').count(), SUMMARY_COLUMNS.len(), "{}", l);
        }
        assert!(lines[1].ends_with("error: data: bad; worse"));
        assert!(lines[2].ends_with(",ok"));
    }

    #[test]
    fn point_dirs_sort_by_angle() {
        assert_eq!(point_dir(22.5f64.to_radians()), "theta_022.500deg");
        assert!(point_dir(0.0) < point_dir(16f64.to_radians()));
    }
}
