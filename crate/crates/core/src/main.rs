use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use fockbridge::config::RunConfig;
use fockbridge::error::{Error, Result};
use fockbridge::{io, pipeline, selftest};

#[derive(Parser, Debug)]
#[command(name = "fockbridge", version, about = "Heralded-state simulation and homodyne tomography")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra `key=value` override; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a heralded state and write a homodyne dataset.
    Simulate,
    /// Reconstruct the density matrix from a dataset directory.
    Reconstruct {
        /// Directory holding dataset.tsv and vacuum.tsv.
        #[arg(long)]
        data: PathBuf,
    },
    /// Report efficiencies, Wigner function and populations of a reconstruction.
    Analyze {
        /// Reconstruction file written by `reconstruct`.
        #[arg(long)]
        rho: PathBuf,
    },
    /// Run the whole pipeline for every angle in `thetas`.
    Sweep,
    /// Run the built-in invariant checks.
    Selftest,
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &common.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_entries(entries: &[(String, String)]) {
    print!("{}", io::format_report(entries));
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Selftest = cli.command {
        let report = selftest::run_selftest();
        for c in &report.checks {
            println!("{}", c);
        }
        return match report.failures() {
            0 => Ok(()),
            n => Err(Error::SelfTestFailed(n)),
        };
    }
    let cfg = resolve(&cli.common)?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Simulate => {
            let sim = pipeline::cmd_simulate(&cfg, &out)?;
            println!(
                "wrote {} samples in {} windows to {}",
                sim.dataset.total_samples(),
                sim.dataset.windows(),
                out.display()
            );
        }
        Command::Reconstruct { data } => {
            let rec = pipeline::cmd_reconstruct(&data, &cfg, &out)?;
            print_entries(&rec.diagnostics());
        }
        Command::Analyze { rho } => {
            let analysis = pipeline::cmd_analyze(&rho, &out)?;
            print_entries(&analysis.report_entries());
        }
        Command::Sweep => {
            let rows = pipeline::cmd_sweep(&cfg.sweep(), &out)?;
            print!("{}", pipeline::summary_csv(&rows));
        }
        Command::Selftest => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: config: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {}", e.code(), msg);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
