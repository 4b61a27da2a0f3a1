//! Command-line front end.
//!
//! Exit codes: 0 success, 1 method-level failure (conditions not met,
//! search failed), 2 input validation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use penstab::cli::{
    cmd_analyze, cmd_simulate, cmd_sweep, cmd_synthesize, AnalyzeOptions, ControllerFile,
    ModelFile, SimulateOptions, SweepOptions, SynthesizeOptions,
};
use penstab::sbrl::SweepGrid;

#[derive(Parser)]
#[command(name = "penstab", version, about = "Pseudo-H-infinity synthesis and Lagrange stability certification for pendulum-like systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Lowest positive sweep frequency (rad/s)
    #[arg(long, default_value_t = 1e-4)]
    wmin: f64,
    /// Highest sweep frequency (rad/s)
    #[arg(long, default_value_t = 1e4)]
    wmax: f64,
    /// Number of logarithmically spaced grid points (omega = 0 is added)
    #[arg(long, default_value_t = 400)]
    points: usize,
    /// Refinement passes around the running peak
    #[arg(long, default_value_t = 3)]
    refine: usize,
}

impl GridArgs {
    fn grid(&self) -> SweepGrid {
        SweepGrid {
            omega_min: self.wmin,
            omega_max: self.wmax,
            points: self.points,
            refine_passes: self.refine,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Open-loop analysis: spectra, sector bounds, gain certificates
    Analyze {
        model: PathBuf,
        /// Axis shift for the shifted checks
        #[arg(long)]
        lambda: Option<f64>,
        /// Lattice scale for the certificate
        #[arg(long)]
        tau0: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
        /// Samples per period for sector verification
        #[arg(long, default_value_t = 1000)]
        sector_samples: usize,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add a wall-clock timestamp field to the report
        #[arg(long)]
        stamp: bool,
    },
    /// Controller synthesis
    Synthesize {
        model: PathBuf,
        /// Which synthesis procedure to run: 3, 4, 5 (strict gain bound),
        /// 6, 7, 9 (Lagrange stabilization); defaults to the model's
        /// synthesis mode
        #[arg(long)]
        theorem: Option<u8>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Channel weights, comma separated
        #[arg(long, value_delimiter = ',')]
        tau: Option<Vec<f64>>,
        #[arg(long)]
        tau0: Option<f64>,
        /// Coarse (lambda, tau) grid search plus the Newton rationality
        /// search where applicable
        #[arg(long)]
        search: bool,
        /// Radius of the rationality search
        #[arg(long, default_value_t = 0.05)]
        search_radius: f64,
        /// Write the controller file here
        #[arg(long, default_value = "controller.json")]
        controller_out: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stamp: bool,
    },
    /// Nonlinear closed-loop simulation with CSV trajectory export
    Simulate {
        model: PathBuf,
        /// Controller file from `synthesize`; open loop when omitted
        #[arg(long)]
        controller: Option<PathBuf>,
        /// Initial state, comma separated (plant-only states are padded
        /// with zero controller states)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Record every k-th step
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Also simulate from x0 + lattice vector and report the deviation
        #[arg(long)]
        shift_test: bool,
        #[arg(long)]
        tau0: Option<f64>,
        #[arg(long, default_value = "trajectory.csv")]
        csv_out: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stamp: bool,
    },
    /// Frequency sweep CSV (omega, weighted peak, margin)
    Sweep {
        model: PathBuf,
        #[arg(long)]
        controller: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "sweep.csv")]
        csv_out: PathBuf,
    },
}

fn emit_report(report: &penstab::cli::RunReport, out: Option<&PathBuf>) -> penstab::Result<()> {
    let text = report.to_json_pretty();
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn timestamp() -> String {
    match std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH) {
        Ok(d) => format!("{}.{:09}", d.as_secs(), d.subsec_nanos()),
        Err(_) => "0".into(),
    }
}

fn run() -> penstab::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze { model, lambda, tau0, grid, sector_samples, out, stamp } => {
            let model = ModelFile::load(&model)?.into_model()?;
            let opts = AnalyzeOptions { lambda, tau0, grid: grid.grid(), sector_samples };
            let mut report = cmd_analyze(&model, &opts)?;
            if stamp {
                report.timestamp = Some(timestamp());
            }
            emit_report(&report, out.as_ref())
        }
        Command::Synthesize {
            model,
            theorem,
            lambda,
            tau,
            tau0,
            search,
            search_radius,
            controller_out,
            out,
            stamp,
        } => {
            let model = ModelFile::load(&model)?.into_model()?;
            let theorem = theorem
                .or(model.synthesis.as_ref().and_then(|s| s.mode))
                .ok_or_else(|| {
                    penstab::Error::Validation(
                        "--theorem required (no synthesis mode in the model)".into(),
                    )
                })?;
            let mut opts = SynthesizeOptions::new(theorem);
            opts.lambda = lambda;
            opts.tau = tau;
            opts.tau0 = tau0;
            opts.search = search;
            opts.search_cfg.epsilon = search_radius;
            let (mut report, controller) = cmd_synthesize(&model, &opts)?;
            std::fs::write(&controller_out, controller.to_json() + "\n")?;
            if stamp {
                report.timestamp = Some(timestamp());
            }
            emit_report(&report, out.as_ref())
        }
        Command::Simulate {
            model,
            controller,
            x0,
            t_final,
            dt,
            stride,
            shift_test,
            tau0,
            csv_out,
            out,
            stamp,
        } => {
            let model = ModelFile::load(&model)?.into_model()?;
            let controller = match controller {
                Some(path) => Some(ControllerFile::load(&path)?),
                None => None,
            };
            let opts = SimulateOptions {
                x0,
                t_final,
                dt,
                record_stride: stride,
                shift_test,
                tau0,
            };
            let (mut report, csv) = cmd_simulate(&model, controller.as_ref(), &opts)?;
            std::fs::write(&csv_out, csv)?;
            report.csv_paths.push(csv_out.display().to_string());
            if stamp {
                report.timestamp = Some(timestamp());
            }
            emit_report(&report, out.as_ref())
        }
        Command::Sweep { model, controller, lambda, grid, csv_out } => {
            let model = ModelFile::load(&model)?.into_model()?;
            let controller = match controller {
                Some(path) => Some(ControllerFile::load(&path)?),
                None => None,
            };
            let opts = SweepOptions { lambda, grid: grid.grid() };
            let csv = cmd_sweep(&model, controller.as_ref(), &opts)?;
            std::fs::write(&csv_out, csv)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
