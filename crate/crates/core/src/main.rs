use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chern_currents::harness::{run_experiment, ExperimentConfig, Pipeline, ScheduleSpec};

#[derive(Parser)]
#[command(name = "chern-currents", version, about = "Chern and Segre currents of singular hermitian metrics")]
struct Cli {
    /// TOML experiment file; the built-in preset for the subcommand when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for report.json and the CSV tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid points per real axis.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// `start:ratio:count`.
    #[arg(long, global = true)]
    eps_schedule: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative-change tolerance of the extrapolation.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Segre/Chern conversion tables.
    Symbolic,
    /// Chern forms of a smooth metric.
    ChernForms,
    /// Projectivized-bundle Segre forms against the Chern route.
    Segre,
    /// Limits of regularized Chern pairings.
    Converge,
    /// Iterated against simultaneous limits.
    Iterated,
    /// Mass over shrinking bumps.
    Mass,
    /// `c_1` integrals on `P¹`.
    Cohomology,
}

impl Command {
    fn pipeline(self) -> Pipeline {
        match self {
            Command::Symbolic => Pipeline::Symbolic,
            Command::ChernForms => Pipeline::ChernForms,
            Command::Segre => Pipeline::Segre,
            Command::Converge => Pipeline::Converge,
            Command::Iterated => Pipeline::Iterated,
            Command::Mass => Pipeline::Mass,
            Command::Cohomology => Pipeline::Cohomology,
        }
    }
}

fn configure(cli: &Cli, pipeline: Pipeline) -> chern_currents::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(pipeline),
    };
    if let Some(p) = cfg.pipeline {
        if p != pipeline {
            eprintln!("note: config names pipeline {}, running {}", p.name(), pipeline.name());
        }
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(r) = cli.resolution {
        cfg.chart.resolution = r;
        cfg.cohomology.resolution = r;
    }
    if let Some(s) = &cli.eps_schedule {
        cfg.regularization.schedule = ScheduleSpec::Geometric(s.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tolerance {
        cfg.tolerance = t;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pipeline = cli.command.pipeline();
    let result = configure(&cli, pipeline).and_then(|cfg| {
        let out = cfg.output.clone();
        run_experiment(&cfg, pipeline, &out).map(|r| (r, out))
    });
    match result {
        Ok((report, out)) => {
            for c in &report.checks {
                println!("{:<40} {:>12.3e} <= {:<10.1e} {:?}", c.name, c.value, c.tolerance, c.outcome);
            }
            for r in &report.extrapolation {
                println!(
                    "{} bump{} {}: limit {:.6} ± {:.1e} ({:?})",
                    r.family, r.bump, r.label, r.limit[0], r.error_estimate, r.verdict
                );
            }
            println!("verdict: {:?}  report: {}", report.verdict, out.join("report.json").display());
            ExitCode::from(report.verdict.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
