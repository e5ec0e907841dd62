use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fracstrat_core::experiments::{run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "fracstrat", version, about = "Desk-scale fractional Allen-Cahn experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the ε-scaling of the potential energy on B₁
    ScalingPotential(Common),
    /// Tube volume of the transition set along a dyadic ladder
    TubularVolume(Common),
    /// Monotone density, identity residual and uniform bound
    MonotonicityAudit(Common),
    /// β-numbers, packing identities and discrete Reifenberg checks
    BetaReifenbergSuite(Common),
    /// Corona covers of a circular interface
    CoronaRun(Common),
    /// Nonlocal perimeter quadrature checks
    #[command(name = "perimeter-2s")]
    Perimeter2s(Common),
    /// Monotonicity, β/Reifenberg and perimeter suites together
    Suite(Common),
}

#[derive(Args)]
struct Common {
    /// flat key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (overrides the config's `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::ScalingPotential(c) => (ExperimentKind::ScalingPotential, c),
            Command::TubularVolume(c) => (ExperimentKind::TubularVolume, c),
            Command::MonotonicityAudit(c) => (ExperimentKind::MonotonicityAudit, c),
            Command::BetaReifenbergSuite(c) => (ExperimentKind::BetaReifenbergSuite, c),
            Command::CoronaRun(c) => (ExperimentKind::CoronaRun, c),
            Command::Perimeter2s(c) => (ExperimentKind::Perimeter2s, c),
            Command::Suite(c) => (ExperimentKind::Suite, c),
        }
    }
}

fn load(kind: ExperimentKind, args: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p, Some(kind)).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (kind, args) = cli.command.split();
    let cfg = load(kind, args)?;
    let report = run_experiment(&cfg).with_context(|| format!("{kind} failed"))?;
    print!("{}", report.render());
    if let Some(dir) = &cfg.out {
        let files = report.write(dir).with_context(|| format!("writing {}", dir.display()))?;
        println!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
