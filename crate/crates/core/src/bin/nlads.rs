use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use nlads::cyclegraph::{self, RegularityProblem};
use nlads::harness::{self, ExperimentConfig, Figure};
use nlads::rhodynamics::{self, PhiModel};
use nlads::{Error, Result};

/// Nonlocal advection–diffusion laboratory.
#[derive(Parser)]
#[command(name = "nlads", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run; writes diagnostics.csv and report.json.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's output_dir, else ".").
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// γ-sweep; writes sweep.csv, figure.svg and report.json.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularity verdict for {"d": .., "q": [[..]]} or an experiment config.
    Regularity { config: PathBuf },
    /// Fixed point of the ρ-map for a coefficient model or an experiment config.
    Fixedpoint { config: PathBuf },
    /// Figure recipe: self- or cross-perception sweep.
    Reproduce {
        which: Figure,
        #[arg(long)]
        out: PathBuf,
    },
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn regularity(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let prob = match serde_json::from_str::<RegularityProblem>(&text) {
        Ok(p) => p,
        Err(_) => {
            let cfg = ExperimentConfig::from_json(&text)?;
            RegularityProblem::new(cfg.system.d as f64, cfg.system.exponents())
        }
    };
    let report = cyclegraph::analyze(&prob)?;
    print_json(&serde_json::to_value(&report)?)
}

fn fixedpoint(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let model = match serde_json::from_str::<PhiModel>(&text) {
        Ok(m) => m,
        Err(_) => {
            let cfg = ExperimentConfig::from_json(&text)?;
            rhodynamics::coefficients_from_system(&cfg.system, cfg.nash_constant)?
        }
    };
    model.validate()?;
    let fp = rhodynamics::fixed_point_auto(&model)?;
    let unilateral = rhodynamics::unilateral_mass_condition(&model).ok();
    print_json(&json!({ "model": model, "fixed_point": fp, "unilateral": unilateral }))
}

fn main_inner(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out_dir(&cfg, out);
            let r = harness::run_and_write(&cfg, &dir)?;
            let last = r.last();
            eprintln!(
                "{} at t = {} after {} steps; ‖u‖₂ = {:?}; wrote {}",
                r.status.as_str(),
                last.t,
                r.output.steps,
                last.l2_norms,
                dir.display()
            );
            Ok(true)
        }
        Command::Sweep { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            if cfg.sweep.is_none() {
                return Err(Error::Invalid("config has no sweep section".into()));
            }
            let dir = out_dir(&cfg, out);
            let report = harness::sweep_and_report(&cfg, None, &dir)?;
            summarize(&report);
            Ok(report.pass)
        }
        Command::Regularity { config } => regularity(&config).map(|_| true),
        Command::Fixedpoint { config } => fixedpoint(&config).map(|_| true),
        Command::Reproduce { which, out } => {
            let report = harness::reproduce_figure(which, &out)?;
            summarize(&report);
            Ok(report.pass)
        }
    }
}

fn summarize(report: &harness::SweepReport) {
    for s in &report.species {
        eprintln!(
            "species {}: fitted slope {:.4} (r² {:.6}), predicted {:.4}, |Δ| = {:.4} → {}",
            s.species,
            s.fitted.slope,
            s.fitted.r_squared,
            s.predicted,
            s.difference.abs(),
            if s.pass { "PASS" } else { "FAIL" }
        );
    }
    for n in &report.notes {
        eprintln!("note: {n}");
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
