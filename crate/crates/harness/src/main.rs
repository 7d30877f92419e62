use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use korteweg_harness::config::{preset, ScenarioConfig, ScenarioKind};
use korteweg_harness::scenarios::run_scenario;
use korteweg_harness::verify::run_all;
use korteweg_harness::Result;

#[derive(Parser)]
#[command(name = "korteweg", version, about = "Euler-Korteweg numerical experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one initial state and record the conservation ledger.
    Simulate(Common),
    /// Decay of the linear group on a localized packet.
    Dispersion(Common),
    /// Lifespan against the size of the solenoidal part.
    Lifespan(Common),
    /// Vacuum formation by time reversal of the wave-function model.
    Blowup(Common),
    /// Size of the residual after the quadratic normal form.
    Normalform(Common),
    /// Small-frequency behaviour of the resonance phase.
    Resonance(Common),
    /// The two-variable model system.
    Ode(Common),
    /// Run the full acceptance suite.
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration; the scenario preset is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `dotted.key=value`, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn build_config(kind: ScenarioKind, args: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => preset(kind),
    };
    cfg.scenario = kind;
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = args.seed {
        cfg.initial.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (ScenarioKind::Simulate, a),
        Command::Dispersion(a) => (ScenarioKind::Dispersion, a),
        Command::Lifespan(a) => (ScenarioKind::Lifespan, a),
        Command::Blowup(a) => (ScenarioKind::Blowup, a),
        Command::Normalform(a) => (ScenarioKind::Normalform, a),
        Command::Resonance(a) => (ScenarioKind::Resonance, a),
        Command::Ode(a) => (ScenarioKind::Ode, a),
        Command::Verify { out } => {
            let rep = run_all(|r| println!("{}", r.line()));
            if let Some(dir) = out {
                rep.save(&dir)?;
            }
            return Ok(rep.passed());
        }
    };
    let cfg = build_config(kind, &args)?;
    let rep = run_scenario(&cfg)?;
    for v in &rep.verdicts {
        println!("{v}");
    }
    for f in &rep.fits {
        println!("fit {} = {:.6e} +/- {:.2e}", f.name, f.value, f.stderr);
    }
    println!("report written to {}", cfg.output.dir.join("report.json").display());
    Ok(rep.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
