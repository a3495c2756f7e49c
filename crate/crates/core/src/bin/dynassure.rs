use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dynassure::harness::{
    cmd_report, cmd_run_scenario, cmd_verify_controller, parse_weights, AppKind, ClockMode, HarnessError, RunManifest,
};

#[derive(Parser)]
#[command(name = "dynassure", version, about = "Verified self-adaptation with dynamic assurance arguments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model-check the controller automata against P1-P9 and the application properties.
    VerifyController(RunArgs),
    /// Run a change scenario through the adaptation loop and archive every decision.
    RunScenario(RunArgs),
    /// Check an archive and print a decision summary.
    Report {
        /// Archive directory written by run-scenario.
        archive: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Application: uuv or fx.
    #[arg(long)]
    app: String,
    /// Scenario file; defaults to the shipped scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Service registry (fx only); defaults to the shipped table.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Controller automata network; defaults to the shipped network.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Cost weights as `w1,w2`.
    #[arg(long)]
    weights: Option<String>,
    /// Analysis deadline in seconds.
    #[arg(long)]
    deadline: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// logical-clock or wall-clock.
    #[arg(long, default_value = "logical-clock")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest, HarnessError> {
        Ok(RunManifest {
            application: self.app.parse::<AppKind>()?,
            scenario: self.scenario.clone(),
            registry: self.registry.clone(),
            network: self.network.clone(),
            weights: self.weights.as_deref().map(parse_weights).transpose()?,
            deadline: self.deadline,
            out: self.out.clone(),
            mode: self.mode.parse::<ClockMode>()?,
            seed: self.seed,
        })
    }
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::VerifyController(a) => {
            let r = cmd_verify_controller(&a.manifest()?)?;
            print!("{}", r.report.render());
            if let Some(p) = &r.report_path {
                eprintln!("report written to {}", p.display());
            }
            Ok(r.exit_code())
        }
        Command::RunScenario(a) => {
            let run = cmd_run_scenario(&a.manifest()?)?;
            for d in &run.decisions {
                let target = d.target.as_deref().unwrap_or("-");
                println!("{:>3} t={:<8} {:<6} {:<9} {}", d.seq, d.time, d.event, d.decision, target);
            }
            if let Some(dir) = &run.archive {
                eprintln!("archive written to {}", dir.display());
            }
            Ok(0)
        }
        Command::Report { archive } => {
            print!("{}", cmd_report(&archive)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
