use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use urnsync::experiment::{
    load_config_file, run, secondary_path, Command, ExperimentConfig, PartialConfig, RunOutput,
};
use urnsync::io::Format;

#[derive(Parser)]
#[command(
    name = "urnsync",
    version,
    about = "Mean-field interacting Pólya urns: simulation, exact moments and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate one trajectory, or an ensemble when --replicas > 1.
    Simulate(RunArgs),
    /// Exact second-moment recursions.
    Moments(RunArgs),
    /// Decay exponents and regime diagnostics of the limit recursion.
    Asymptotics(RunArgs),
    /// Gaussian fluctuation checks on a large ensemble.
    Clt(RunArgs),
    /// Run the acceptance suite.
    Verify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file, or any output of this tool.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of urns.
    #[arg(long)]
    n: Option<usize>,
    /// Initial red balls per urn.
    #[arg(long)]
    a: Option<u64>,
    /// Initial white balls per urn.
    #[arg(long)]
    b: Option<u64>,
    /// Mean-field coupling in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or jsonl.
    #[arg(long)]
    format: Option<Format>,
    /// Worker threads (does not affect results).
    #[arg(long)]
    threads: Option<usize>,
    /// Allow runs above the work budget.
    #[arg(long)]
    budget_override: bool,
    /// Recording stride for simulate.
    #[arg(long)]
    record_every: Option<u64>,
    /// Also write every urn's fraction (simulate, one replica).
    #[arg(long)]
    full: bool,
    /// Comma-separated alphas for asymptotics.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    window_lo: Option<u64>,
    #[arg(long)]
    window_hi: Option<u64>,
    /// Acceptance criteria only (verify).
    #[arg(long)]
    quick: bool,
}

impl RunArgs {
    fn flag_layer(&self) -> PartialConfig {
        let on = |b: bool| b.then_some(true);
        PartialConfig {
            command: None,
            n: self.n,
            a: self.a,
            b: self.b,
            alpha: self.alpha,
            horizon: self.horizon,
            replicas: self.replicas,
            seed: self.seed,
            format: self.format,
            record_every: self.record_every,
            full: on(self.full),
            alphas: self.alphas.clone(),
            window_lo: self.window_lo,
            window_hi: self.window_hi,
            budget_override: on(self.budget_override),
            quick: on(self.quick),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn emit(config: &ExperimentConfig, output: &RunOutput, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(path) => {
            write_file(path, &output.primary)?;
            for artifact in &output.secondary {
                write_file(
                    &secondary_path(path, artifact.name, config.format),
                    &artifact.bytes,
                )?;
            }
        }
        None if config.command == Command::Verify => {}
        None => {
            std::io::stdout()
                .write_all(&output.primary)
                .map_err(|e| format!("cannot write to stdout: {e}"))?;
            for artifact in &output.secondary {
                eprintln!(
                    "note: {} output not written (requires --out)",
                    artifact.name
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (command, args) = match &cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Moments(a) => (Command::Moments, a),
        Sub::Asymptotics(a) => (Command::Asymptotics, a),
        Sub::Clt(a) => (Command::Clt, a),
        Sub::Verify(a) => (Command::Verify, a),
    };

    let result = (|| -> Result<(ExperimentConfig, RunOutput), String> {
        let file = match &args.config {
            Some(path) => load_config_file(path).map_err(|e| format!("{}: {e}", path.display()))?,
            None => PartialConfig::default(),
        };
        let config = ExperimentConfig::resolve(command, &[&file, &args.flag_layer()])
            .map_err(|e| e.to_string())?;
        let output = run(&config, args.threads).map_err(|e| e.to_string())?;
        emit(&config, &output, args.out.as_deref())?;
        Ok((config, output))
    })();

    match result {
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Ok((config, output)) => {
            for line in &output.messages {
                if config.command == Command::Verify {
                    println!("{line}");
                } else {
                    eprintln!("{line}");
                }
            }
            if output.failed {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
