use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wick_llt::experiment::{run, Command, RunOptions, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "wick-llt",
    version,
    about = "Local limit theorem experiments for Wick-product convolutions on Gaussian space"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check A1/A2/A3 for a density; exit 0 iff all pass.
    Audit(Common),
    /// Rate sweep of the L1 distance against C/sqrt(n).
    Llt(Common),
    /// Identity suite with per-identity pass/fail.
    Validate(Common),
    /// Path-space shifts, Novikov and A3 estimates, optional rate sweep.
    Sde(Common),
    /// Emit the xi series for a given G.
    BuildXi(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Run despite failed hypotheses; outputs are watermarked.
    #[arg(long)]
    override_audit: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let (command, common) = match cli.command {
        Cmd::Audit(c) => (Command::Audit, c),
        Cmd::Llt(c) => (Command::Llt, c),
        Cmd::Validate(c) => (Command::Validate, c),
        Cmd::Sde(c) => (Command::Sde, c),
        Cmd::BuildXi(c) => (Command::BuildXi, c),
    };
    let options = RunOptions {
        out_dir: common.out,
        seed: common.seed,
        threads: common.threads,
        override_audit: common.override_audit,
    };
    let outcome = run(command, &common.config, &options);
    for line in &outcome.messages {
        println!("{line}");
    }
    for path in &outcome.outputs {
        eprintln!("wrote {}", path.display());
    }
    ExitCode::from(outcome.exit_code as u8)
}
