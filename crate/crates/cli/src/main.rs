use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use nonloc_stab::{execute, load, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// solve one problem and write its profile
    Solve,
    /// compare two problems against the continuous-dependence estimates
    Audit,
    /// regenerate a named experiment table
    Preset,
    /// check the discrete identities and inequalities on random fields
    Identities,
}

#[derive(Debug, Parser)]
#[command(name = "nonloc-stab", version, about = "Continuous-dependence audits for 1D nonlocal Poisson problems")]
struct Args {
    command: Cmd,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// mesh width, overriding the config
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let level = if args.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let command = match args.command {
        Cmd::Solve => Command::Solve,
        Cmd::Audit => Command::Audit,
        Cmd::Preset => Command::Preset,
        Cmd::Identities => Command::Identities,
    };
    let result = load(command, &args.config, args.out, args.h, args.quiet).and_then(|cfg| execute(&cfg));
    match result {
        Ok(text) => {
            if !args.quiet {
                print!("{text}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nonloc-stab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
