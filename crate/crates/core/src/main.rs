use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use soliton_forge::cli::{configure_threads, run_command, Command, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Solve,
    Construct,
    Csf,
    Blowdown,
    Verify,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Solve => Command::Solve,
            Sub::Construct => Command::Construct,
            Sub::Csf => Command::Csf,
            Sub::Blowdown => Command::Blowdown,
            Sub::Verify => Command::Verify,
        }
    }
}

/// Solvers, constructions and estimate checks for convex translating
/// solitons. Flags override the values of a `--config` file.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    command: Sub,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    /// Depth, or a comma-separated list of depths.
    #[arg(long = "K")]
    k: Option<String>,
    /// Comma-separated blow-down scales.
    #[arg(long = "h-schedule")]
    h_schedule: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any other parameter as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    let mut cfg = match &args.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::new(args.command.into(), "out"),
    };
    cfg.command = args.command.into();
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let flags = [
        ("sigma", args.sigma),
        ("resolution", args.resolution),
        ("theta", args.theta),
        ("K", args.k),
        ("h_schedule", args.h_schedule),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg = cfg.set(key, v);
        }
    }
    for kv in &args.set {
        let Some((k, v)) = kv.split_once('=') else {
            eprintln!("--set expects KEY=VALUE, got '{kv}'");
            return ExitCode::from(2);
        };
        cfg = cfg.set(k.trim(), v.trim());
    }

    let outcome = run_command(&cfg);
    if let Some(msg) = &outcome.message {
        eprintln!("{msg}");
    }
    if let Some(m) = &outcome.manifest {
        println!("{} files written to {}", m.files.len(), cfg.out.display());
    }
    ExitCode::from(outcome.status as u8)
}
