use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gdrisk_cli::config::{Command, Overrides};

/// Risk oracles, bounds and experiments for ridge, GD and SGD in linear regression.
#[derive(Debug, Parser)]
#[command(name = "gdrisk", version)]
struct Args {
    command: Command,
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "GDRISK_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(t) = args.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = if args.command == Command::Validate {
        gdrisk_cli::run_validate(&args.config).map(|diags| {
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!("ok");
            }
        })
    } else {
        let overrides = Overrides { out: args.out, seed: args.seed, trials: args.trials };
        gdrisk_cli::run(args.command, &args.config, &overrides).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        })
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
