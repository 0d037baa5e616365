use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wflow_cli::{load, run, write_outputs, Kind, RunError};

/// Run a wflow experiment from a TOML config.
#[derive(Parser, Debug)]
#[command(name = "wflow", version)]
struct Args {
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "WFLOW_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Config { line: 1, msg: format!("cannot read {}: {e}", args.config.display()) })
        .and_then(|src| {
            let cfg = load(&src)?;
            let out = run(&src, &cfg, args.kind, args.seed)?;
            write_outputs(&out, &args.out)?;
            Ok(out)
        });
    match result {
        Ok(out) => {
            println!("{}", serde_json::to_string(&out.summary).expect("summary serializes"));
            ExitCode::from(out.summary.exit_code() as u8)
        }
        Err(e) => {
            match &e {
                RunError::Config { .. } => eprintln!("{}: {e}", args.config.display()),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
