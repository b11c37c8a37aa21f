use clap::Parser;
use decoyqkd::cli::{run, RunError};
use decoyqkd::config::{load_config, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Finite-key analysis for vacuum+weak decoy-state QKD.
#[derive(Parser, Debug)]
#[command(name = "decoyqkd", version, about)]
struct Args {
    /// Config file with `key = value` lines; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// bounds | estimate | keyrate | optimize | sweep | maxdist | table2 | figures | coverage
    #[arg(long)]
    mode: Option<String>,

    /// exact | simplified | asymptotic | gaussian | ch
    #[arg(long)]
    method: Option<String>,

    /// Output file (or directory for multi-table modes); stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for the Monte-Carlo modes.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; 0 uses the machine parallelism.
    #[arg(long)]
    workers: Option<usize>,

    /// csv | json
    #[arg(long)]
    format: Option<String>,
}

fn build_config(args: Args) -> Result<RunConfig, RunError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path).map_err(|e| RunError::Validation(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(mode) = args.mode {
        cfg.mode = mode.parse().map_err(RunError::Usage)?;
    }
    if let Some(method) = args.method {
        cfg.method = method.parse().map_err(RunError::Usage)?;
    }
    if let Some(format) = args.format {
        cfg.format = format.parse().map_err(RunError::Usage)?;
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            // keep clap's rendering but pin the usage exit code
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = build_config(args).and_then(|cfg| run(&cfg));
    match result {
        Ok(artifacts) => {
            for path in artifacts.files {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
