use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use faircache::cli::{output_paths, parse_config, run_experiment, RunOptions};

/// Run coded caching experiments from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "faircache", version)]
struct Args {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the policy (lyapunov, unicast-opp, tdma-cc).
    #[arg(long)]
    policy: Option<String>,
    /// Override the seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Write one trace row per slot instead of per window.
    #[arg(long)]
    verbose_trace: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = parse_config(&args.config).and_then(|mut cfg| {
        cfg.override_with(args.policy.as_deref(), args.seed)?;
        print!("{}", cfg.to_toml_string());
        let opts = RunOptions {
            workers: args.workers,
            verbose_trace: args.verbose_trace,
        };
        run_experiment(&cfg, &args.out, &opts)
    });
    match result {
        Ok(summaries) => {
            eprintln!("{} runs finished", summaries.len());
            for p in output_paths(&args.out) {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
