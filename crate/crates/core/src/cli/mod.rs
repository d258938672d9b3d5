//! Experiment front door: config parsing, parallel sweeps and output files.

mod config;

pub use config::{
    parse_config, CacheSection, ChannelSection, ExperimentConfig, PolicySection, PowerSpec,
    RunSection, SweepSection, TwoClass,
};

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sim::{run, RunConfig, RunOutput, RunSummary, TraceRow};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

pub const TRACE_COLUMNS: [&str; 12] = [
    "slot",
    "policy",
    "K",
    "V",
    "alpha",
    "seed",
    "delivered_rate",
    "admitted_rate",
    "total_S_files",
    "total_Q_files",
    "total_U",
    "sum_utility",
];

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    /// Emit one trace row per slot.
    pub verbose_trace: bool,
}

/// Runs every sweep point. Results keep the order of [`ExperimentConfig::expand`].
pub fn run_sweep(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<(RunConfig, RunOutput)>> {
    let mut runs = config.expand()?;
    if opts.verbose_trace {
        for r in &mut runs {
            r.window = 1;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let outputs: Vec<Result<RunOutput>> = pool.install(|| runs.par_iter().map(run).collect());
    runs.into_iter()
        .zip(outputs)
        .map(|(c, o)| o.map(|o| (c, o)))
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes the windowed trace. Per-user rates are `;`-joined in user order.
pub fn write_trace<W: std::io::Write>(out: W, runs: &[(RunConfig, RunOutput)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for (cfg, output) in runs {
        for row in &output.trace {
            w.write_record(trace_record(cfg, row))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn trace_record(cfg: &RunConfig, row: &TraceRow) -> [String; 12] {
    [
        row.slot.to_string(),
        cfg.policy.to_string(),
        cfg.num_users().to_string(),
        cfg.params.v.to_string(),
        cfg.params.alpha.to_string(),
        cfg.seed.to_string(),
        join(&row.delivered_rates),
        join(&row.admitted_rates),
        row.total_pending_files.to_string(),
        row.total_codeword_files.to_string(),
        row.total_virtual.to_string(),
        row.sum_utility.to_string(),
    ]
}

/// Runs the experiment and writes all output files into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path, opts: &RunOptions) -> Result<Vec<RunSummary>> {
    let runs = run_sweep(config, opts)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let resolved = out_dir.join(RESOLVED_CONFIG_FILE);
    fs::write(&resolved, config.to_toml_string()).map_err(io_err(&resolved))?;

    let summaries: Vec<RunSummary> = runs.iter().map(|(_, o)| o.summary.clone()).collect();
    let summary_path = out_dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summaries).expect("summaries serialize");
    fs::write(&summary_path, json + "\n").map_err(io_err(&summary_path))?;

    let trace_path = out_dir.join(TRACE_FILE);
    let file = fs::File::create(&trace_path).map_err(io_err(&trace_path))?;
    write_trace(std::io::BufWriter::new(file), &runs).map_err(|e| Error::Io {
        path: trace_path.clone(),
        source: e.into(),
    })?;
    Ok(summaries)
}

/// Paths of the files [`run_experiment`] writes.
pub fn output_paths(out_dir: &Path) -> [PathBuf; 3] {
    [
        out_dir.join(SUMMARY_FILE),
        out_dir.join(TRACE_FILE),
        out_dir.join(RESOLVED_CONFIG_FILE),
    ]
}
