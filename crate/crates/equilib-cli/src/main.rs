//! Batch front end: scenario verification, parameter sweeps, CSV reports.
//!
//! Exit codes: 0 when every checked inequality holds, 2 when any check fails,
//! 1 on configuration or runtime errors.

mod config;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use config::{Axis, Config};
use scenario::Row;

#[derive(Parser)]
#[command(
    name = "equilib",
    about = "Finite-time equilibration bounds for continuous spectra: verify, sweep, report",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Scenario config: a TOML file path or a bundled preset name
    /// (toy_s6, finite_dim_short, lemma_suite).
    config: String,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Slack added to every right-hand side before the pass check.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Worker threads for sweep rows (default: EQUILIB_JOBS or all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the CSV report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full inequality suite for one scenario.
    Verify {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Cartesian-product sweep over scenario parameters.
    Sweep {
        #[command(flatten)]
        opts: CommonOpts,
        /// Sweep axis NAME=v1,v2,... (repeatable; known names:
        /// T, delta, count, n_points, seed).
        #[arg(long = "axis")]
        axes: Vec<String>,
    },
    /// Run a scenario and emit only the CSV report.
    Report {
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn effective_jobs(opts: &CommonOpts) -> usize {
    opts.jobs
        .or_else(|| {
            std::env::var("EQUILIB_JOBS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0) // 0 lets rayon pick the core count
}

fn load_config(opts: &CommonOpts) -> Result<Config> {
    let mut cfg = Config::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = Some(seed);
    }
    Ok(cfg)
}

fn scenario_name(opts: &CommonOpts) -> String {
    std::path::Path::new(&opts.config)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| opts.config.clone())
}

fn emit(rows: &[Row], opts: &CommonOpts, quiet: bool) -> Result<bool> {
    if !quiet {
        for row in rows {
            for line in report::console_lines(row) {
                println!("{line}");
            }
        }
    }
    let all_pass = rows.iter().all(Row::pass_all);
    if let Some(path) = &opts.out {
        let text = report::to_csv_string(rows);
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        if !quiet {
            println!("report written to {}", path.display());
        }
    }
    Ok(all_pass)
}

fn run_verify(opts: &CommonOpts) -> Result<bool> {
    let cfg = load_config(opts)?;
    let rows = scenario::run_scenario(&cfg, &scenario_name(opts), opts.tolerance)?;
    let pass = emit(&rows, opts, false)?;
    println!(
        "{}: {} rows, {}",
        scenario_name(opts),
        rows.len(),
        if pass { "all checks passed" } else { "CHECK FAILURES" }
    );
    Ok(pass)
}

fn run_report(opts: &CommonOpts) -> Result<bool> {
    let cfg = load_config(opts)?;
    let rows = scenario::run_scenario(&cfg, &scenario_name(opts), opts.tolerance)?;
    if opts.out.is_none() {
        // No file requested: the CSV goes to stdout.
        print!("{}", report::to_csv_string(&rows));
        return Ok(rows.iter().all(Row::pass_all));
    }
    emit(&rows, opts, true)
}

fn run_sweep(opts: &CommonOpts, axis_specs: &[String]) -> Result<bool> {
    let cfg = load_config(opts)?;
    let mut axes = axis_specs
        .iter()
        .map(|a| Axis::parse(a))
        .collect::<Result<Vec<_>>>()?;
    // Deterministic lexicographic axis order; values keep their given order.
    axes.sort_by(|a, b| a.name.cmp(&b.name));

    // Cartesian product of axis values.
    let mut combos: Vec<Vec<f64>> = vec![vec![]];
    for axis in &axes {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }

    let base_name = scenario_name(opts);
    let jobs = effective_jobs(opts);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<Vec<Row>>> = pool.install(|| {
        combos
            .par_iter()
            .map(|combo| {
                let mut row_cfg = cfg.clone();
                let mut label = base_name.clone();
                for (axis, &value) in axes.iter().zip(combo) {
                    axis.apply(&mut row_cfg, value)?;
                    label.push_str(&format!("/{}={}", axis.name, value));
                }
                row_cfg.revalidate()?;
                scenario::run_scenario(&row_cfg, &label, opts.tolerance)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    emit(&rows, opts, false)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Verify { opts } => run_verify(opts),
        Command::Sweep { opts, axes } => run_sweep(opts, axes),
        Command::Report { opts } => run_report(opts),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
