use crate::config_file::{self, ConfigFileError};
use crate::output::OutputSet;
use crate::presets;
use crate::validation::{self, ValidationParams};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use swarm_core::{
    allocate, burst_bounds, download_rates, AllocationInput, ArrivalProcess, ModelError,
    PieceCountVector, SwarmConfig,
};
use swarm_sim::metrics::{self, DEFAULT_BURST_WINDOW, DEFAULT_SYNC_THRESHOLD};
use swarm_sim::EventTrace;

pub const SCHEMA_VERSION: u32 = 1;

/// Gap below which two departures count as simultaneous in the summary.
const NEAR_SIMULTANEOUS: f64 = 2.0;

#[derive(Debug, Parser)]
#[command(
    name = "swarmsim",
    version,
    about = "Fluid model, burst bounds and piece-level simulation of small BitTorrent swarms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Allocate upload rates for a piece-count vector and print the rate matrix.
    Model(ModelArgs),
    /// Print expected departure-burst bounds for Poisson arrivals.
    Predict(PredictArgs),
    /// Run the simulator and write the trace, metric tables and a JSON summary.
    Simulate(SimulateArgs),
    /// Compare model and simulated rates on the A/B partition scenario.
    Validate(ValidateArgs),
    /// List the built-in scenarios.
    Presets,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Piece counts, one per leecher, comma-separated.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub b: Vec<u32>,
    /// Seed upload capacity.
    #[arg(long)]
    pub cs: f64,
    /// Leecher upload capacity.
    #[arg(long)]
    pub cl: f64,
    /// Recipients each leecher splits its capacity over (default N-1).
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Arrival rate, leechers per second.
    #[arg(long, default_value_t = 0.001)]
    pub lambda: f64,
    /// Content size in kB.
    #[arg(long, default_value_t = 256_000.0)]
    pub size: f64,
    /// Seed capacities, one output row each.
    #[arg(long, value_delimiter = ',', default_values_t = [48.0, 64.0, 96.0, 128.0])]
    pub cs: Vec<f64>,
    /// Leecher upload capacity.
    #[arg(long, default_value_t = 64.0)]
    pub cl: f64,
    /// Take all parameters from a Poisson preset instead.
    #[arg(long, conflicts_with_all = ["lambda", "size", "cs", "cl"])]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["config", "preset"]))]
pub struct SimulateArgs {
    /// Scenario file (`key = value` lines with an `[arrivals]` section).
    pub config: Option<PathBuf>,
    /// Built-in scenario name (see `presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Override the RNG seed; several seeds run in parallel, one subdirectory each.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Override the simulated horizon in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Departures closer than this many seconds belong to the same burst.
    #[arg(long, default_value_t = DEFAULT_BURST_WINDOW)]
    pub burst_window: f64,
    /// Missing-piece count under which leechers count as synchronized.
    #[arg(long, default_value_t = DEFAULT_SYNC_THRESHOLD)]
    pub sync_threshold: u32,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 0.25)]
    pub cs: f64,
    #[arg(long, default_value_t = 0.25)]
    pub cl: f64,
    /// Smallest swarm size N in the grid.
    #[arg(long, default_value_t = 1)]
    pub min_leechers: usize,
    /// Largest swarm size N in the grid.
    #[arg(long, default_value_t = 5)]
    pub max_leechers: usize,
    #[arg(long, default_value_t = 4000)]
    pub pieces: u32,
    /// Piece size in kB.
    #[arg(long, default_value_t = 1.0)]
    pub piece_size: f64,
    /// One simulation per seed and cell; rates are averaged.
    #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
    pub seeds: Vec<u64>,
    /// Seconds after the last arrival before measuring.
    #[arg(long, default_value_t = 50.0)]
    pub settle: f64,
    /// Shortest acceptable measurement window in seconds.
    #[arg(long, default_value_t = 200.0)]
    pub min_window: f64,
    /// Fraction of the window dropped just before the first departure or catch-up.
    #[arg(long, default_value_t = 0.1)]
    pub tail_trim: f64,
    /// Write the report here instead of standard output.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{message}")]
    Usage {
        subcommand: &'static str,
        message: String,
    },
    #[error("{path}: {source}")]
    Config {
        path: String,
        source: ConfigFileError,
    },
    #[error("cannot read {path}: {source}")]
    ConfigRead { path: String, source: io::Error },
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage { .. } | CliError::Config { .. } | CliError::ConfigRead { .. } => 2,
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }

    fn usage(subcommand: &'static str, message: impl ToString) -> Self {
        CliError::Usage {
            subcommand,
            message: message.to_string(),
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Model(a) => cmd_model(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Validate(a) => cmd_validate(&a, out),
        Command::Presets => cmd_presets(out),
    }
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::Io {
        context: "writing output".into(),
        source: e,
    }
}

pub fn cmd_model(a: &ModelArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let input = AllocationInput::new(PieceCountVector::new(a.b.clone()), a.cs, a.cl);
    let input = match a.n {
        Some(n) => input.with_recipients(n),
        None => input,
    };
    let matrix = allocate(&input).map_err(|e| CliError::usage("model", e))?;
    let rates = download_rates(&matrix);
    let n = matrix.size();

    let mut text = String::from("uploader");
    for j in 1..=n {
        text.push_str(&format!(",L{j}"));
    }
    text.push('\n');
    text.push_str("seed");
    for _ in 0..n {
        text.push_str(&format!(",{:.6}", matrix.seed_share()));
    }
    text.push('\n');
    for (i, row) in matrix.rows().enumerate() {
        text.push_str(&format!("L{}", i + 1));
        for r in row {
            text.push_str(&format!(",{r:.6}"));
        }
        text.push('\n');
    }
    text.push_str("download");
    for r in &rates {
        text.push_str(&format!(",{r:.6}"));
    }
    text.push('\n');
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

struct PredictRow {
    seed_capacity: f64,
    arrival_rate: f64,
    content_size: f64,
    leecher_capacity: f64,
}

fn poisson_preset_row(name: &str) -> Result<PredictRow, CliError> {
    let preset = presets::find(name)
        .ok_or_else(|| CliError::usage("predict", format!("unknown preset `{name}`")))?;
    let ArrivalProcess::Poisson { rate } = preset.config.arrival_process else {
        return Err(CliError::usage(
            "predict",
            format!("preset `{name}` has no Poisson arrivals"),
        ));
    };
    Ok(PredictRow {
        seed_capacity: preset.config.seed_upload_capacity,
        arrival_rate: rate,
        content_size: preset.config.content_size(),
        leecher_capacity: preset.config.leecher_upload_capacity,
    })
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = match &a.preset {
        Some(name) => vec![poisson_preset_row(name)?],
        None => {
            a.cs.iter()
                .map(|&c_s| PredictRow {
                    seed_capacity: c_s,
                    arrival_rate: a.lambda,
                    content_size: a.size,
                    leecher_capacity: a.cl,
                })
                .collect()
        }
    };
    let mut text = String::from("c_s,E[N],B_min,B_max,B_min/E[N],B_max/E[N],note\n");
    for r in rows {
        let b = burst_bounds(
            r.arrival_rate,
            r.content_size,
            r.seed_capacity,
            r.leecher_capacity,
        )
        .map_err(|e| CliError::usage("predict", e))?;
        let note = if b.fast_seed {
            "fast-seed: B_max not reproducible under the fluid model"
        } else {
            ""
        };
        text.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{:.3},{:.3},{note}\n",
            r.seed_capacity,
            b.expected_arrivals,
            b.b_min,
            b.b_max,
            b.b_min_ratio(),
            b.b_max_ratio()
        ));
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

pub fn cmd_presets(out: &mut dyn Write) -> Result<(), CliError> {
    let mut text = String::new();
    for p in presets::all() {
        text.push_str(&format!("{:<20} {}\n", p.name, p.description));
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn load_config(a: &SimulateArgs) -> Result<SwarmConfig, CliError> {
    let mut cfg = match (&a.preset, &a.config) {
        (Some(name), _) => {
            presets::find(name)
                .ok_or_else(|| CliError::usage("simulate", format!("unknown preset `{name}`")))?
                .config
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
                path: path.display().to_string(),
                source,
            })?;
            config_file::parse(&text).map_err(|source| CliError::Config {
                path: path.display().to_string(),
                source,
            })?
        }
        (None, None) => {
            return Err(CliError::usage(
                "simulate",
                "a config file or --preset is required",
            ))
        }
    };
    if let Some(d) = a.duration {
        cfg.sim_duration = d;
    }
    if a.burst_window.is_nan() || a.burst_window < 0.0 {
        return Err(CliError::usage(
            "simulate",
            "--burst-window must be non-negative",
        ));
    }
    cfg.validate().map_err(|e| CliError::Config {
        path: "resolved configuration".into(),
        source: e.into(),
    })?;
    Ok(cfg)
}

fn config_json(cfg: &SwarmConfig) -> Value {
    let arrivals = match &cfg.arrival_process {
        ArrivalProcess::Poisson { rate } => json!({ "poisson_rate": rate }),
        ArrivalProcess::Schedule(times) => json!({ "schedule": times }),
    };
    json!({
        "seed_upload_capacity": cfg.seed_upload_capacity,
        "leecher_upload_capacity": cfg.leecher_upload_capacity,
        "piece_count": cfg.piece_count,
        "piece_size": cfg.piece_size,
        "sim_duration": cfg.sim_duration,
        "rng_seed": cfg.rng_seed,
        "max_recipients": cfg.max_recipients,
        "sample_interval": cfg.sample_interval,
        "arrivals": arrivals,
    })
}

/// Summary statistics of one run.
pub fn summary_json(
    cfg: &SwarmConfig,
    trace: &EventTrace,
    burst_window: f64,
    sync_threshold: u32,
) -> Value {
    let periods = metrics::busy_periods(trace);
    let by_order: Vec<Value> = metrics::download_time_by_order(trace)
        .iter()
        .map(|(order, s)| json!({ "order": order, "mean_download_time_s": s.mean_download_time, "samples": s.samples }))
        .collect();
    let download = metrics::download_time_summary(trace)
        .map(|s| json!({ "min": s.min, "p25": s.p25, "mean": s.mean, "p75": s.p75, "max": s.max, "samples": s.samples }))
        .unwrap_or(Value::Null);
    let gaps = metrics::Ccdf::new(metrics::interdeparture_gaps(trace));
    let bursts = metrics::burst_sizes(trace, burst_window);
    let companions: Vec<f64> = bursts.iter().map(|b| b.companions as f64).collect();
    let mean_companions =
        (!companions.is_empty()).then(|| companions.iter().sum::<f64>() / companions.len() as f64);
    let sync = metrics::sync_summary(trace, sync_threshold);
    json!({
        "schema_version": SCHEMA_VERSION,
        "config": config_json(cfg),
        "end_time_s": trace.end_time,
        "leechers_arrived": trace.arrivals().count(),
        "leechers_departed": trace.departures().count(),
        "mean_swarm_size": metrics::mean_swarm_size(trace),
        "busy_periods": {
            "count": periods.len(),
            "complete": periods.iter().filter(|p| p.complete).count(),
        },
        "download_time_s": download,
        "download_time_by_order": by_order,
        "interdeparture": {
            "gaps": gaps.len(),
            "fraction_within_2s": (!gaps.is_empty()).then(|| gaps.fraction_at_most(NEAR_SIMULTANEOUS)),
        },
        "bursts": {
            "window_s": burst_window,
            "periods": bursts.len(),
            "mean_companions": mean_companions,
            "max_companions": bursts.iter().map(|b| b.companions).max(),
        },
        "sync": {
            "threshold_pieces": sync_threshold,
            "mean_present": sync.mean_present,
            "mean_synchronized": sync.mean_synchronized,
        },
    })
}

fn csv<F>(f: F) -> Vec<u8>
where
    F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Runs one configuration and writes every output file into `dir`.
fn simulate_into(
    outputs: &OutputSet,
    dir: &Path,
    cfg: SwarmConfig,
    a: &SimulateArgs,
) -> Result<Value, CliError> {
    let trace = swarm_sim::run(cfg.clone()).map_err(|e| CliError::Config {
        path: "resolved configuration".into(),
        source: e.into(),
    })?;
    let summary = summary_json(&cfg, &trace, a.burst_window, a.sync_threshold);
    let periods = metrics::busy_periods(&trace);
    let files: Vec<(&str, Vec<u8>)> = vec![
        ("config.txt", config_file::render(&cfg).into_bytes()),
        ("trace.csv", csv(|b| trace.write_csv(b))),
        (
            "busy_periods.csv",
            csv(|b| metrics::write_busy_periods_csv(b, &periods)),
        ),
        (
            "download_by_order.csv",
            csv(|b| {
                metrics::write_download_by_order_csv(b, &metrics::download_time_by_order(&trace))
            }),
        ),
        (
            "interdeparture_ccdf.csv",
            csv(|b| metrics::write_ccdf_csv(b, &metrics::interdeparture_ccdf(&trace))),
        ),
        (
            "sync.csv",
            csv(|b| {
                metrics::write_sync_csv(b, &metrics::synchronized_series(&trace, a.sync_threshold))
            }),
        ),
        (
            "bursts.csv",
            csv(|b| metrics::write_bursts_csv(b, &metrics::burst_sizes(&trace, a.burst_window))),
        ),
    ];
    for (name, bytes) in files {
        outputs.write(&dir.join(name), &bytes)?;
    }
    if let Ok(s) = metrics::download_time_summary(&trace) {
        outputs.write(
            &dir.join("download_times.csv"),
            &csv(|b| metrics::write_summary_csv(b, &s)),
        )?;
    }
    outputs.write(&dir.join("summary.json"), &pretty(&summary))?;
    Ok(summary)
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("json values always serialize");
    bytes.push(b'\n');
    bytes
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let base = load_config(a)?;
    let outputs = OutputSet::new();
    let result = (|| {
        outputs.create_dir(&a.out)?;
        match a.seeds.as_slice() {
            [] => simulate_into(&outputs, &a.out, base.clone(), a).map(|_| ()),
            [seed] => simulate_into(
                &outputs,
                &a.out,
                SwarmConfig {
                    rng_seed: *seed,
                    ..base.clone()
                },
                a,
            )
            .map(|_| ()),
            seeds => {
                let runs = seeds
                    .par_iter()
                    .map(|&seed| {
                        let dir = a.out.join(format!("seed-{seed}"));
                        outputs.create_dir(&dir)?;
                        simulate_into(
                            &outputs,
                            &dir,
                            SwarmConfig {
                                rng_seed: seed,
                                ..base.clone()
                            },
                            a,
                        )
                    })
                    .collect::<Vec<_>>()
                    .into_iter()
                    .collect::<Result<Vec<Value>, CliError>>()?;
                let sizes: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r["mean_swarm_size"].as_f64())
                    .collect();
                let combined = json!({
                    "schema_version": SCHEMA_VERSION,
                    "seeds": seeds,
                    "mean_swarm_size": sizes.iter().sum::<f64>() / sizes.len() as f64,
                    "runs": runs,
                });
                outputs.write(&a.out.join("summary.json"), &pretty(&combined))
            }
        }
    })();
    match result {
        Ok(()) => writeln!(out, "wrote {} files to {}", outputs.len(), a.out.display())
            .map_err(stdout_err),
        Err(e) => {
            outputs.rollback();
            Err(e)
        }
    }
}

pub fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.min_leechers == 0 || a.min_leechers > a.max_leechers {
        return Err(CliError::usage(
            "validate",
            "need 1 <= --min-leechers <= --max-leechers",
        ));
    }
    if a.seeds.is_empty() {
        return Err(CliError::usage("validate", "at least one seed is required"));
    }
    let params = ValidationParams {
        seed_capacity: a.cs,
        leecher_capacity: a.cl,
        piece_count: a.pieces,
        piece_size: a.piece_size,
        min_leechers: a.min_leechers,
        max_leechers: a.max_leechers,
        seeds: a.seeds.clone(),
        settle: a.settle,
        min_window: a.min_window,
        tail_trim: a.tail_trim,
    };
    let probe = SwarmConfig {
        seed_upload_capacity: a.cs,
        leecher_upload_capacity: a.cl,
        piece_count: a.pieces,
        piece_size: a.piece_size,
        arrival_process: ArrivalProcess::Schedule(vec![0.0]),
        sim_duration: 1.0,
        rng_seed: 0,
        max_recipients: None,
        sample_interval: 1.0,
    };
    probe
        .validate()
        .map_err(|e| CliError::usage("validate", e))?;
    let report =
        validation::run_grid(&params).map_err(|e: ModelError| CliError::usage("validate", e))?;
    let bytes = csv(|b| report.write_csv(b));
    match &a.out {
        Some(path) => {
            let outputs = OutputSet::new();
            if let Err(e) = outputs.write(path, &bytes) {
                outputs.rollback();
                return Err(e);
            }
        }
        None => out.write_all(&bytes).map_err(stdout_err)?,
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.2}%", 100.0 * x));
    eprintln!(
        "max relative error: A {}, B {}; {} cell(s) not measurable",
        fmt(report.max_error_a()),
        fmt(report.max_error_b()),
        report.unmeasured().count()
    );
    Ok(())
}
