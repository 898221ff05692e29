//! Acceptance gate. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails. Tolerances are pinned below.

use clap::Parser;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};
use swarm_core::oracle::water_fill_matrix;
use swarm_core::{
    ab_scenario, allocate, download_rates, AllocationInput, ArrivalProcess, SwarmConfig,
};
use swarm_sim::metrics::{self, Ccdf};
use swarm_sim::{run, Simulation};
use swarmsim::presets;
use swarmsim::validation::{run_grid, ValidationParams};
use swarmsim::Cli;

/// Relative tolerance on the burst-bound table entries.
const TABLE_TOL: f64 = 0.005;
/// Oracle agreement on the three-leecher example.
const ORACLE_TOL: f64 = 1e-6;
const VALIDATION_A_TOL: f64 = 0.01;
const VALIDATION_B_TOL: f64 = 0.10;
const VALIDATION_BUDGET: Duration = Duration::from_secs(300);
/// Departure spread allowed, as a fraction of the first leecher's download time.
const FIG2_WINDOW: f64 = 0.05;
/// Last leecher's download time relative to the first one's.
const FIG2_SPEEDUP: f64 = 0.6;
const MIN_BUSY_PERIODS: usize = 30;
/// Order-4 mean download time must be at most this fraction of order 1's.
const ORDER_GAP: f64 = 0.8;
const NEAR_SIMULTANEOUS_S: f64 = 2.0;
const MIN_NEAR_SIMULTANEOUS: f64 = 0.2;

/// Independent seeds pooled for the Poisson criteria.
const POISSON_SEEDS: [u64; 6] = [1, 2, 3, 4, 5, 6];
const POISSON_HORIZON: f64 = 1.0e6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cli_output(args: &[&str]) -> Result<String, String> {
    let cli = Cli::try_parse_from(std::iter::once("swarmsim").chain(args.iter().copied()))
        .map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    swarmsim::run(cli, &mut out).map_err(|e| e.to_string())?;
    Ok(String::from_utf8(out).expect("utf-8 output"))
}

/// (E[N], B_min, B_max, note)
type PredictRow = (f64, f64, f64, String);

/// `predict` rows keyed by seed capacity.
fn predict_rows() -> Result<BTreeMap<u64, PredictRow>, String> {
    let text = cli_output(&[
        "predict",
        "--lambda",
        "0.001",
        "--size",
        "256000",
        "--cl",
        "64",
        "--cs",
        "48,64,96,128",
    ])?;
    let mut rows = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| format!("{line}: {e}"));
        rows.insert(
            num(0)? as u64,
            (num(1)?, num(2)?, num(3)?, f[6].to_string()),
        );
    }
    Ok(rows)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_table_slow_seed() -> Outcome {
    let rows = match predict_rows() {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let expected = [(48, (5.333, 1.667, 4.378)), (64, (4.000, 0.400, 1.895))];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (c_s, (n, lo, hi)) in expected {
        let Some(&(got_n, got_lo, got_hi, _)) = rows.get(&c_s) else {
            return outcome(false, format!("no row for c_s={c_s}"));
        };
        worst = worst
            .max(rel(got_n, n))
            .max(rel(got_lo, lo))
            .max(rel(got_hi, hi));
        parts.push(format!("c_s={c_s}: ({got_n:.3}, {got_lo:.3}, {got_hi:.3})"));
    }
    outcome(
        worst <= TABLE_TOL,
        format!(
            "{}; worst relative error {:.3}% (tol {:.1}%)",
            parts.join(", "),
            100.0 * worst,
            100.0 * TABLE_TOL
        ),
    )
}

fn criterion_table_clamping() -> Outcome {
    let rows = match predict_rows() {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for c_s in [96, 128] {
        match rows.get(&c_s) {
            Some((_, lo, _, note)) => {
                pass &= *lo == 0.0 && note.contains("fast-seed");
                parts.push(format!(
                    "c_s={c_s}: B_min={lo:.3} flag={}",
                    !note.is_empty()
                ));
            }
            None => return outcome(false, format!("no row for c_s={c_s}")),
        }
    }
    outcome(pass, parts.join(", "))
}

fn criterion_three_leecher_example() -> Outcome {
    let text = match cli_output(&["model", "--b", "3,2,1", "--cs", "60", "--cl", "96"]) {
        Ok(t) => t,
        Err(e) => return outcome(false, e),
    };
    let rates: Vec<f64> = text
        .lines()
        .find(|l| l.starts_with("download,"))
        .map(|l| {
            l.split(',')
                .skip(1)
                .filter_map(|v| v.parse().ok())
                .collect()
        })
        .unwrap_or_default();
    let exact = rates == [60.0, 136.0, 144.0];
    let (u, seed) = water_fill_matrix(&[3, 2, 1], 60.0, 96.0);
    let oracle: Vec<f64> = (0..3)
        .map(|j| seed + (0..3).map(|i| u[i][j]).sum::<f64>())
        .collect();
    let oracle_err = oracle
        .iter()
        .zip(&rates)
        .map(|(o, r)| (o - r).abs())
        .fold(0.0, f64::max);
    outcome(
        exact && oracle_err <= ORACLE_TOL,
        format!("rates {rates:?}, water-filling oracle {oracle:?} (max diff {oracle_err:.2e})"),
    )
}

fn criterion_validation_grid() -> Outcome {
    let started = Instant::now();
    let report = match run_grid(&ValidationParams::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = started.elapsed();
    let expected_cells = (1..=5).sum::<usize>();
    let unmeasured = report.unmeasured().count();
    let a = report.max_error_a().unwrap_or(f64::INFINITY);
    let b = report.max_error_b().unwrap_or(f64::INFINITY);
    outcome(
        report.cells.len() == expected_cells
            && unmeasured == 0
            && a < VALIDATION_A_TOL
            && b < VALIDATION_B_TOL
            && elapsed <= VALIDATION_BUDGET,
        format!(
            "{} cells, {unmeasured} unmeasured; max error A {:.2}% (< {:.0}%), B {:.2}% (< {:.0}%); {:.1} s",
            report.cells.len(),
            100.0 * a,
            100.0 * VALIDATION_A_TOL,
            100.0 * b,
            100.0 * VALIDATION_B_TOL,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_fig2() -> Outcome {
    let cfg = presets::find("fig2-arrivals").expect("preset").config;
    let trace = run(cfg).expect("valid preset");
    let times = metrics::download_times(&trace);
    let deps: Vec<f64> = trace.departures().map(|d| d.time).collect();
    if times.len() != 5 || deps.len() != 5 {
        return outcome(false, format!("{} of 5 leechers completed", deps.len()));
    }
    let spread = deps.iter().cloned().fold(f64::MIN, f64::max)
        - deps.iter().cloned().fold(f64::MAX, f64::min);
    let window_ok = spread <= FIG2_WINDOW * times[0];
    let ratio = times[4] / times[0];
    outcome(
        window_ok && ratio <= FIG2_SPEEDUP,
        format!(
            "departure spread {spread:.1} s vs {:.1} s allowed ({}); T5/T1 = {:.0}/{:.0} = {ratio:.3} (need <= {FIG2_SPEEDUP})",
            FIG2_WINDOW * times[0],
            if window_ok { "ok" } else { "too wide" },
            times[4],
            times[0]
        ),
    )
}

/// What the Poisson criteria need from one long run.
struct PoissonStats {
    periods: usize,
    order_sums: BTreeMap<usize, (f64, usize)>,
    gaps: Vec<f64>,
}

fn poisson_stats(c_s: f64, seed: u64) -> PoissonStats {
    let cfg = SwarmConfig {
        seed_upload_capacity: c_s,
        rng_seed: seed,
        sim_duration: POISSON_HORIZON,
        ..presets::find("poisson-cs64").expect("preset").config
    };
    let trace = run(cfg).expect("valid config");
    let order_sums = metrics::download_time_by_order(&trace)
        .into_iter()
        .map(|(k, s)| (k, (s.mean_download_time * s.samples as f64, s.samples)))
        .collect();
    PoissonStats {
        periods: metrics::busy_periods(&trace)
            .iter()
            .filter(|p| p.complete)
            .count(),
        order_sums,
        gaps: metrics::interdeparture_gaps(&trace),
    }
}

struct Pooled {
    periods: usize,
    order_means: Vec<(usize, f64, usize)>,
    near_simultaneous: f64,
}

fn pool<'a>(stats: impl Iterator<Item = &'a PoissonStats> + Clone) -> Pooled {
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut gaps = Vec::new();
    for s in stats.clone() {
        for (&k, &(sum, n)) in &s.order_sums {
            let e = sums.entry(k).or_default();
            e.0 += sum;
            e.1 += n;
        }
        gaps.extend_from_slice(&s.gaps);
    }
    Pooled {
        periods: stats.map(|s| s.periods).sum(),
        order_means: sums
            .into_iter()
            .map(|(k, (sum, n))| (k, sum / n as f64, n))
            .collect(),
        near_simultaneous: Ccdf::new(gaps).fraction_at_most(NEAR_SIMULTANEOUS_S),
    }
}

fn order_text(p: &Pooled, upto: usize) -> String {
    p.order_means
        .iter()
        .take(upto)
        .map(|(k, m, n)| format!("{k}:{m:.0}({n})"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_order_unfairness(c64: &Pooled, c96: &Pooled) -> Outcome {
    let m64: Vec<f64> = c64.order_means.iter().take(4).map(|o| o.1).collect();
    let m96: Vec<f64> = c96.order_means.iter().take(3).map(|o| o.1).collect();
    if m64.len() < 4 || m96.len() < 3 {
        return outcome(false, "too few arrival orders observed");
    }
    let decreasing = m64.windows(2).all(|w| w[1] < w[0]);
    let gap = 1.0 - m64[3] / m64[0];
    let gap_ok = m64[3] <= ORDER_GAP * m64[0];
    let reversed = m96[0] <= m96[1] && m96[0] <= m96[2];
    let enough = c64.periods >= MIN_BUSY_PERIODS && c96.periods >= MIN_BUSY_PERIODS;
    outcome(
        enough && decreasing && gap_ok && reversed,
        format!(
            "c_s=64 ({} periods) {} -> strictly decreasing: {decreasing}, 1-vs-4 gap {:.1}% (need >= {:.0}%); \
             c_s=96 ({} periods) {} -> order 1 minimal: {reversed}",
            c64.periods,
            order_text(c64, 4),
            100.0 * gap,
            100.0 * (1.0 - ORDER_GAP),
            c96.periods,
            order_text(c96, 3)
        ),
    )
}

fn criterion_departure_bursts(c48: &Pooled, c64: &Pooled, c96: &Pooled) -> Outcome {
    let level = c64.near_simultaneous >= MIN_NEAR_SIMULTANEOUS;
    let slow_more = c48.near_simultaneous > c96.near_simultaneous;
    outcome(
        level && slow_more,
        format!(
            "fraction of gaps <= {NEAR_SIMULTANEOUS_S} s: c_s=64 {:.3} (need >= {MIN_NEAR_SIMULTANEOUS}); \
             c_s=48 {:.3} > c_s=96 {:.3}: {slow_more}",
            c64.near_simultaneous, c48.near_simultaneous, c96.near_simultaneous
        ),
    )
}

/// Compact re-run of the property suites on fixed inputs.
fn criterion_properties() -> Outcome {
    let mut failures = Vec::new();

    // Allocation equals progressive filling for every ordering pattern, N <= 5.
    let mut patterns = vec![vec![]];
    let mut checked = 0usize;
    for size in 1..=5u32 {
        patterns = patterns
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                (1..=5).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
        for counts in patterns.iter().filter(|p| p.iter().all(|&v| v <= size)) {
            for (c_s, c_l) in [(60.0, 96.0), (64.0, 64.0), (96.0, 64.0)] {
                let m =
                    allocate(&AllocationInput::new(counts.clone(), c_s, c_l)).expect("valid input");
                let (u, seed) = water_fill_matrix(counts, c_s, c_l);
                let n = counts.len();
                let agree = (m.seed_share() - seed).abs() <= ORACLE_TOL * c_s
                    && (0..n)
                        .all(|i| (0..n).all(|j| (m.get(i, j) - u[i][j]).abs() <= ORACLE_TOL * c_l));
                let conserved = (0..n).all(|i| m.row_sum(i) <= c_l * (1.0 + 1e-12));
                let rates = download_rates(&m);
                let oldest = (0..n).filter(|&i| counts[i] == *counts.iter().max().unwrap());
                let pinned = c_s > c_l
                    || oldest
                        .into_iter()
                        .all(|i| n == 1 || (rates[i] - c_s).abs() <= 1e-9 * c_s);
                if !(agree && conserved && pinned) {
                    failures.push(format!("allocation {counts:?} c=({c_s},{c_l})"));
                }
                checked += 1;
            }
        }
    }

    // rate_B monotone in n_A, antitone in N.
    for c in [0.25, 64.0] {
        for n in 2..=8 {
            let rb = |n: usize, a: usize| ab_scenario(n, a, c, c).unwrap().rate_b.unwrap();
            if !(1..n - 1).all(|a| rb(n, a + 1) >= rb(n, a) - 1e-12) {
                failures.push(format!("rate_B not monotone in n_A at N={n}"));
            }
            if n > 2 && !(1..n - 1).all(|a| rb(n, a) >= rb(n + 1, a) - 1e-12) {
                failures.push(format!("rate_B not antitone in N at N={n}"));
            }
        }
    }

    // Simulator: conservation at every event, determinism, no duplicates.
    for seed in 0..6 {
        let cfg = SwarmConfig {
            seed_upload_capacity: 40.0 + 8.0 * seed as f64,
            leecher_upload_capacity: 64.0,
            piece_count: 40,
            piece_size: 16.0,
            arrival_process: ArrivalProcess::Poisson { rate: 0.02 },
            sim_duration: 2000.0,
            rng_seed: seed,
            max_recipients: None,
            sample_interval: 10.0,
        };
        let mut sim = Simulation::new(cfg.clone()).expect("valid config");
        let mut conserved = true;
        loop {
            let (up, down, acc) = (
                sim.total_uploaded_kb(),
                sim.total_downloaded_kb(),
                sim.accounted_kb(),
            );
            conserved &= (up - down).abs() <= 1e-6 * down.max(1.0)
                && (down - acc).abs() <= 1e-6 * down.max(1.0);
            if !sim.step() {
                break;
            }
        }
        let a = sim.into_trace();
        let b = run(cfg).expect("valid config");
        let deterministic = a.to_csv_string() == b.to_csv_string();
        let mut seen = std::collections::HashSet::new();
        let unique = a
            .records
            .iter()
            .filter_map(|r| r.piece.map(|p| (r.peer, p)))
            .all(|k| seen.insert(k));
        let points = metrics::interdeparture_ccdf(&a);
        let ccdf_ok = points
            .windows(2)
            .all(|w| w[0].0 <= w[1].0 && w[0].1 >= w[1].1)
            && points.first().is_none_or(|p| p.1 == 1.0);
        if !(conserved && deterministic && unique && ccdf_ok) {
            failures.push(format!(
                "sim seed {seed}: conserved={conserved} deterministic={deterministic} unique={unique} ccdf={ccdf_ok}"
            ));
        }
    }

    let detail = if failures.is_empty() {
        format!("{checked} allocation cases vs oracle, rate_B monotonicity, 6 simulator runs: all invariants hold")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let capacities = [48.0, 64.0, 96.0];
    let jobs: Vec<(f64, u64)> = capacities
        .iter()
        .flat_map(|&c| POISSON_SEEDS.iter().map(move |&s| (c, s)))
        .collect();

    let ((poisson, validation), rest) = rayon::join(
        || {
            rayon::join(
                || {
                    jobs.par_iter()
                        .map(|&(c, s)| (c as u64, poisson_stats(c, s)))
                        .collect::<Vec<_>>()
                },
                criterion_validation_grid,
            )
        },
        || {
            (
                criterion_table_slow_seed(),
                criterion_table_clamping(),
                criterion_three_leecher_example(),
                criterion_fig2(),
                criterion_properties(),
            )
        },
    );
    let (table, clamp, example, fig2, properties) = rest;
    let pooled = |c: u64| pool(poisson.iter().filter(move |(k, _)| *k == c).map(|(_, s)| s));
    let (p48, p64, p96) = (pooled(48), pooled(64), pooled(96));

    let results = [
        ("1 burst bounds, slow seed", table),
        ("2 burst bounds, fast-seed clamping", clamp),
        ("3 three-leecher allocation example", example),
        ("4 model vs simulation, A/B partitions", validation),
        ("5 five-leecher synchronized departure", fig2),
        (
            "6 arrival-order unfairness",
            criterion_order_unfairness(&p64, &p96),
        ),
        (
            "7 bursty departures",
            criterion_departure_bursts(&p48, &p64, &p96),
        ),
        ("8 property suites", properties),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s; Poisson criteria pool seeds {:?} x {:.0} s)",
        results.len() - failed,
        started.elapsed().as_secs_f64(),
        POISSON_SEEDS,
        POISSON_HORIZON
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
