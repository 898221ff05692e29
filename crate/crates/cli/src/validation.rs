//! Model-versus-simulation comparison on the A/B partition scenario.
//!
//! The first `n_A` leechers arrive one second apart and stay in lockstep
//! (set A). Once their piece counts agree within [`SYNC_PIECES`], the
//! remaining leechers (set B) join one after another, each arrival giving it
//! a strictly smaller piece count than everyone already present. Average
//! download rates of both sets are then measured over the interval between
//! the last arrival (plus a settling time) and the first event that breaks
//! the scenario: a departure, or a B leecher catching up with its elder.

use rayon::prelude::*;
use std::io::{self, Write};
use swarm_core::{ab_scenario, ArrivalProcess, ModelError, SwarmConfig};
use swarm_sim::{PeerId, Simulation};

/// Piece-count spread under which leechers count as holding the same content.
pub const SYNC_PIECES: u32 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationParams {
    pub seed_capacity: f64,
    pub leecher_capacity: f64,
    pub piece_count: u32,
    pub piece_size: f64,
    pub min_leechers: usize,
    pub max_leechers: usize,
    /// One simulation per seed; rates are averaged across them.
    pub seeds: Vec<u64>,
    /// Seconds after the last arrival before measuring starts.
    pub settle: f64,
    /// Windows shorter than this are reported instead of measured.
    pub min_window: f64,
    /// Fraction of the window dropped before the breaking event, where the
    /// last missing pieces can only come from a single source.
    pub tail_trim: f64,
}

impl Default for ValidationParams {
    fn default() -> Self {
        ValidationParams {
            seed_capacity: 0.25,
            leecher_capacity: 0.25,
            // Enough pieces that concurrent seed uploads rarely pick the
            // same never-replicated piece, which would waste injected content.
            piece_count: 4000,
            piece_size: 1.0,
            min_leechers: 1,
            max_leechers: 5,
            seeds: (1..=5).collect(),
            settle: 50.0,
            min_window: 200.0,
            tail_trim: 0.1,
        }
    }
}

impl ValidationParams {
    /// Time for the seed alone to push the whole content.
    pub fn lone_download_time(&self) -> f64 {
        f64::from(self.piece_count) * self.piece_size / self.seed_capacity
    }

    /// Delay between the synchronized A set and the first B arrival.
    pub fn first_b_delay(&self) -> f64 {
        self.lone_download_time() / 4.0
    }

    /// Spacing between successive B arrivals when there are `b_count` of them.
    ///
    /// A quarter of the lone download time for a single B leecher, shrinking
    /// with the B set size so the last arrival still lands well before the
    /// oldest leecher finishes.
    pub fn b_spacing(&self, b_count: usize) -> f64 {
        self.lone_download_time() / (4.0 * b_count.max(1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub rate_a: f64,
    pub rate_b: Option<f64>,
    pub window: f64,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CellError {
    #[error("measurement window {window:.1} s shorter than {min:.1} s")]
    WindowTooShort { window: f64, min: f64 },
    #[error("leechers never synchronized")]
    NeverSynchronized,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid configuration: {0}")]
    Config(#[from] swarm_core::ConfigErrors),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationCell {
    pub leechers: usize,
    pub n_a: usize,
    pub model_rate_a: f64,
    pub model_rate_b: Option<f64>,
    /// `Err` carries why the cell could not be measured.
    pub sim: Result<Measurement, CellError>,
}

fn relative_error(sim: f64, model: f64) -> f64 {
    (sim - model).abs() / sim
}

impl ValidationCell {
    pub fn error_a(&self) -> Option<f64> {
        self.sim
            .as_ref()
            .ok()
            .map(|m| relative_error(m.rate_a, self.model_rate_a))
    }

    pub fn error_b(&self) -> Option<f64> {
        let m = self.sim.as_ref().ok()?;
        Some(relative_error(m.rate_b?, self.model_rate_b?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub params: ValidationParams,
    pub cells: Vec<ValidationCell>,
}

impl ValidationReport {
    pub fn max_error_a(&self) -> Option<f64> {
        self.cells
            .iter()
            .filter_map(ValidationCell::error_a)
            .reduce(f64::max)
    }

    pub fn max_error_b(&self) -> Option<f64> {
        self.cells
            .iter()
            .filter_map(ValidationCell::error_b)
            .reduce(f64::max)
    }

    pub fn unmeasured(&self) -> impl Iterator<Item = &ValidationCell> {
        self.cells.iter().filter(|c| c.sim.is_err())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let p = &self.params;
        writeln!(
            out,
            "leechers,n_a,model_rate_a,sim_rate_a,error_a,model_rate_b,sim_rate_b,error_b,window_s,first_b_delay_s,b_spacing_s,status"
        )?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for c in &self.cells {
            let m = c.sim.as_ref().ok();
            let status = match &c.sim {
                Ok(_) => "ok".to_string(),
                Err(e) => e.to_string().replace(',', ";"),
            };
            writeln!(
                out,
                "{},{},{:.6},{},{},{},{},{},{},{:.1},{:.1},{}",
                c.leechers,
                c.n_a,
                c.model_rate_a,
                opt(m.map(|m| m.rate_a)),
                opt(c.error_a()),
                opt(c.model_rate_b),
                opt(m.and_then(|m| m.rate_b)),
                opt(c.error_b()),
                opt(m.map(|m| m.window)),
                p.first_b_delay(),
                p.b_spacing(c.leechers - c.n_a),
                status
            )?;
        }
        Ok(())
    }
}

fn config(p: &ValidationParams, arrivals: Vec<f64>, rng_seed: u64) -> SwarmConfig {
    SwarmConfig {
        seed_upload_capacity: p.seed_capacity,
        leecher_upload_capacity: p.leecher_capacity,
        piece_count: p.piece_count,
        piece_size: p.piece_size,
        arrival_process: ArrivalProcess::Schedule(arrivals),
        sim_duration: 10.0 * p.lone_download_time(),
        rng_seed,
        max_recipients: None,
        sample_interval: p.lone_download_time(),
    }
}

fn a_arrivals(n_a: usize) -> Vec<f64> {
    (0..n_a).map(|k| k as f64).collect()
}

/// First instant at which all A leechers are present with piece counts
/// within [`SYNC_PIECES`] of each other.
fn sync_time(p: &ValidationParams, n_a: usize, rng_seed: u64) -> Result<f64, CellError> {
    let mut sim = Simulation::new(config(p, a_arrivals(n_a), rng_seed))?;
    while sim.step() {
        let counts: Vec<u32> = sim.leechers().iter().map(|l| l.piece_count()).collect();
        if counts.len() == n_a {
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            if hi - lo < SYNC_PIECES {
                return Ok(sim.time());
            }
        }
    }
    Err(CellError::NeverSynchronized)
}

/// Scenario still intact: everyone present and every B leecher still more
/// than [`SYNC_PIECES`] behind the leecher that arrived just before it.
fn intact(sim: &Simulation, leechers: usize, n_a: usize) -> bool {
    if sim.leechers().len() != leechers {
        return false;
    }
    let count = |id: usize| sim.leecher(id as PeerId).map(|l| l.piece_count());
    (n_a + 1..=leechers).all(|id| match (count(id - 1), count(id)) {
        (Some(older), Some(younger)) => older >= younger + SYNC_PIECES,
        _ => false,
    })
}

fn progress(sim: &Simulation, leechers: usize) -> Vec<f64> {
    (1..=leechers)
        .map(|id| sim.progress_kb(id as PeerId).expect("leecher present"))
        .collect()
}

/// One simulation run of the (N, n_A) cell.
pub fn measure(
    p: &ValidationParams,
    leechers: usize,
    n_a: usize,
    rng_seed: u64,
) -> Result<Measurement, CellError> {
    let t_sync = sync_time(p, n_a, rng_seed)?;
    let b_count = leechers - n_a;
    let mut arrivals = a_arrivals(n_a);
    arrivals
        .extend((0..b_count).map(|k| t_sync + p.first_b_delay() + k as f64 * p.b_spacing(b_count)));
    let start = arrivals.last().copied().unwrap_or(0.0) + p.settle;

    let mut sim = Simulation::new(config(p, arrivals, rng_seed))?;
    sim.run_until(start);
    if !intact(&sim, leechers, n_a) {
        return Err(CellError::WindowTooShort {
            window: 0.0,
            min: p.min_window,
        });
    }
    let begin = progress(&sim, leechers);
    let t_begin = sim.time();

    // Snapshot before every event; rates are constant in between, so the
    // snapshot just before an event is exact.
    let mut snapshots = vec![(t_begin, begin.clone())];
    while let Some(next) = sim.next_event_time() {
        sim.run_until(next - 1e-9 * next.max(1.0));
        if sim.is_done() {
            break;
        }
        snapshots.push((sim.time(), progress(&sim, leechers)));
        if !sim.step() || !intact(&sim, leechers, n_a) {
            break;
        }
    }
    let t_break = snapshots.last().map_or(t_begin, |s| s.0);
    let cutoff = t_break - p.tail_trim * (t_break - t_begin);
    let (t_end, end) = snapshots
        .into_iter()
        .take_while(|(t, _)| *t <= cutoff)
        .last()
        .expect("first snapshot is at the window start");

    let window = t_end - t_begin;
    if window < p.min_window {
        return Err(CellError::WindowTooShort {
            window,
            min: p.min_window,
        });
    }
    let rate = |ids: std::ops::Range<usize>| {
        let n = ids.len() as f64;
        ids.map(|k| (end[k] - begin[k]) / window).sum::<f64>() / n
    };
    Ok(Measurement {
        rate_a: rate(0..n_a),
        rate_b: (b_count > 0).then(|| rate(n_a..leechers)),
        window,
    })
}

/// Averages [`measure`] over every seed; fails if any run fails.
pub fn measure_cell(
    p: &ValidationParams,
    leechers: usize,
    n_a: usize,
) -> Result<Measurement, CellError> {
    let runs = p
        .seeds
        .iter()
        .map(|&s| measure(p, leechers, n_a, s))
        .collect::<Result<Vec<_>, _>>()?;
    let n = runs.len() as f64;
    Ok(Measurement {
        rate_a: runs.iter().map(|m| m.rate_a).sum::<f64>() / n,
        rate_b: runs
            .iter()
            .map(|m| m.rate_b)
            .collect::<Option<Vec<f64>>>()
            .map(|b| b.iter().sum::<f64>() / n),
        window: runs.iter().map(|m| m.window).fold(f64::INFINITY, f64::min),
    })
}

pub fn validate_cell(
    p: &ValidationParams,
    leechers: usize,
    n_a: usize,
) -> Result<ValidationCell, ModelError> {
    let model = ab_scenario(leechers, n_a, p.seed_capacity, p.leecher_capacity)?;
    Ok(ValidationCell {
        leechers,
        n_a,
        model_rate_a: model.rate_a,
        model_rate_b: model.rate_b,
        sim: measure_cell(p, leechers, n_a),
    })
}

/// Every (N, n_A) cell with `min_leechers <= N <= max_leechers` and
/// `1 <= n_A <= N`, simulated in parallel.
pub fn run_grid(p: &ValidationParams) -> Result<ValidationReport, ModelError> {
    let grid: Vec<(usize, usize)> = (p.min_leechers.max(1)..=p.max_leechers)
        .flat_map(|n| (1..=n).map(move |a| (n, a)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(n, a)| validate_cell(p, n, a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ValidationReport {
        params: p.clone(),
        cells,
    })
}
