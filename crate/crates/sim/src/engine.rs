//! Event-driven, piece-level swarm simulator.
//!
//! Transfers are fluid at piece granularity: each (uploader, downloader) pair
//! carries at most one piece at a time, and rates stay constant between
//! events. At every event remaining bytes are decremented by `rate × elapsed`,
//! idle pairs are offered a new piece, and rates are recomputed. Events are
//! arrivals, piece completions (with departure on the last piece) and
//! periodic interest samples.

use crate::peer::{pick_piece, PeerId, PeerState, SEED};
use crate::trace::{EventKind, EventTrace, SwarmSample, TraceRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarm_core::{ArrivalProcess, Bitfield, ConfigErrors, SwarmConfig};

const ARRIVAL_STREAM: u64 = 0;
const PIECE_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub uploader: PeerId,
    pub downloader: PeerId,
    pub piece: u32,
    pub remaining_kb: f64,
    /// kB/s, valid until the next event.
    pub rate: f64,
}

/// Rates for the current transfer set, aligned index-for-index.
#[derive(Clone, Debug, PartialEq)]
pub struct RatePlan {
    pub rates: Vec<f64>,
}

/// Splits each uploader's capacity equally over its active transfers.
///
/// The seed divides `c_s` among the leechers it is serving; a leecher divides
/// `c_l` among the peers it currently has something to send. Capacity with no
/// interested recipient stays idle.
pub fn recompute_rates(transfers: &[Transfer], cfg: &SwarmConfig) -> RatePlan {
    let mut load: Vec<(PeerId, u32)> = Vec::new();
    for t in transfers {
        match load.iter_mut().find(|(id, _)| *id == t.uploader) {
            Some((_, n)) => *n += 1,
            None => load.push((t.uploader, 1)),
        }
    }
    let rates = transfers
        .iter()
        .map(|t| {
            let n = load
                .iter()
                .find(|(id, _)| *id == t.uploader)
                .map_or(1, |(_, n)| *n);
            let capacity = if t.uploader == SEED {
                cfg.seed_upload_capacity
            } else {
                cfg.leecher_upload_capacity
            };
            capacity / f64::from(n)
        })
        .collect();
    RatePlan { rates }
}

// Only one of these exists per run, so the size gap is irrelevant.
#[allow(clippy::large_enum_variant)]
enum Arrivals {
    Schedule {
        times: Vec<f64>,
        next: usize,
    },
    Poisson {
        rate: f64,
        next: f64,
        rng: ChaCha8Rng,
    },
}

impl Arrivals {
    fn new(process: &ArrivalProcess, seed: u64) -> Self {
        match process {
            ArrivalProcess::Schedule(times) => Arrivals::Schedule {
                times: times.clone(),
                next: 0,
            },
            ArrivalProcess::Poisson { rate } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(ARRIVAL_STREAM);
                let first = exponential(&mut rng, *rate);
                Arrivals::Poisson {
                    rate: *rate,
                    next: first,
                    rng,
                }
            }
        }
    }

    fn peek(&self) -> Option<f64> {
        match self {
            Arrivals::Schedule { times, next } => times.get(*next).copied(),
            Arrivals::Poisson { next, .. } => Some(*next),
        }
    }

    fn advance(&mut self) {
        match self {
            Arrivals::Schedule { next, .. } => *next += 1,
            Arrivals::Poisson { rate, next, rng } => *next += exponential(rng, *rate),
        }
    }
}

/// Inverse-CDF exponential variate.
fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

pub struct Simulation {
    cfg: SwarmConfig,
    time: f64,
    leechers: Vec<PeerState>,
    transfers: Vec<Transfer>,
    /// Replica count of each piece among leechers present (the seed's copy is not counted).
    availability: Vec<u32>,
    seed_pieces: Bitfield,
    next_id: PeerId,
    arrivals: Arrivals,
    piece_rng: ChaCha8Rng,
    next_sample: f64,
    trace: EventTrace,
    seed_uploaded_kb: f64,
    departed_downloaded_kb: f64,
    departed_uploaded_kb: f64,
    wasted_kb: f64,
    completed_pieces: u64,
    done: bool,
}

impl Simulation {
    pub fn new(cfg: SwarmConfig) -> Result<Self, ConfigErrors> {
        cfg.validate()?;
        let mut piece_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        piece_rng.set_stream(PIECE_STREAM);
        Ok(Simulation {
            time: 0.0,
            leechers: Vec::new(),
            transfers: Vec::new(),
            availability: vec![0; cfg.piece_count as usize],
            seed_pieces: Bitfield::full(cfg.piece_count),
            next_id: 1,
            arrivals: Arrivals::new(&cfg.arrival_process, cfg.rng_seed),
            piece_rng,
            next_sample: 0.0,
            trace: EventTrace {
                piece_count: cfg.piece_count,
                ..Default::default()
            },
            seed_uploaded_kb: 0.0,
            departed_downloaded_kb: 0.0,
            departed_uploaded_kb: 0.0,
            wasted_kb: 0.0,
            completed_pieces: 0,
            done: false,
            cfg,
        })
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Leechers currently present, ascending id.
    pub fn leechers(&self) -> &[PeerState] {
        &self.leechers
    }

    pub fn leecher(&self, id: PeerId) -> Option<&PeerState> {
        self.slot(id).map(|s| &self.leechers[s])
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EventTrace {
        self.trace
    }

    /// Useful bytes a leecher holds: completed pieces plus in-flight progress.
    pub fn progress_kb(&self, id: PeerId) -> Option<f64> {
        let peer = self.leecher(id)?;
        let partial: f64 = self
            .transfers
            .iter()
            .filter(|t| t.downloader == id)
            .map(|t| self.cfg.piece_size - t.remaining_kb)
            .sum();
        Some(f64::from(peer.piece_count()) * self.cfg.piece_size + partial)
    }

    pub fn total_uploaded_kb(&self) -> f64 {
        self.seed_uploaded_kb
            + self.departed_uploaded_kb
            + self.leechers.iter().map(|p| p.uploaded_kb).sum::<f64>()
    }

    pub fn total_downloaded_kb(&self) -> f64 {
        self.departed_downloaded_kb + self.leechers.iter().map(|p| p.downloaded_kb).sum::<f64>()
    }

    /// Completed pieces, in-flight progress and bytes lost to cancelled transfers.
    pub fn accounted_kb(&self) -> f64 {
        let in_flight: f64 = self
            .transfers
            .iter()
            .map(|t| self.cfg.piece_size - t.remaining_kb)
            .sum();
        self.completed_pieces as f64 * self.cfg.piece_size + in_flight + self.wasted_kb
    }

    fn slot(&self, id: PeerId) -> Option<usize> {
        self.leechers.binary_search_by_key(&id, |p| p.id).ok()
    }

    fn next_completion(&self) -> Option<f64> {
        self.transfers
            .iter()
            .filter(|t| t.rate > 0.0)
            .map(|t| self.time + (t.remaining_kb / t.rate).max(0.0))
            .min_by(f64::total_cmp)
    }

    /// Time of the next event, or `None` once the run has stopped.
    pub fn next_event_time(&self) -> Option<f64> {
        if self.done {
            return None;
        }
        let mut next = self.next_sample;
        if let Some(t) = self.arrivals.peek() {
            next = next.min(t);
        }
        if let Some(t) = self.next_completion() {
            next = next.min(t);
        }
        Some(next)
    }

    /// Processes the next event. Returns `false` once the run has stopped.
    pub fn step(&mut self) -> bool {
        if self.done {
            return false;
        }
        if self.leechers.is_empty() && self.arrivals.peek().is_none() {
            self.finish();
            return false;
        }
        let t = self.next_event_time().expect("not done");
        if t > self.cfg.sim_duration {
            self.advance_to(self.cfg.sim_duration);
            self.finish();
            return false;
        }
        self.advance_to(t);

        self.complete_transfers();
        while self.arrivals.peek().is_some_and(|a| a <= self.time) {
            self.arrivals.advance();
            self.arrive();
        }
        if self.next_sample <= self.time {
            self.sample();
            self.next_sample += self.cfg.sample_interval;
        }

        self.fill();
        self.apply_rates();
        assert!(
            self.leechers.is_empty() || !self.transfers.is_empty(),
            "deadlock at t={}: {} leechers and no transfers",
            self.time,
            self.leechers.len()
        );
        true
    }

    /// Processes every event up to `t` and moves the clock to exactly `t`.
    pub fn run_until(&mut self, t: f64) {
        while self.next_event_time().is_some_and(|next| next <= t) {
            self.step();
        }
        if !self.done && t > self.time {
            self.advance_to(t.min(self.cfg.sim_duration));
        }
    }

    pub fn run_to_end(mut self) -> EventTrace {
        while self.step() {}
        self.trace
    }

    fn finish(&mut self) {
        self.done = true;
        self.trace.end_time = self.time;
    }

    fn advance_to(&mut self, t: f64) {
        let dt = t - self.time;
        if dt > 0.0 {
            for tr in &mut self.transfers {
                let delta = tr.rate * dt;
                tr.remaining_kb -= delta;
                let d = self
                    .leechers
                    .binary_search_by_key(&tr.downloader, |p| p.id)
                    .expect("downloader present");
                self.leechers[d].downloaded_kb += delta;
                if tr.uploader == SEED {
                    self.seed_uploaded_kb += delta;
                } else {
                    let u = self
                        .leechers
                        .binary_search_by_key(&tr.uploader, |p| p.id)
                        .expect("uploader present");
                    self.leechers[u].uploaded_kb += delta;
                }
            }
        }
        self.time = t;
    }

    fn record(&mut self, kind: EventKind, peer: PeerId, piece: Option<u32>) {
        self.trace.records.push(TraceRecord {
            time: self.time,
            kind,
            peer,
            piece,
            leechers_present: self.leechers.len() as u32,
        });
    }

    fn complete_transfers(&mut self) {
        let eps = self.cfg.piece_size * 1e-9;
        let mut finished: Vec<Transfer> = Vec::new();
        self.transfers.retain(|t| {
            if t.remaining_kb <= eps {
                finished.push(t.clone());
                false
            } else {
                true
            }
        });
        if finished.is_empty() {
            return;
        }
        finished.sort_by_key(|t| (t.uploader, t.downloader));

        let mut departing = Vec::new();
        for t in finished {
            let d = self.slot(t.downloader).expect("downloader present");
            let peer = &mut self.leechers[d];
            peer.in_flight.remove(t.piece);
            assert!(
                peer.bitfield.insert(t.piece),
                "peer {} received piece {} twice",
                t.downloader,
                t.piece
            );
            // Rounding residue of the last rate interval.
            peer.downloaded_kb += t.remaining_kb;
            if t.uploader == SEED {
                self.seed_uploaded_kb += t.remaining_kb;
            } else if let Some(u) = self.slot(t.uploader) {
                self.leechers[u].uploaded_kb += t.remaining_kb;
            }
            let complete = self.leechers[d].bitfield.is_complete();
            self.availability[t.piece as usize] += 1;
            self.completed_pieces += 1;
            self.record(EventKind::PieceComplete, t.downloader, Some(t.piece));
            if complete {
                departing.push(t.downloader);
            }
        }
        departing.sort_unstable();
        for id in departing {
            self.depart(id);
        }
    }

    fn depart(&mut self, id: PeerId) {
        let slot = self.slot(id).expect("departing peer present");
        let peer = self.leechers.remove(slot);
        for p in peer.bitfield.iter() {
            self.availability[p as usize] -= 1;
        }
        let piece_size = self.cfg.piece_size;
        let mut cancelled = Vec::new();
        self.transfers.retain(|t| {
            debug_assert_ne!(t.downloader, id, "complete peer still downloading");
            if t.uploader == id {
                cancelled.push((t.downloader, t.piece, piece_size - t.remaining_kb));
                false
            } else {
                true
            }
        });
        for (downloader, piece, progress) in cancelled {
            let d = self.slot(downloader).expect("downloader present");
            self.leechers[d].in_flight.remove(piece);
            self.wasted_kb += progress;
        }
        self.departed_downloaded_kb += peer.downloaded_kb;
        self.departed_uploaded_kb += peer.uploaded_kb;
        self.record(EventKind::Departure, id, None);
    }

    fn arrive(&mut self) {
        let id = self.next_id;
        self.next_id += 1;
        self.leechers
            .push(PeerState::new(id, self.cfg.piece_count, self.time));
        self.record(EventKind::Arrival, id, None);
    }

    fn sample(&mut self) {
        let n = self.leechers.len();
        let mut interest = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    interest[i * n + j] = self.leechers[j]
                        .bitfield
                        .count_missing_from(&self.leechers[i].bitfield);
                }
            }
        }
        self.trace.samples.push(SwarmSample {
            time: self.time,
            peers: self.leechers.iter().map(|p| p.id).collect(),
            counts: self.leechers.iter().map(|p| p.piece_count()).collect(),
            interest,
        });
    }

    /// Offers a piece on every idle (uploader, downloader) pair: the seed
    /// first, then leechers in ascending id, each visiting downloaders in
    /// ascending id.
    fn fill(&mut self) {
        let n = self.leechers.len();
        let mut seed_busy = vec![false; n];
        let mut busy = vec![false; n * n];
        let mut load = vec![0usize; n];
        for t in &self.transfers {
            let d = self.slot(t.downloader).expect("downloader present");
            if t.uploader == SEED {
                seed_busy[d] = true;
            } else {
                let u = self.slot(t.uploader).expect("uploader present");
                busy[u * n + d] = true;
                load[u] += 1;
            }
        }

        for (d, busy) in seed_busy.iter().enumerate() {
            if *busy {
                continue;
            }
            let down = &self.leechers[d];
            if let Some(piece) = pick_piece(
                &self.seed_pieces,
                down,
                &self.availability,
                &mut self.piece_rng,
            ) {
                self.start(SEED, d, piece);
            }
        }

        let max = self.cfg.max_recipients.unwrap_or(usize::MAX);
        for u in 0..n {
            for d in 0..n {
                if load[u] >= max {
                    break;
                }
                if u == d || busy[u * n + d] {
                    continue;
                }
                let (up, down) = (&self.leechers[u], &self.leechers[d]);
                if let Some(piece) =
                    pick_piece(&up.bitfield, down, &self.availability, &mut self.piece_rng)
                {
                    let uploader = up.id;
                    self.start(uploader, d, piece);
                    load[u] += 1;
                }
            }
        }
    }

    fn start(&mut self, uploader: PeerId, downloader_slot: usize, piece: u32) {
        let down = &mut self.leechers[downloader_slot];
        debug_assert!(!down.bitfield.contains(piece));
        let fresh = down.in_flight.insert(piece);
        debug_assert!(fresh, "piece {piece} already in flight to {}", down.id);
        self.transfers.push(Transfer {
            uploader,
            downloader: down.id,
            piece,
            remaining_kb: self.cfg.piece_size,
            rate: 0.0,
        });
    }

    fn apply_rates(&mut self) {
        let plan = recompute_rates(&self.transfers, &self.cfg);
        for (t, r) in self.transfers.iter_mut().zip(plan.rates) {
            t.rate = r;
        }
    }
}

/// Runs a scenario to completion and returns its trace.
pub fn run(cfg: SwarmConfig) -> Result<EventTrace, ConfigErrors> {
    Ok(Simulation::new(cfg)?.run_to_end())
}
