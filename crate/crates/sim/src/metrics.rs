//! Statistics over an [`EventTrace`], each exportable as a CSV table.

use crate::peer::PeerId;
use crate::trace::{EventKind, EventTrace};
use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

/// Default gap, in seconds, that still counts as the same departure burst.
pub const DEFAULT_BURST_WINDOW: f64 = 10.0;
/// Default number of missing pieces below which two leechers count as synchronized.
pub const DEFAULT_SYNC_THRESHOLD: u32 = 50;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no download completed in the trace")]
    NoCompletedDownloads,
}

/// Maximal interval with at least one leecher present.
#[derive(Clone, Debug, PartialEq)]
pub struct BusyPeriod {
    pub start: f64,
    /// Trace end time when the period is still open.
    pub end: f64,
    /// Arrivals in order; the first is the period's initiator.
    pub members: Vec<PeerId>,
    /// Whether the swarm emptied before the trace ended.
    pub complete: bool,
}

pub fn busy_periods(trace: &EventTrace) -> Vec<BusyPeriod> {
    let mut periods = Vec::new();
    let mut open: Option<BusyPeriod> = None;
    for r in &trace.records {
        match r.kind {
            EventKind::Arrival => open
                .get_or_insert_with(|| BusyPeriod {
                    start: r.time,
                    end: r.time,
                    members: Vec::new(),
                    complete: false,
                })
                .members
                .push(r.peer),
            EventKind::Departure if r.leechers_present == 0 => {
                if let Some(mut p) = open.take() {
                    p.end = r.time;
                    p.complete = true;
                    periods.push(p);
                }
            }
            _ => {}
        }
    }
    if let Some(mut p) = open {
        p.end = trace.end_time;
        periods.push(p);
    }
    periods
}

/// Time-average number of leechers over `[0, end_time]`.
pub fn mean_swarm_size(trace: &EventTrace) -> f64 {
    if trace.end_time <= 0.0 {
        return 0.0;
    }
    let mut area = 0.0;
    let (mut last_t, mut present) = (0.0, 0u32);
    for r in &trace.records {
        area += f64::from(present) * (r.time - last_t);
        last_t = r.time;
        present = r.leechers_present;
    }
    area += f64::from(present) * (trace.end_time - last_t);
    area / trace.end_time
}

struct Lifetimes {
    arrival: HashMap<PeerId, f64>,
    departure: HashMap<PeerId, f64>,
}

impl Lifetimes {
    fn of(trace: &EventTrace) -> Self {
        let mut arrival = HashMap::new();
        let mut departure = HashMap::new();
        for r in &trace.records {
            match r.kind {
                EventKind::Arrival => {
                    arrival.insert(r.peer, r.time);
                }
                EventKind::Departure => {
                    departure.insert(r.peer, r.time);
                }
                EventKind::PieceComplete => {}
            }
        }
        Lifetimes { arrival, departure }
    }

    fn download_time(&self, id: PeerId) -> Option<f64> {
        Some(self.departure.get(&id)? - self.arrival.get(&id)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderStat {
    pub mean_download_time: f64,
    pub samples: usize,
}

/// Mean download time by arrival position within the busy period (1 = initiator).
///
/// Only periods that ended inside the trace contribute, so the tail of a
/// truncated run does not bias early positions toward fast finishers.
pub fn download_time_by_order(trace: &EventTrace) -> BTreeMap<usize, OrderStat> {
    let life = Lifetimes::of(trace);
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for period in busy_periods(trace).iter().filter(|p| p.complete) {
        for (k, &id) in period.members.iter().enumerate() {
            if let Some(dt) = life.download_time(id) {
                let e = sums.entry(k + 1).or_default();
                e.0 += dt;
                e.1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|(order, (sum, n))| {
            (
                order,
                OrderStat {
                    mean_download_time: sum / n as f64,
                    samples: n,
                },
            )
        })
        .collect()
}

/// Gaps between consecutive departures of the same busy period.
pub fn interdeparture_gaps(trace: &EventTrace) -> Vec<f64> {
    let mut gaps = Vec::new();
    let mut last: Option<f64> = None;
    for r in &trace.records {
        match r.kind {
            EventKind::Departure => {
                if let Some(prev) = last {
                    gaps.push(r.time - prev);
                }
                last = (r.leechers_present > 0).then_some(r.time);
            }
            EventKind::Arrival if r.leechers_present == 1 => last = None,
            _ => {}
        }
    }
    gaps
}

/// Empirical complementary CDF, `P[X >= x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ccdf {
    sorted: Vec<f64>,
}

impl Ccdf {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Ccdf { sorted: values }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of values `>= x`.
    pub fn at(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        let below = self.sorted.partition_point(|&v| v < x);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    /// Fraction of values `<= x`.
    pub fn fraction_at_most(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// One `(value, P[X >= value])` point per distinct value, ascending.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.sorted.iter().enumerate() {
            if out.last().is_none_or(|&(last, _)| last != v) {
                out.push((v, (self.sorted.len() - i) as f64 / n));
            }
        }
        out
    }
}

pub fn interdeparture_ccdf(trace: &EventTrace) -> Vec<(f64, f64)> {
    Ccdf::new(interdeparture_gaps(trace)).points()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyncPoint {
    pub time: f64,
    pub present: usize,
    pub synchronized: usize,
}

/// Counts leechers interested in at most `threshold` pieces of every other
/// leecher present. Samples with fewer than two leechers are skipped.
pub fn synchronized_series(trace: &EventTrace, threshold: u32) -> Vec<SyncPoint> {
    trace
        .samples
        .iter()
        .filter(|s| s.peers.len() >= 2)
        .map(|s| {
            let n = s.peers.len();
            let synchronized = (0..n)
                .filter(|&i| (0..n).all(|j| i == j || s.interest(i, j) <= threshold))
                .count();
            SyncPoint {
                time: s.time,
                present: n,
                synchronized,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyncSummary {
    pub mean_present: f64,
    pub mean_synchronized: f64,
}

/// Averages over every sample; samples with fewer than two leechers count as
/// zero synchronized.
pub fn sync_summary(trace: &EventTrace, threshold: u32) -> SyncSummary {
    let total = trace.samples.len();
    if total == 0 {
        return SyncSummary {
            mean_present: 0.0,
            mean_synchronized: 0.0,
        };
    }
    let present: usize = trace.samples.iter().map(|s| s.peers.len()).sum();
    let synced: usize = synchronized_series(trace, threshold)
        .iter()
        .map(|p| p.synchronized)
        .sum();
    SyncSummary {
        mean_present: present as f64 / total as f64,
        mean_synchronized: synced as f64 / total as f64,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistributionSummary {
    pub min: f64,
    pub p25: f64,
    pub mean: f64,
    pub p75: f64,
    pub max: f64,
    pub samples: usize,
}

/// Linear interpolation between closest ranks.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Result<DistributionSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::NoCompletedDownloads);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DistributionSummary {
        min: sorted[0],
        p25: quantile(&sorted, 0.25),
        mean: (sorted.iter().sum::<f64>() / sorted.len() as f64)
            .clamp(sorted[0], sorted[sorted.len() - 1]),
        p75: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        samples: sorted.len(),
    })
}

/// Download times of every leecher that completed, in arrival order.
pub fn download_times(trace: &EventTrace) -> Vec<f64> {
    let life = Lifetimes::of(trace);
    trace
        .arrivals()
        .filter_map(|r| life.download_time(r.peer))
        .collect()
}

pub fn download_time_summary(trace: &EventTrace) -> Result<DistributionSummary, MetricsError> {
    summarize(&download_times(trace))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BurstSample {
    /// Index into [`busy_periods`].
    pub period: usize,
    /// Other leechers in the initiator's departure burst.
    pub companions: usize,
}

/// Size of the initiator's departure burst in each period, minus the
/// initiator. A burst is a maximal run of departures whose successive gaps
/// are at most `window` seconds.
pub fn burst_sizes(trace: &EventTrace, window: f64) -> Vec<BurstSample> {
    let life = Lifetimes::of(trace);
    busy_periods(trace)
        .iter()
        .enumerate()
        .filter_map(|(idx, p)| {
            let initiator = *p.members.first()?;
            let f_time = *life.departure.get(&initiator)?;
            let mut times: Vec<f64> = p
                .members
                .iter()
                .filter_map(|id| life.departure.get(id).copied())
                .collect();
            times.sort_by(f64::total_cmp);
            let at = times.iter().position(|&t| t == f_time)?;
            let mut lo = at;
            while lo > 0 && times[lo] - times[lo - 1] <= window {
                lo -= 1;
            }
            let mut hi = at;
            while hi + 1 < times.len() && times[hi + 1] - times[hi] <= window {
                hi += 1;
            }
            Some(BurstSample {
                period: idx,
                companions: hi - lo,
            })
        })
        .collect()
}

pub fn write_busy_periods_csv<W: Write>(mut out: W, periods: &[BusyPeriod]) -> io::Result<()> {
    writeln!(out, "period,start_s,end_s,members,complete")?;
    for (i, p) in periods.iter().enumerate() {
        writeln!(
            out,
            "{},{:.6},{:.6},{},{}",
            i,
            p.start,
            p.end,
            p.members.len(),
            p.complete
        )?;
    }
    Ok(())
}

pub fn write_download_by_order_csv<W: Write>(
    mut out: W,
    by_order: &BTreeMap<usize, OrderStat>,
) -> io::Result<()> {
    writeln!(out, "order,mean_download_time_s,samples")?;
    for (order, s) in by_order {
        writeln!(out, "{},{:.6},{}", order, s.mean_download_time, s.samples)?;
    }
    Ok(())
}

pub fn write_ccdf_csv<W: Write>(mut out: W, points: &[(f64, f64)]) -> io::Result<()> {
    writeln!(out, "gap_s,ccdf")?;
    for (x, p) in points {
        writeln!(out, "{x:.6},{p:.6}")?;
    }
    Ok(())
}

pub fn write_sync_csv<W: Write>(mut out: W, series: &[SyncPoint]) -> io::Result<()> {
    writeln!(out, "time_s,leechers_present,synchronized")?;
    for s in series {
        writeln!(out, "{:.6},{},{}", s.time, s.present, s.synchronized)?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut out: W, s: &DistributionSummary) -> io::Result<()> {
    writeln!(out, "min_s,p25_s,mean_s,p75_s,max_s,samples")?;
    writeln!(
        out,
        "{:.6},{:.6},{:.6},{:.6},{:.6},{}",
        s.min, s.p25, s.mean, s.p75, s.max, s.samples
    )
}

pub fn write_bursts_csv<W: Write>(mut out: W, bursts: &[BurstSample]) -> io::Result<()> {
    writeln!(out, "period,companions")?;
    for b in bursts {
        writeln!(out, "{},{}", b.period, b.companions)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{SwarmSample, TraceRecord};

    /// Builds a trace from (time, kind, peer) with leecher counts derived.
    fn trace_of(events: &[(f64, EventKind, PeerId)], end: f64) -> EventTrace {
        let mut present = 0u32;
        let records = events
            .iter()
            .map(|&(time, kind, peer)| {
                match kind {
                    EventKind::Arrival => present += 1,
                    EventKind::Departure => present -= 1,
                    EventKind::PieceComplete => {}
                }
                TraceRecord {
                    time,
                    kind,
                    peer,
                    piece: None,
                    leechers_present: present,
                }
            })
            .collect();
        EventTrace {
            records,
            end_time: end,
            ..Default::default()
        }
    }

    use EventKind::{Arrival as A, Departure as D};

    #[test]
    fn one_period() {
        let t = trace_of(&[(0.0, A, 1), (40.0, D, 1)], 40.0);
        let p = busy_periods(&t);
        assert_eq!(p.len(), 1);
        assert_eq!(
            (p[0].start, p[0].end, p[0].members.clone(), p[0].complete),
            (0.0, 40.0, vec![1], true)
        );
        let by = download_time_by_order(&t);
        assert_eq!(
            by[&1],
            OrderStat {
                mean_download_time: 40.0,
                samples: 1
            }
        );
        assert!((mean_swarm_size(&t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swarm_empties_between_periods() {
        let t = trace_of(
            &[(0.0, A, 1), (40.0, D, 1), (100.0, A, 2), (150.0, D, 2)],
            200.0,
        );
        let p = busy_periods(&t);
        assert_eq!(p.len(), 2);
        assert_eq!(p[1].members, vec![2]);
        assert!((mean_swarm_size(&t) - 90.0 / 200.0).abs() < 1e-12);
        assert!(interdeparture_ccdf(&t).is_empty());
    }

    #[test]
    fn open_period_and_active_peers_excluded() {
        let t = trace_of(&[(0.0, A, 1), (10.0, A, 2), (40.0, D, 1)], 100.0);
        let p = busy_periods(&t);
        assert_eq!(p.len(), 1);
        assert!(!p[0].complete);
        assert_eq!(p[0].end, 100.0);
        assert!(download_time_by_order(&t).is_empty());
        assert_eq!(download_times(&t), vec![40.0]);
    }

    #[test]
    fn gaps_within_period_only() {
        let t = trace_of(
            &[
                (0.0, A, 1),
                (1.0, A, 2),
                (2.0, A, 3),
                (100.0, D, 1),
                (102.0, D, 2),
                (200.0, D, 3),
                (300.0, A, 4),
                (350.0, D, 4),
            ],
            400.0,
        );
        let mut gaps = interdeparture_gaps(&t);
        gaps.sort_by(f64::total_cmp);
        assert_eq!(gaps, vec![2.0, 98.0]);
        let ccdf = Ccdf::new(gaps);
        assert_eq!(ccdf.at(50.0), 0.5);
        assert_eq!(ccdf.at(0.0), 1.0);
        assert_eq!(ccdf.at(99.0), 0.0);
        assert_eq!(ccdf.fraction_at_most(2.0), 0.5);
        assert_eq!(interdeparture_ccdf(&t), vec![(2.0, 1.0), (98.0, 0.5)]);
    }

    #[test]
    fn bursts_around_initiator() {
        let t = trace_of(
            &[
                (0.0, A, 1),
                (5.0, A, 2),
                (6.0, A, 3),
                (1000.0, D, 1),
                (1003.0, D, 2),
                (1500.0, D, 3),
            ],
            2000.0,
        );
        assert_eq!(
            burst_sizes(&t, 10.0),
            vec![BurstSample {
                period: 0,
                companions: 1
            }]
        );
        let single = trace_of(&[(0.0, A, 1), (40.0, D, 1)], 50.0);
        assert_eq!(burst_sizes(&single, 10.0)[0].companions, 0);
    }

    #[test]
    fn burst_extends_before_initiator() {
        let t = trace_of(
            &[(0.0, A, 1), (5.0, A, 2), (995.0, D, 2), (1000.0, D, 1)],
            2000.0,
        );
        assert_eq!(burst_sizes(&t, 10.0)[0].companions, 1);
    }

    fn sample(interest: Vec<u32>, n: usize) -> SwarmSample {
        SwarmSample {
            time: 0.0,
            peers: (1..=n as u32).collect(),
            counts: vec![0; n],
            interest,
        }
    }

    #[test]
    fn synchronization() {
        let mut t = EventTrace::default();
        // Identical bitfields.
        t.samples.push(sample(vec![0, 0, 0, 0], 2));
        // Newcomer (row 1) lacks 500 pieces of the old leecher.
        t.samples.push(sample(vec![0, 0, 500, 0], 2));
        // Lone leecher: skipped.
        t.samples.push(sample(vec![0], 1));
        let s = synchronized_series(&t, 50);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].synchronized, 2);
        assert_eq!(s[1].synchronized, 1);
        let summary = sync_summary(&t, 50);
        assert!((summary.mean_present - 5.0 / 3.0).abs() < 1e-12);
        assert!((summary.mean_synchronized - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summaries() {
        let s = summarize(&[5.0; 4]).unwrap();
        assert_eq!(
            (s.min, s.p25, s.mean, s.p75, s.max),
            (5.0, 5.0, 5.0, 5.0, 5.0)
        );
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(
            (s.min, s.p25, s.mean, s.p75, s.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        assert_eq!(summarize(&[]), Err(MetricsError::NoCompletedDownloads));
        assert_eq!(
            download_time_summary(&EventTrace::default()),
            Err(MetricsError::NoCompletedDownloads)
        );
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_download_by_order_csv(
            &mut buf,
            &BTreeMap::from([(
                1,
                OrderStat {
                    mean_download_time: 4000.0,
                    samples: 3,
                },
            )]),
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "order,mean_download_time_s,samples\n1,4000.000000,3\n"
        );
    }
}
