//! Interest-constrained fluid model of upload allocation in an unpopular swarm.
//!
//! Each leecher is a multi-queue processor-sharing server with one queue per
//! neighbor. Whether a leecher has anything to offer another is inferred from
//! piece counts alone: an older leecher (more pieces) always has interesting
//! pieces, while a younger one can only relay what it receives from the seed
//! and from leechers older than the recipient. Capacity is then divided by
//! progressive filling, processed in increasing order of the potential rates.

use crate::error::ModelError;
use std::cmp::Ordering;

/// Per-leecher piece counts, indexed by arrival order (index 0 = oldest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PieceCountVector(Vec<u32>);

impl PieceCountVector {
    pub fn new(counts: Vec<u32>) -> Self {
        PieceCountVector(counts)
    }

    /// Checks `0 <= b_i <= piece_count` for every leecher.
    pub fn bounded(counts: Vec<u32>, piece_count: u32) -> Result<Self, ModelError> {
        if let Some(&b) = counts.iter().find(|&&b| b > piece_count) {
            return Err(ModelError::CountOutOfRange {
                count: b,
                piece_count,
            });
        }
        Ok(PieceCountVector(counts))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }
}

impl From<Vec<u32>> for PieceCountVector {
    fn from(v: Vec<u32>) -> Self {
        PieceCountVector(v)
    }
}

/// Pairwise leecher upload rates plus the per-leecher seed share, kB/s.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    size: usize,
    rates: Vec<f64>,
    seed_share: f64,
}

impl RateMatrix {
    fn zeros(size: usize, seed_share: f64) -> Self {
        RateMatrix {
            size,
            rates: vec![0.0; size * size],
            seed_share,
        }
    }

    /// Number of leechers N.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Upload rate from leecher `i` to leecher `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.size + j]
    }

    pub fn seed_share(&self) -> f64 {
        self.seed_share
    }

    /// Total upload of leecher `i`.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.rates[i * self.size..(i + 1) * self.size].iter().sum()
    }

    /// Total received by leecher `j` from other leechers.
    pub fn column_sum(&self, j: usize) -> f64 {
        (0..self.size).map(|i| self.get(i, j)).sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rates.chunks(self.size.max(1)).take(self.size)
    }
}

/// Potential upload rate `g_ij` ignoring capacity limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialRate {
    /// The uploader owns strictly more pieces; its queue toward the recipient
    /// is always backlogged.
    Unbounded,
    Limited(f64),
}

impl PotentialRate {
    pub fn min_with(self, cap: f64) -> f64 {
        match self {
            PotentialRate::Unbounded => cap,
            PotentialRate::Limited(g) => g.min(cap),
        }
    }

    pub fn limited(self) -> Option<f64> {
        match self {
            PotentialRate::Unbounded => None,
            PotentialRate::Limited(g) => Some(g),
        }
    }
}

/// A rate matrix under construction. Entries not yet computed are `None`.
#[derive(Clone, Debug)]
pub struct PartialRates {
    size: usize,
    entries: Vec<Option<f64>>,
}

impl PartialRates {
    pub fn new(size: usize) -> Self {
        let mut entries = vec![None; size * size];
        for i in 0..size {
            entries[i * size + i] = Some(0.0);
        }
        PartialRates { size, entries }
    }

    pub fn set(&mut self, i: usize, j: usize, rate: f64) {
        self.entries[i * self.size + j] = Some(rate);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i * self.size + j]
    }

    fn computed(&self, i: usize, j: usize) -> f64 {
        let v = self.get(i, j);
        debug_assert!(v.is_some(), "u[{i}][{j}] read before it was computed");
        v.unwrap_or(0.0)
    }
}

/// Rate at which leecher `i` could upload to leecher `j` with unlimited capacity.
///
/// If `i` has more pieces than `j` the queue is backlogged. Otherwise `i` can
/// only forward what it receives from the seed plus what it receives from
/// leechers holding more pieces than `j`; those `u_ki` must already be in
/// `partial`.
pub fn potential_rate(
    i: usize,
    j: usize,
    counts: &PieceCountVector,
    partial: &PartialRates,
    seed_capacity: f64,
) -> PotentialRate {
    let b = counts.as_slice();
    if b[i] > b[j] {
        return PotentialRate::Unbounded;
    }
    let relayed: f64 = (0..b.len())
        .filter(|&k| b[k] > b[j])
        .map(|k| partial.computed(k, i))
        .sum();
    PotentialRate::Limited(seed_capacity / b.len() as f64 + relayed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationInput {
    pub counts: PieceCountVector,
    /// c_s, kB/s.
    pub seed_capacity: f64,
    /// c_l, kB/s.
    pub leecher_capacity: f64,
    /// Recipients sharing each uploader (n). `None` means N - 1.
    pub recipients: Option<usize>,
}

impl AllocationInput {
    pub fn new(
        counts: impl Into<PieceCountVector>,
        seed_capacity: f64,
        leecher_capacity: f64,
    ) -> Self {
        AllocationInput {
            counts: counts.into(),
            seed_capacity,
            leecher_capacity,
            recipients: None,
        }
    }

    pub fn with_recipients(mut self, n: usize) -> Self {
        self.recipients = Some(n);
        self
    }

    fn recipients(&self) -> usize {
        self.recipients
            .unwrap_or(self.counts.len().saturating_sub(1))
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.counts.is_empty() {
            return Err(ModelError::NoLeechers);
        }
        if !(self.seed_capacity > 0.0) || !self.seed_capacity.is_finite() {
            return Err(ModelError::NonPositiveCapacity("seed", self.seed_capacity));
        }
        if !(self.leecher_capacity > 0.0) || !self.leecher_capacity.is_finite() {
            return Err(ModelError::NonPositiveCapacity(
                "leecher",
                self.leecher_capacity,
            ));
        }
        if self.counts.len() >= 2 && self.recipients() == 0 {
            return Err(ModelError::NoRecipients);
        }
        Ok(())
    }
}

/// Indices sorted by decreasing piece count, ties by ascending arrival index.
fn by_decreasing_count(b: &[u32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..b.len()).collect();
    order.sort_by(|&x, &y| match b[y].cmp(&b[x]) {
        Ordering::Equal => x.cmp(&y),
        o => o,
    });
    order
}

/// Computes the full upload-rate matrix by progressive filling.
///
/// Uploaders are processed in decreasing piece count (arrival order when
/// counts are non-increasing), so every `u_ki` a potential rate depends on is
/// available when needed. Within a row, recipients go in decreasing piece
/// count; equal-count recipients do not see each other's allocation.
pub fn allocate(input: &AllocationInput) -> Result<RateMatrix, ModelError> {
    input.check()?;
    let b = input.counts.as_slice();
    let size = b.len();
    let seed_share = input.seed_capacity / size as f64;
    let n = input.recipients() as f64;
    let c_l = input.leecher_capacity;

    let order = by_decreasing_count(b);
    let mut partial = PartialRates::new(size);

    for &i in &order {
        let mut row_used = 0.0;
        for &j in order.iter().filter(|&&j| j != i) {
            let g = potential_rate(i, j, &input.counts, &partial, input.seed_capacity);
            let mut spent = 0.0;
            let mut ahead = 0usize;
            for k in (0..size).filter(|&k| b[k] > b[j]) {
                if k != i {
                    spent += partial.computed(i, k);
                    ahead += 1;
                }
            }
            let sharers = n - ahead as f64;
            let share = if sharers <= 0.0 {
                0.0
            } else {
                (c_l - spent).max(0.0) / sharers
            };
            // Only binds when n < N - 1.
            let u = g.min_with(share).min((c_l - row_used).max(0.0));
            partial.set(i, j, u);
            row_used += u;
        }
    }

    let mut matrix = RateMatrix::zeros(size, seed_share);
    for i in 0..size {
        for j in 0..size {
            matrix.rates[i * size + j] = partial.computed(i, j);
        }
    }
    Ok(matrix)
}

/// Download rate of each leecher: seed share plus the column sum.
pub fn download_rates(matrix: &RateMatrix) -> Vec<f64> {
    (0..matrix.size())
        .map(|j| matrix.seed_share() + matrix.column_sum(j))
        .collect()
}

/// Mean subset rates when `n_a` leechers share the oldest piece count (A)
/// and the rest hold strictly fewer, all distinct (B).
#[derive(Clone, Debug, PartialEq)]
pub struct AbScenarioResult {
    pub rate_a: f64,
    /// `None` when B is empty (`n_a == N`).
    pub rate_b: Option<f64>,
    pub matrix: RateMatrix,
}

/// Piece counts for an A/B partition: `n_a` equal maxima followed by a
/// strictly decreasing tail. Only the ordering pattern matters to the model.
pub fn ab_counts(leechers: usize, n_a: usize) -> Vec<u32> {
    let top = leechers as u32;
    (0..leechers)
        .map(|k| {
            if k < n_a {
                top
            } else {
                top - (k + 1 - n_a) as u32
            }
        })
        .collect()
}

pub fn ab_scenario(
    leechers: usize,
    n_a: usize,
    seed_capacity: f64,
    leecher_capacity: f64,
) -> Result<AbScenarioResult, ModelError> {
    if n_a == 0 || n_a > leechers {
        return Err(ModelError::SubsetSize { n_a, leechers });
    }
    let input = AllocationInput::new(ab_counts(leechers, n_a), seed_capacity, leecher_capacity);
    let matrix = allocate(&input)?;
    let rates = download_rates(&matrix);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (a, b) = rates.split_at(n_a);
    Ok(AbScenarioResult {
        rate_a: mean(a),
        rate_b: (!b.is_empty()).then(|| mean(b)),
        matrix,
    })
}
