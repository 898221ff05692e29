//! Bounds on how many leechers leave in the same burst as the leecher that
//! opened a busy period.
//!
//! The initiator downloads at the seed rate, so it stays for `T = S / c_s`.
//! Arrivals during that time are Poisson with mean `λT`; a conservative swarm
//! size is taken from the 99th percentile. The model's extreme download rates
//! for that swarm give the latest arrival instants that still finish together
//! with the initiator.

use crate::error::ModelError;
use crate::model::ab_scenario;

#[derive(Clone, Debug, PartialEq)]
pub struct BurstBounds {
    /// Expected arrivals while the initiator is present, `λT`.
    pub expected_arrivals: f64,
    /// 99th percentile of those arrivals.
    pub n99: u64,
    /// Slowest model download rate of a later arrival, kB/s.
    pub d_min: f64,
    /// Fastest model download rate of a later arrival, kB/s.
    pub d_max: f64,
    /// Subset-A size producing `d_min` (0 when no companions are expected).
    pub d_min_subset: usize,
    /// Subset-A size producing `d_max`.
    pub d_max_subset: usize,
    pub b_min: f64,
    pub b_max: f64,
    /// Initiator download time `S / c_s`, seconds.
    pub download_time: f64,
    /// Set when the seed is faster than the leechers. The upper bound is not
    /// expected to match published figures in that regime.
    pub fast_seed: bool,
}

impl BurstBounds {
    pub fn b_min_ratio(&self) -> f64 {
        ratio(self.b_min, self.expected_arrivals)
    }

    pub fn b_max_ratio(&self) -> f64 {
        ratio(self.b_max, self.expected_arrivals)
    }
}

fn ratio(x: f64, total: f64) -> f64 {
    if total > 0.0 {
        x / total
    } else {
        0.0
    }
}

/// Smallest `n` with `P[X <= n] >= p` for `X ~ Poisson(mean)`.
///
/// The pmf is accumulated in log space so large means neither overflow a
/// factorial nor underflow `exp(-mean)` on the first term.
pub fn poisson_quantile(mean: f64, p: f64) -> Result<u64, ModelError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ModelError::Probability(p));
    }
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(ModelError::NonPositive("poisson mean", mean));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let ln_mean = mean.ln();
    let mut ln_pmf = -mean;
    let mut cdf = ln_pmf.exp();
    let mut n = 0u64;
    while cdf < p {
        n += 1;
        ln_pmf += ln_mean - (n as f64).ln();
        cdf += ln_pmf.exp();
        // Past the mode the tail is monotone; rounding can leave cdf a hair below 1.
        if n as f64 > mean && ln_pmf.exp() < f64::EPSILON * cdf {
            break;
        }
    }
    Ok(n)
}

/// Lower and upper bounds on the expected number of burst companions of the
/// busy-period initiator.
///
/// `arrival_rate` in arrivals/s, `content_size` in kB, capacities in kB/s.
pub fn burst_bounds(
    arrival_rate: f64,
    content_size: f64,
    seed_capacity: f64,
    leecher_capacity: f64,
) -> Result<BurstBounds, ModelError> {
    for (name, v) in [
        ("arrival rate", arrival_rate),
        ("content size", content_size),
        ("seed capacity", seed_capacity),
        ("leecher capacity", leecher_capacity),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(ModelError::NonPositive(name, v));
        }
    }

    let download_time = content_size / seed_capacity;
    let expected_arrivals = arrival_rate * download_time;
    let n99 = poisson_quantile(expected_arrivals, 0.99)?;
    let leechers = n99 as usize + 1;

    let (mut d_min, mut d_max) = (seed_capacity, seed_capacity);
    let (mut d_min_subset, mut d_max_subset) = (0, 0);
    for n_a in 1..leechers {
        let rate_b = ab_scenario(leechers, n_a, seed_capacity, leecher_capacity)?
            .rate_b
            .expect("B is non-empty when n_a < N");
        if d_min_subset == 0 || rate_b < d_min {
            d_min = rate_b;
            d_min_subset = n_a;
        }
        if d_max_subset == 0 || rate_b > d_max {
            d_max = rate_b;
            d_max_subset = n_a;
        }
    }

    let companions = |d: f64| (arrival_rate * (download_time - content_size / d)).max(0.0);
    Ok(BurstBounds {
        expected_arrivals,
        n99,
        d_min,
        d_max,
        d_min_subset,
        d_max_subset,
        b_min: companions(d_min),
        b_max: companions(d_max),
        download_time,
        fast_seed: seed_capacity > leecher_capacity,
    })
}
