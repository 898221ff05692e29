#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("at least one leecher is required")]
    NoLeechers,
    #[error("{0} capacity must be positive, got {1}")]
    NonPositiveCapacity(&'static str, f64),
    #[error("recipient count n must be at least 1 when N >= 2")]
    NoRecipients,
    #[error("piece count {count} exceeds content size of {piece_count} pieces")]
    CountOutOfRange { count: u32, piece_count: u32 },
    #[error("subset A size {n_a} must be in 1..={leechers}")]
    SubsetSize { n_a: usize, leechers: usize },
    #[error("probability must lie in (0, 1), got {0}")]
    Probability(f64),
    #[error("{0} must be positive and finite, got {1}")]
    NonPositive(&'static str, f64),
}
