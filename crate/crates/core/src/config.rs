//! Scenario parameterization.
//!
//! Units are kB and seconds throughout. Normalized scenarios (capacities in
//! pieces per unit time) are expressed with `piece_size = 1`.

use std::fmt;

/// How leechers enter the swarm.
#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalProcess {
    /// Fixed arrival instants in seconds, sorted non-decreasing.
    Schedule(Vec<f64>),
    /// Poisson arrivals with the given rate (arrivals per second).
    Poisson { rate: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwarmConfig {
    /// Seed upload capacity, kB/s.
    pub seed_upload_capacity: f64,
    /// Upload capacity of every leecher, kB/s.
    pub leecher_upload_capacity: f64,
    pub piece_count: u32,
    /// kB per piece.
    pub piece_size: f64,
    pub arrival_process: ArrivalProcess,
    /// Simulation horizon in seconds.
    pub sim_duration: f64,
    pub rng_seed: u64,
    /// Cap on concurrent recipients per leecher uploader. `None` = unlimited.
    pub max_recipients: Option<usize>,
    /// Cadence of interest snapshots recorded in the trace, seconds.
    pub sample_interval: f64,
}

impl SwarmConfig {
    pub const DEFAULT_SAMPLE_INTERVAL: f64 = 10.0;

    /// Content size in kB.
    pub fn content_size(&self) -> f64 {
        f64::from(self.piece_count) * self.piece_size
    }

    /// Time for a lone leecher to download the content from the seed.
    pub fn lone_download_time(&self) -> f64 {
        self.content_size() / self.seed_upload_capacity
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errors = Vec::new();
        let mut push = |field: &'static str, message: &str| {
            errors.push(ConfigError {
                field,
                message: message.to_string(),
            })
        };

        if !(self.seed_upload_capacity > 0.0) || !self.seed_upload_capacity.is_finite() {
            push("seed_upload_capacity", "seed capacity must be positive");
        }
        if !(self.leecher_upload_capacity > 0.0) || !self.leecher_upload_capacity.is_finite() {
            push(
                "leecher_upload_capacity",
                "leecher capacity must be positive",
            );
        }
        if self.piece_count < 1 {
            push("piece_count", "piece count must be at least 1");
        }
        if !(self.piece_size > 0.0) || !self.piece_size.is_finite() {
            push("piece_size", "piece size must be positive");
        }
        if !(self.sim_duration > 0.0) {
            push("sim_duration", "simulation duration must be positive");
        }
        if !(self.sample_interval > 0.0) || !self.sample_interval.is_finite() {
            push("sample_interval", "sample interval must be positive");
        }
        if self.max_recipients == Some(0) {
            push("max_recipients", "max recipients must be at least 1");
        }
        match &self.arrival_process {
            ArrivalProcess::Schedule(times) => {
                if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                    push("schedule", "arrival times must be finite and non-negative");
                }
                if times.windows(2).any(|w| w[1] < w[0]) {
                    push("schedule", "schedule not sorted");
                }
            }
            ArrivalProcess::Poisson { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    push("poisson_rate", "poisson rate must be positive");
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errors))
        }
    }
}

/// Free-function form of [`SwarmConfig::validate`].
pub fn validate_config(cfg: &SwarmConfig) -> Result<(), ConfigErrors> {
    cfg.validate()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every invariant violation found in a config.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl ConfigErrors {
    pub fn iter(&self) -> impl Iterator<Item = &ConfigError> {
        self.0.iter()
    }

    pub fn has(&self, message: &str) -> bool {
        self.0.iter().any(|e| e.message == message)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}
