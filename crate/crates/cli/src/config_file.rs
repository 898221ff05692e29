//! Flat `key = value` scenario files.
//!
//! ```text
//! seed_upload_capacity = 64
//! leecher_upload_capacity = 64
//! piece_count = 1000
//! piece_size = 256
//! sim_duration = 1000000
//! rng_seed = 7
//!
//! [arrivals]
//! poisson_rate = 0.001
//! ```
//!
//! The `[arrivals]` section holds either `poisson_rate` or `schedule`, a
//! comma-separated list of arrival instants in seconds. `#` starts a comment.

use std::fmt::Write as _;
use std::str::FromStr;
use swarm_core::{ArrivalProcess, ConfigErrors, SwarmConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("[arrivals] must set exactly one of `poisson_rate` or `schedule`")]
    Arrivals,
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ConfigErrors),
}

#[derive(Default)]
struct Raw {
    seed_upload_capacity: Option<f64>,
    leecher_upload_capacity: Option<f64>,
    piece_count: Option<u32>,
    piece_size: Option<f64>,
    sim_duration: Option<f64>,
    rng_seed: Option<u64>,
    max_recipients: Option<usize>,
    sample_interval: Option<f64>,
    poisson_rate: Option<f64>,
    schedule: Option<Vec<f64>>,
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigFileError> {
    value.parse().map_err(|_| ConfigFileError::Syntax {
        line,
        message: format!("invalid value `{value}` for `{key}`"),
    })
}

pub fn parse(text: &str) -> Result<SwarmConfig, ConfigFileError> {
    let mut raw = Raw::default();
    let mut in_arrivals = false;

    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let content = full.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            match content {
                "[arrivals]" => in_arrivals = true,
                other => {
                    return Err(ConfigFileError::Syntax {
                        line,
                        message: format!("unknown section {other}"),
                    })
                }
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigFileError::Syntax {
                line,
                message: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        match (in_arrivals, key) {
            (false, "seed_upload_capacity") => {
                raw.seed_upload_capacity = Some(parse_value(line, key, value)?)
            }
            (false, "leecher_upload_capacity") => {
                raw.leecher_upload_capacity = Some(parse_value(line, key, value)?)
            }
            (false, "piece_count") => raw.piece_count = Some(parse_value(line, key, value)?),
            (false, "piece_size") => raw.piece_size = Some(parse_value(line, key, value)?),
            (false, "sim_duration") => raw.sim_duration = Some(parse_value(line, key, value)?),
            (false, "rng_seed") => raw.rng_seed = Some(parse_value(line, key, value)?),
            (false, "max_recipients") => raw.max_recipients = Some(parse_value(line, key, value)?),
            (false, "sample_interval") => {
                raw.sample_interval = Some(parse_value(line, key, value)?)
            }
            (true, "poisson_rate") => raw.poisson_rate = Some(parse_value(line, key, value)?),
            (true, "schedule") => {
                let times = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(line, key, s))
                    .collect::<Result<Vec<f64>, _>>()?;
                raw.schedule = Some(times);
            }
            _ => {
                return Err(ConfigFileError::Syntax {
                    line,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
    }

    let arrival_process = match (raw.poisson_rate, raw.schedule) {
        (Some(rate), None) => ArrivalProcess::Poisson { rate },
        (None, Some(times)) => ArrivalProcess::Schedule(times),
        _ => return Err(ConfigFileError::Arrivals),
    };
    let cfg = SwarmConfig {
        seed_upload_capacity: raw
            .seed_upload_capacity
            .ok_or(ConfigFileError::Missing("seed_upload_capacity"))?,
        leecher_upload_capacity: raw
            .leecher_upload_capacity
            .ok_or(ConfigFileError::Missing("leecher_upload_capacity"))?,
        piece_count: raw
            .piece_count
            .ok_or(ConfigFileError::Missing("piece_count"))?,
        piece_size: raw
            .piece_size
            .ok_or(ConfigFileError::Missing("piece_size"))?,
        arrival_process,
        sim_duration: raw
            .sim_duration
            .ok_or(ConfigFileError::Missing("sim_duration"))?,
        rng_seed: raw.rng_seed.ok_or(ConfigFileError::Missing("rng_seed"))?,
        max_recipients: raw.max_recipients,
        sample_interval: raw
            .sample_interval
            .unwrap_or(SwarmConfig::DEFAULT_SAMPLE_INTERVAL),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Renders a config that [`parse`] reads back identically. Floats use the
/// shortest representation that round-trips.
pub fn render(cfg: &SwarmConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed_upload_capacity = {}", cfg.seed_upload_capacity);
    let _ = writeln!(
        s,
        "leecher_upload_capacity = {}",
        cfg.leecher_upload_capacity
    );
    let _ = writeln!(s, "piece_count = {}", cfg.piece_count);
    let _ = writeln!(s, "piece_size = {}", cfg.piece_size);
    let _ = writeln!(s, "sim_duration = {}", cfg.sim_duration);
    let _ = writeln!(s, "rng_seed = {}", cfg.rng_seed);
    if let Some(m) = cfg.max_recipients {
        let _ = writeln!(s, "max_recipients = {m}");
    }
    let _ = writeln!(s, "sample_interval = {}", cfg.sample_interval);
    s.push_str("\n[arrivals]\n");
    match &cfg.arrival_process {
        ArrivalProcess::Poisson { rate } => {
            let _ = writeln!(s, "poisson_rate = {rate}");
        }
        ArrivalProcess::Schedule(times) => {
            let list: Vec<String> = times.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "schedule = {}", list.join(", "));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_poisson_file() {
        let cfg = parse(
            "# reference default\nseed_upload_capacity = 64\nleecher_upload_capacity = 64\npiece_count = 1000\n\
             piece_size = 256\nsim_duration = 1e6\nrng_seed = 7\n\n[arrivals]\npoisson_rate = 0.001 # 1/1000\n",
        )
        .unwrap();
        assert_eq!(cfg.arrival_process, ArrivalProcess::Poisson { rate: 0.001 });
        assert_eq!(cfg.sim_duration, 1e6);
        assert_eq!(cfg.sample_interval, 10.0);
        assert_eq!(cfg.max_recipients, None);
    }

    #[test]
    fn parses_schedule() {
        let cfg = parse(
            "seed_upload_capacity=1\nleecher_upload_capacity=1\npiece_count=3\npiece_size=1\nsim_duration=100\n\
             rng_seed=0\nmax_recipients = 2\n[arrivals]\nschedule = 10, 250,490\n",
        )
        .unwrap();
        assert_eq!(
            cfg.arrival_process,
            ArrivalProcess::Schedule(vec![10.0, 250.0, 490.0])
        );
        assert_eq!(cfg.max_recipients, Some(2));
    }

    #[test]
    fn reports_errors() {
        assert!(matches!(
            parse("bogus"),
            Err(ConfigFileError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse("piece_count = x"),
            Err(ConfigFileError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse("[other]"),
            Err(ConfigFileError::Syntax { .. })
        ));
        assert!(matches!(
            parse("piece_count = 1\n[arrivals]\npoisson_rate = 1\nschedule = 1"),
            Err(ConfigFileError::Arrivals)
        ));
        assert!(matches!(
            parse("piece_count = 1\n[arrivals]\npoisson_rate = 1"),
            Err(ConfigFileError::Missing("seed_upload_capacity"))
        ));
        let err = parse(
            "seed_upload_capacity=0\nleecher_upload_capacity=1\npiece_count=3\npiece_size=1\nsim_duration=100\n\
             rng_seed=0\n[arrivals]\nschedule = 10, 5\n",
        )
        .unwrap_err();
        let ConfigFileError::Invalid(errs) = err else {
            panic!()
        };
        assert!(errs.has("seed capacity must be positive"));
        assert!(errs.has("schedule not sorted"));
    }
}
