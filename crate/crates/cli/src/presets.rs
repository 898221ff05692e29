//! Named scenarios.

use swarm_core::{ArrivalProcess, SwarmConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: SwarmConfig,
}

/// 1000 pieces of 256 kB (256 MB decimal), 64 kB/s leechers.
const PIECES: u32 = 1000;
const PIECE_KB: f64 = 256.0;
const LEECHER_KBPS: f64 = 64.0;
const POISSON_HORIZON: f64 = 1.0e6;

fn base(seed_kbps: f64, arrival_process: ArrivalProcess, sim_duration: f64) -> SwarmConfig {
    SwarmConfig {
        seed_upload_capacity: seed_kbps,
        leecher_upload_capacity: LEECHER_KBPS,
        piece_count: PIECES,
        piece_size: PIECE_KB,
        arrival_process,
        sim_duration,
        rng_seed: 1,
        max_recipients: None,
        sample_interval: SwarmConfig::DEFAULT_SAMPLE_INTERVAL,
    }
}

/// Arrival instants from successive gaps, the first measured from t = 0.
pub fn cumulative(gaps: &[f64]) -> Vec<f64> {
    gaps.iter()
        .scan(0.0, |t, g| {
            *t += g;
            Some(*t)
        })
        .collect()
}

fn poisson(seed_kbps: f64, rate: f64) -> SwarmConfig {
    base(seed_kbps, ArrivalProcess::Poisson { rate }, POISSON_HORIZON)
}

pub fn all() -> Vec<ScenarioPreset> {
    let mut v = vec![
        ScenarioPreset {
            name: "single-leecher",
            description: "one leecher at t=0, seed and leecher at 64 kB/s",
            config: base(64.0, ArrivalProcess::Schedule(vec![0.0]), POISSON_HORIZON),
        },
        ScenarioPreset {
            name: "fig1-arrivals",
            description: "five leechers, gaps 10 s, 10 min, 4 min, 4 min, 4 min; all at 64 kB/s",
            config: base(
                64.0,
                ArrivalProcess::Schedule(cumulative(&[10.0, 600.0, 240.0, 240.0, 240.0])),
                POISSON_HORIZON,
            ),
        },
        ScenarioPreset {
            name: "fig2-arrivals",
            description: "five leechers, gaps 10 s, 4 min, 4 min, 4 min, 10 min; all at 64 kB/s",
            config: base(
                64.0,
                ArrivalProcess::Schedule(cumulative(&[10.0, 240.0, 240.0, 240.0, 600.0])),
                POISSON_HORIZON,
            ),
        },
    ];
    for (name, c_s) in [
        ("poisson-cs48", 48.0),
        ("poisson-cs64", 64.0),
        ("poisson-cs96", 96.0),
    ] {
        v.push(ScenarioPreset {
            name,
            description: "Poisson arrivals at 1/1000 per second, 64 kB/s leechers",
            config: poisson(c_s, 0.001),
        });
    }
    for (name, c_s) in [
        ("table1-cs48", 48.0),
        ("table1-cs64", 64.0),
        ("table1-cs96", 96.0),
        ("table1-cs128", 128.0),
    ] {
        v.push(ScenarioPreset {
            name,
            description: "burst-bound parameter row: λ = 0.001, S = 1000 x 256 kB, c_l = 64 kB/s",
            config: poisson(c_s, 0.001),
        });
    }
    for (name, gap) in [
        ("interarrival-1000", 1000.0),
        ("interarrival-1500", 1500.0),
        ("interarrival-2000", 2000.0),
        ("interarrival-2500", 2500.0),
    ] {
        v.push(ScenarioPreset {
            name,
            description: "Poisson arrivals with the given mean gap, all capacities 64 kB/s",
            config: poisson(64.0, 1.0 / gap),
        });
    }
    v.push(ScenarioPreset {
        name: "planetlab-cs50",
        description: "20 MB content (80 x 250 kB), λ = 1/125, all capacities 50 kB/s, 5000 s",
        config: SwarmConfig {
            seed_upload_capacity: 50.0,
            leecher_upload_capacity: 50.0,
            piece_count: 80,
            piece_size: 250.0,
            arrival_process: ArrivalProcess::Poisson { rate: 1.0 / 125.0 },
            sim_duration: 5000.0,
            ..base(50.0, ArrivalProcess::Schedule(vec![]), 0.0)
        },
    });
    v
}

pub fn find(name: &str) -> Option<ScenarioPreset> {
    all().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for p in all() {
            p.config
                .validate()
                .unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn published_parameterizations() {
        let t = find("table1-cs48").unwrap().config;
        assert_eq!(t.arrival_process, ArrivalProcess::Poisson { rate: 0.001 });
        assert_eq!(t.content_size(), 256_000.0);
        assert_eq!(
            (t.seed_upload_capacity, t.leecher_upload_capacity),
            (48.0, 64.0)
        );
        assert_eq!(
            find("fig2-arrivals").unwrap().config.arrival_process,
            ArrivalProcess::Schedule(vec![10.0, 250.0, 490.0, 730.0, 1330.0])
        );
        assert_eq!(
            find("planetlab-cs50").unwrap().config.content_size(),
            20_000.0
        );
        assert!(find("nope").is_none());
    }
}
