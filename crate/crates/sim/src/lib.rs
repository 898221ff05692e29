//! Piece-level discrete-event simulator of an unpopular BitTorrent swarm and
//! the statistics computed from its traces.
//!
//! One permanent seed, full-mesh leechers, rarest-first piece selection and
//! equal sharing of each uploader's capacity among the peers it currently
//! has something to send. Leechers leave as soon as they hold every piece.

mod engine;
pub mod metrics;
mod peer;
mod trace;

pub use engine::{recompute_rates, run, RatePlan, Simulation, Transfer};
pub use peer::{pick_piece, PeerId, PeerState, SEED};
pub use trace::{EventKind, EventTrace, SwarmSample, TraceRecord};
