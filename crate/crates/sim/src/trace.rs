use crate::peer::PeerId;
use std::io::{self, Write};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Arrival,
    PieceComplete,
    Departure,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::PieceComplete => "piece_complete",
            EventKind::Departure => "departure",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: EventKind,
    pub peer: PeerId,
    pub piece: Option<u32>,
    /// Leechers in the swarm right after this event.
    pub leechers_present: u32,
}

/// Periodic view of who is interested in whom.
#[derive(Clone, Debug, PartialEq)]
pub struct SwarmSample {
    pub time: f64,
    /// Leechers present, ascending id.
    pub peers: Vec<PeerId>,
    /// Piece counts, aligned with `peers`.
    pub counts: Vec<u32>,
    /// Row-major `len × len`; entry `(i, j)` is how many pieces peer `j` owns
    /// that peer `i` lacks.
    pub interest: Vec<u32>,
}

impl SwarmSample {
    pub fn interest(&self, i: usize, j: usize) -> u32 {
        self.interest[i * self.peers.len() + j]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventTrace {
    pub records: Vec<TraceRecord>,
    pub samples: Vec<SwarmSample>,
    /// Instant the run stopped.
    pub end_time: f64,
    pub piece_count: u32,
}

impl EventTrace {
    pub fn arrivals(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.kind == EventKind::Arrival)
    }

    pub fn departures(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records
            .iter()
            .filter(|r| r.kind == EventKind::Departure)
    }

    /// `time,event,peer,piece,leechers_present`, one row per record.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time,event,peer,piece,leechers_present")?;
        for r in &self.records {
            write!(out, "{:.6},{},{},", r.time, r.kind.as_str(), r.peer)?;
            if let Some(p) = r.piece {
                write!(out, "{p}")?;
            }
            writeln!(out, ",{}", r.leechers_present)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}
