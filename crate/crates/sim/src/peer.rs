use rand::Rng;
use swarm_core::Bitfield;

/// Leechers are numbered from 1 in arrival order; 0 is the seed.
pub type PeerId = u32;

pub const SEED: PeerId = 0;

#[derive(Clone, Debug)]
pub struct PeerState {
    pub id: PeerId,
    pub bitfield: Bitfield,
    pub arrival_time: f64,
    /// Pieces currently being transferred to this peer, one uploader each.
    pub in_flight: Bitfield,
    /// kB received, including progress on pieces not yet complete.
    pub downloaded_kb: f64,
    pub uploaded_kb: f64,
}

impl PeerState {
    pub fn new(id: PeerId, piece_count: u32, arrival_time: f64) -> Self {
        PeerState {
            id,
            bitfield: Bitfield::empty(piece_count),
            arrival_time,
            in_flight: Bitfield::empty(piece_count),
            downloaded_kb: 0.0,
            uploaded_kb: 0.0,
        }
    }

    pub fn piece_count(&self) -> u32 {
        self.bitfield.len()
    }

    /// Whether `uploader` owns something this peer neither has nor is already fetching.
    pub fn is_interested_in(&self, uploader: &Bitfield) -> bool {
        uploader.has_difference2(&self.bitfield, &self.in_flight)
    }
}

/// Rarest-first choice of the next piece `uploader` sends to `downloader`.
///
/// Candidates are pieces the uploader owns that the downloader neither owns
/// nor is already receiving. `availability[p]` is the replica count of piece
/// `p` among swarm members; ties on the minimum are broken uniformly at random.
pub fn pick_piece<R: Rng + ?Sized>(
    uploader: &Bitfield,
    downloader: &PeerState,
    availability: &[u32],
    rng: &mut R,
) -> Option<u32> {
    let mut best = u32::MAX;
    let mut ties = 0u32;
    let mut chosen = None;
    // Single-pass reservoir sampling over the minimum-count candidates.
    for piece in uploader.difference2(&downloader.bitfield, &downloader.in_flight) {
        let count = availability[piece as usize];
        if count < best {
            best = count;
            ties = 1;
            chosen = Some(piece);
        } else if count == best {
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                chosen = Some(piece);
            }
        }
    }
    chosen
}
