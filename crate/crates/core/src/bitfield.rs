/// Exact set of owned pieces, packed one bit per piece.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bitfield {
    words: Vec<u64>,
    piece_count: u32,
    len: u32,
}

impl Bitfield {
    pub fn empty(piece_count: u32) -> Self {
        Bitfield {
            words: vec![0; (piece_count as usize).div_ceil(64)],
            piece_count,
            len: 0,
        }
    }

    pub fn full(piece_count: u32) -> Self {
        let mut bf = Self::empty(piece_count);
        for w in &mut bf.words {
            *w = u64::MAX;
        }
        let tail = piece_count % 64;
        if tail != 0 {
            if let Some(last) = bf.words.last_mut() {
                *last = (1u64 << tail) - 1;
            }
        }
        bf.len = piece_count;
        bf
    }

    pub fn piece_count(&self) -> u32 {
        self.piece_count
    }

    /// Number of owned pieces.
    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_complete(&self) -> bool {
        self.len == self.piece_count
    }

    pub fn contains(&self, piece: u32) -> bool {
        piece < self.piece_count && self.words[(piece / 64) as usize] & (1 << (piece % 64)) != 0
    }

    /// Returns `true` if the piece was newly inserted.
    pub fn insert(&mut self, piece: u32) -> bool {
        assert!(piece < self.piece_count, "piece {piece} out of range");
        let w = &mut self.words[(piece / 64) as usize];
        let bit = 1 << (piece % 64);
        if *w & bit != 0 {
            return false;
        }
        *w |= bit;
        self.len += 1;
        true
    }

    /// Returns `true` if the piece was present.
    pub fn remove(&mut self, piece: u32) -> bool {
        if piece >= self.piece_count {
            return false;
        }
        let w = &mut self.words[(piece / 64) as usize];
        let bit = 1 << (piece % 64);
        if *w & bit == 0 {
            return false;
        }
        *w &= !bit;
        self.len -= 1;
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        iter_bits(self.words.iter().copied())
    }

    /// Pieces in `self` that `other` lacks, i.e. how interesting `self` is to `other`.
    pub fn count_missing_from(&self, other: &Bitfield) -> u32 {
        debug_assert_eq!(self.piece_count, other.piece_count);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones())
            .sum()
    }

    /// Pieces in `self` but in neither `exclude_a` nor `exclude_b`.
    pub fn difference2<'a>(
        &'a self,
        exclude_a: &'a Bitfield,
        exclude_b: &'a Bitfield,
    ) -> impl Iterator<Item = u32> + 'a {
        iter_bits(
            self.words
                .iter()
                .zip(&exclude_a.words)
                .zip(&exclude_b.words)
                .map(|((s, a), b)| s & !a & !b),
        )
    }

    pub fn has_difference2(&self, exclude_a: &Bitfield, exclude_b: &Bitfield) -> bool {
        self.words
            .iter()
            .zip(&exclude_a.words)
            .zip(&exclude_b.words)
            .any(|((s, a), b)| s & !a & !b != 0)
    }
}

fn iter_bits(words: impl Iterator<Item = u64>) -> impl Iterator<Item = u32> {
    words.enumerate().flat_map(|(wi, mut w)| {
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let bit = w.trailing_zeros();
            w &= w - 1;
            Some(wi as u32 * 64 + bit)
        })
    })
}
