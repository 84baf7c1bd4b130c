//! Deterministic randomness for session construction.
//!
//! Both algorithms are fixed so that a session plan can be regenerated
//! bit-for-bit in any language:
//!
//! * generator: SplitMix64 (Steele, Lea & Flood), increment
//!   `0x9E3779B97F4A7C15`, standard output mix;
//! * annotator sub-seed: FNV-1a 64 over `master_seed` as 8 little-endian
//!   bytes followed by the UTF-8 annotator id, passed through the
//!   SplitMix64 output mix;
//! * bounded draws: rejection sampling on `u64` (no modulo bias);
//! * shuffles: Fisher–Yates, walking the slice from the back.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw from `0..bound`. Panics if `bound == 0`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Per-annotator seed derived from the campaign seed.
pub fn annotator_seed(master_seed: u64, annotator_id: &str) -> u64 {
    let mut bytes = master_seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(annotator_id.as_bytes());
    mix64(fnv1a64(&bytes))
}
