//! Counter-based deterministic random streams.
//!
//! A stream is identified by a key (seed plus any number of coordinates such
//! as item, day and draw purpose). Its output depends only on the key and the
//! position within the stream, so cells can be generated in any order or on
//! any thread and still reproduce bit-for-bit.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct KeyedRng {
    key: u64,
    counter: u64,
}

impl KeyedRng {
    pub fn new(seed: u64, coords: &[u64]) -> Self {
        let key = coords.iter().fold(mix(seed ^ GOLDEN), |acc, &c| {
            mix(acc.wrapping_add(GOLDEN) ^ mix(c.wrapping_add(GOLDEN)))
        });
        Self { key, counter: 0 }
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for KeyedRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
