//! Seeded, splittable RNG streams.
//!
//! Every (trial, bag, round, candidate) gets its own stream derived from a
//! base seed, so results are identical across runs and thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Value-type handle for a deterministic random stream.
///
/// Same (seed, stream_id) ⇒ identical draw sequence, independent of which
/// thread consumes it or what other streams exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive an independent child stream. Derivation is a hash chain, so
    /// `s.substream(a).substream(b)` and `s.substream(b).substream(a)`
    /// differ, and no child collides with its parent.
    pub fn substream(&self, id: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(
                self.stream_id
                    .wrapping_mul(0xA24B_AED4_963E_E407)
                    .wrapping_add(id)
                    .wrapping_add(1),
            ),
        }
    }

    /// Materialize the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
