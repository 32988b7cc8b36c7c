//! Counter-based, splittable random streams.
//!
//! A stream is keyed by `(seed, stream_id)` and backed by ChaCha8, whose
//! keystream is addressable: [`RngStream::substream`] jumps directly to a
//! fixed block of the keystream, so the `k`-th draw of a run can be
//! regenerated without replaying the previous `k - 1`.
//!
//! Normal variates are produced by inverse-CDF transform of one 53-bit
//! uniform, so every normal consumes exactly one `u64`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

/// Words of keystream reserved for each substream (2^32 `u32` words).
const SUBSTREAM_WORDS: u128 = 1 << 32;

/// Well-known stream ids used by the optimizer and checks.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const PERTURB: u64 = 2;
    pub const SFO: u64 = 3;
    pub const GRADIENT_MC: u64 = 4;
    pub const SYNTH: u64 = 5;
    pub const EVAL: u64 = 6;
}

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// An independent view positioned at block `index` of this stream.
    ///
    /// Substreams never overlap as long as each consumes fewer than 2^31
    /// `u64` values.
    pub fn substream(&self, index: u64) -> RngStream {
        let mut inner = self.inner.clone();
        inner.set_word_pos(index as u128 * SUBSTREAM_WORDS);
        RngStream {
            seed: self.seed,
            stream_id: self.stream_id,
            inner,
        }
    }

    /// Current keystream position in 32-bit words.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift; bias below 2^-32
    /// for the sizes used here).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal draw.
    pub fn next_normal(&mut self) -> f64 {
        standard_normal_quantile(self.next_open01())
    }
}

/// Inverse CDF of the standard normal distribution.
pub fn standard_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
