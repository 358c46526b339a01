use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

/// Standard normal draws addressed by `(seed, stream, index)`.
///
/// Each index owns four 32-bit words of its stream, so any block can be
/// generated independently of the others.
#[derive(Debug, Clone, Copy)]
pub struct NormalStream {
    seed: u64,
}

const WORDS_PER_SAMPLE: u128 = 4;

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream { seed }
    }

    pub fn fill(&self, stream: u64, start: u64, out: &mut [f64]) {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos(start as u128 * WORDS_PER_SAMPLE);
        for x in out.iter_mut() {
            let a = rng.next_u64();
            let b = rng.next_u64();
            // u1 in (0, 1], u2 in [0, 1)
            let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
            let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            *x = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}
