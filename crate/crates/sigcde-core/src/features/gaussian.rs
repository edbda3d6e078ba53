use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard normal field indexed by `(seed, tag, index)`.
///
/// Entry `i` consumes words `4i..4i+4` of the ChaCha8 stream selected by
/// `(seed, tag)`, so any entry can be recomputed in isolation and filling a
/// buffer sequentially gives the same values.
#[derive(Clone)]
pub struct GaussianField {
    rng: ChaCha8Rng,
}

impl GaussianField {
    pub fn new(seed: u64, tag: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(tag);
        Self { rng }
    }

    fn draw(&mut self) -> f64 {
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * libm::ldexp(1.0, -53);
        let u2 = (self.rng.next_u64() >> 11) as f64 * libm::ldexp(1.0, -53);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    pub fn at(&mut self, index: u64) -> f64 {
        self.rng.set_word_pos(4 * index as u128);
        self.draw()
    }

    /// Fills `out` with entries `0..out.len()`, scaled by `scale`.
    pub fn fill(&mut self, out: &mut [f64], scale: f64) {
        self.rng.set_word_pos(0);
        for o in out.iter_mut() {
            *o = scale * self.draw();
        }
    }
}
