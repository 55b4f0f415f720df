//! 64-bit linear congruential generator for reproducible initial data.
//!
//! `state <- A * state + C (mod 2^64)` with the MMIX constants below. Each
//! draw advances the state once and returns the top 53 bits scaled to
//! `[0, 1)`: `U = (state >> 11) / 2^53`. The initial state is the seed.

pub const LCG_A: u64 = 6364136223846793005;
pub const LCG_C: u64 = 1442695040888963407;

#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(LCG_A).wrapping_add(LCG_C);
        self.state
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
