//! Deterministic pseudo-random generator.
//!
//! Everything random in this crate (instances, sample vectors, trial
//! coefficients) flows through [`Rng`], a SplitMix64 generator. The algorithm
//! is fixed here rather than delegated to an external crate so that a given
//! seed produces the same stream on every platform and in every future build;
//! reports generated from the same seeds are reproducible byte for byte.
//!
//! SplitMix64 update (Vigna): the state advances by the 64-bit golden ratio
//! and the output is a finalizing mix of the new state.

#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller, one deviate per call.
    pub fn normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Independent seed for a derived stream (retry attempts, sub-tasks).
    pub fn derive_seed(&mut self) -> u64 {
        self.next_u64()
    }
}
