//! Seeded random states for verification sweeps.
//!
//! Each sample draws from its own ChaCha stream (`seed`, `index`), so sweeps
//! give identical states regardless of how they are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::state::PeakonState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampler {
    /// Range of consecutive position gaps.
    pub gap: (f64, f64),
    /// Range of each momentum.
    pub momentum: (f64, f64),
    /// Range of the rightmost position.
    pub offset: (f64, f64),
}

impl Default for Sampler {
    fn default() -> Self {
        Self { gap: (0.1, 2.0), momentum: (-2.0, 2.0), offset: (-1.0, 1.0) }
    }
}

impl Sampler {
    /// All momenta positive, so no pair ever collides.
    pub fn positive() -> Self {
        Self { momentum: (0.2, 2.0), ..Self::default() }
    }

    pub fn rng(seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng
    }

    pub fn state(&self, seed: u64, index: u64, n: usize) -> PeakonState {
        let mut rng = Self::rng(seed, index);
        self.state_from(&mut rng, n)
    }

    pub fn state_from<R: Rng>(&self, rng: &mut R, n: usize) -> PeakonState {
        let mut q = vec![0.0; n];
        q[n - 1] = rng.random_range(self.offset.0..=self.offset.1);
        for i in (0..n - 1).rev() {
            q[i] = q[i + 1] + rng.random_range(self.gap.0..=self.gap.1);
        }
        let p = (0..n).map(|_| rng.random_range(self.momentum.0..=self.momentum.1)).collect();
        PeakonState::ordered(q, p, 0.0).expect("sampled gaps are positive")
    }

    pub fn states(&self, seed: u64, count: usize, n: usize) -> Vec<PeakonState> {
        (0..count as u64).map(|i| self.state(seed, i, n)).collect()
    }
}

/// Sample `index` of a default sweep.
pub fn sample_state(seed: u64, index: u64, n: usize) -> PeakonState {
    Sampler::default().state(seed, index, n)
}
