use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

/// Random stream for one run. `(seed, run)` fixes every draw, so a run can be
/// replayed on any worker.
#[derive(Clone, Debug)]
pub struct RngStream {
    pub seed: u64,
    pub run: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, run: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        RngStream { seed, run, rng }
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        self.rng.random_range(lo..=hi)
    }

    pub fn exponential(&mut self, rate: f64) -> f64 {
        Exp::new(rate).expect("exit rate is positive").sample(&mut self.rng)
    }

    /// Index drawn with probability proportional to its weight. No draw for a single item.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        if weights.len() == 1 {
            return 0;
        }
        WeightedIndex::new(weights)
            .expect("weights are positive")
            .sample(&mut self.rng)
    }

    /// Uniform index in `0..n`. No draw when `n == 1`.
    pub fn index(&mut self, n: usize) -> usize {
        if n <= 1 {
            return 0;
        }
        self.rng.random_range(0..n)
    }

    pub fn unit(&mut self) -> f64 {
        self.rng.random()
    }
}
