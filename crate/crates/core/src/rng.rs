//! Seedable, platform-independent random source.
//!
//! SplitMix64 (Steele, Lea & Flood): the state advances by the golden-ratio
//! increment `0x9E3779B97F4A7C15` and each output is the state passed
//! through two xor-shift-multiply rounds. Outputs depend only on the seed,
//! so tuple sampling, fold shuffles and random initializations reproduce
//! bit for bit everywhere.

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (rejection sampling, no modulo bias).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` draws from `pool`: without replacement when `k <= pool.len()`,
    /// with replacement otherwise.
    pub fn sample<T: Copy>(&mut self, pool: &[T], k: usize) -> Vec<T> {
        if pool.is_empty() {
            return Vec::new();
        }
        if k <= pool.len() {
            let mut scratch = pool.to_vec();
            for i in 0..k {
                let j = i + self.below(scratch.len() - i);
                scratch.swap(i, j);
            }
            scratch.truncate(k);
            scratch
        } else {
            (0..k).map(|_| pool[self.below(pool.len())]).collect()
        }
    }

    /// Independent child stream, e.g. one per fold.
    pub fn fork(&mut self) -> SplitMix64 {
        SplitMix64::new(self.next_u64())
    }
}
