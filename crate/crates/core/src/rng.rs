//! Reproducible random streams and the discrete samplers shared by the
//! Monte Carlo modules.
//!
//! Every stream is a ChaCha8 keystream keyed by `(seed, stream id)`. Work is
//! cut into fixed-size chunks and chunk `i` always draws from stream `i`, so
//! results do not depend on how many threads process the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};

/// Proposals per chunk.
pub const CHUNK: u64 = 1 << 12;

pub type StreamRng = ChaCha8Rng;

/// The stream with id `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed for sub-experiment `index` (splitmix64 finalizer over the pair).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `(chunk id, chunk length)` pairs covering `total` draws.
pub fn chunks(total: u64) -> impl Iterator<Item = (u64, u64)> {
    let full = total / CHUNK;
    let rest = total % CHUNK;
    (0..full).map(|i| (i, CHUNK)).chain((rest > 0).then_some((full, rest)))
}

/// Multinomial counts of `n` draws, sampled as a chain of conditional binomials.
#[derive(Debug, Clone)]
pub struct Multinomial {
    n: u64,
    /// `p_i / (1 - p_0 - ... - p_{i-1})`.
    ratios: Vec<f64>,
    first: Binomial,
}

impl Multinomial {
    pub fn new(n: u64, probs: &[f64]) -> Self {
        let mut ratios = Vec::with_capacity(probs.len());
        let mut left = 1.0;
        for &p in probs {
            ratios.push(if left > 0.0 { (p / left).clamp(0.0, 1.0) } else { 0.0 });
            left -= p;
        }
        let first = Binomial::new(n, ratios[0]).expect("ratio in [0, 1]");
        Multinomial { n, ratios, first }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u64]) {
        let k = self.ratios.len();
        let mut left = self.n;
        for (i, slot) in out.iter_mut().enumerate() {
            let c = if i + 1 == k || left == 0 {
                left
            } else if i == 0 {
                self.first.sample(rng)
            } else {
                Binomial::new(left, self.ratios[i]).expect("ratio in [0, 1]").sample(rng)
            };
            *slot = c;
            left -= c;
        }
    }
}

/// The first `m` symbols of a uniformly shuffled sequence with the given
/// symbol counts (sampling without replacement), written into `word`.
pub fn draw_without_replacement<R: Rng + ?Sized>(rng: &mut R, counts: &[u64], word: &mut [usize]) {
    let mut left: Vec<u64> = counts.to_vec();
    let mut total: u64 = left.iter().sum();
    for slot in word.iter_mut() {
        let mut u = rng.random_range(0..total);
        let mut sym = 0;
        while u >= left[sym] {
            u -= left[sym];
            sym += 1;
        }
        *slot = sym;
        left[sym] -= 1;
        total -= 1;
    }
}

/// Inverse-cdf draw of one symbol.
pub fn draw_symbol<R: Rng + ?Sized>(rng: &mut R, cdf: &[f64]) -> usize {
    let u: f64 = rng.random();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}
