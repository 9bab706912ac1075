//! Probability vectors on a finite alphabet and the functionals the rest of
//! the crate is built on: entropy, relative entropy, total variation and
//! product block laws.
//!
//! All logarithms are natural (nats).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Sums within this distance of 1 are accepted as-is.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Sums within this distance of 1 (but beyond [`SIMPLEX_TOL`]) are renormalized with a warning.
pub const SIMPLEX_RENORM_TOL: f64 = 1e-8;
/// Log-probabilities below this exponentiate to exactly zero.
pub const LOG_UNDERFLOW: f64 = -745.0;
/// Default cap on the number of words in a dense block law.
pub const DEFAULT_WORD_CAP: usize = 1_000_000;

/// `exp(x)`, flushed to zero below `exp(-745)`.
#[inline]
pub fn exp_clamped(x: f64) -> f64 {
    if x < LOG_UNDERFLOW {
        0.0
    } else {
        x.exp()
    }
}

/// Max-shifted `ln Σ exp(x_i)`. Returns `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// A finite alphabet `{x_1, ..., x_k}` with distinct labels. Symbols are
/// addressed by index; the index order is the order used by cdfs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Arc<Self>> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::AlphabetTooSmall(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(Arc::new(Alphabet { labels }))
    }

    /// Symbols labelled `1..=k` (die faces).
    pub fn numbered(k: usize) -> Result<Arc<Self>> {
        Self::new((1..=k).map(|i| i.to_string()))
    }

    /// The two-letter alphabet `{0, 1}`.
    pub fn binary() -> Arc<Self> {
        Arc::new(Alphabet { labels: vec!["0".into(), "1".into()] })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

fn same_alphabet(a: &Arc<Alphabet>, b: &Arc<Alphabet>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

fn validate_masses(mut mass: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    for (i, &v) in mass.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidDistribution(format!("{what} entry {i} is {v}")));
        }
    }
    let total: f64 = mass.iter().sum();
    let gap = (total - 1.0).abs();
    if gap > SIMPLEX_RENORM_TOL {
        return Err(Error::InvalidDistribution(format!("{what} sums to {total}")));
    }
    if gap > SIMPLEX_TOL {
        log::warn!("{what} sums to {total}; renormalizing");
        mass.iter_mut().for_each(|v| *v /= total);
    }
    Ok(mass)
}

/// A probability vector on an [`Alphabet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    alphabet: Arc<Alphabet>,
    mass: Vec<f64>,
}

impl Distribution {
    pub fn new(alphabet: Arc<Alphabet>, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != alphabet.size() {
            return Err(Error::LengthMismatch { expected: alphabet.size(), got: mass.len() });
        }
        let mass = validate_masses(mass, "distribution")?;
        Ok(Distribution { alphabet, mass })
    }

    /// Builds a distribution from nonnegative weights by normalizing them.
    pub fn from_weights(alphabet: Arc<Alphabet>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Self::new(alphabet, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(alphabet: Arc<Alphabet>) -> Self {
        let k = alphabet.size();
        Distribution { alphabet, mass: vec![1.0 / k as f64; k] }
    }

    /// Ber(q) on the binary alphabet, with `q` the mass of symbol `1`.
    pub fn bernoulli(q: f64) -> Result<Self> {
        Self::new(Alphabet::binary(), vec![1.0 - q, q])
    }

    pub fn point_mass(alphabet: Arc<Alphabet>, symbol: usize) -> Result<Self> {
        let mut mass = vec![0.0; alphabet.size()];
        *mass.get_mut(symbol).ok_or_else(|| Error::InvalidArgument(format!("symbol {symbol} out of range")))? = 1.0;
        Ok(Distribution { alphabet, mass })
    }

    pub(crate) fn from_raw(alphabet: Arc<Alphabet>, mass: Vec<f64>) -> Self {
        debug_assert_eq!(alphabet.size(), mass.len());
        Distribution { alphabet, mass }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn size(&self) -> usize {
        self.mass.len()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.mass.iter().all(|&v| v > 0.0)
    }

    /// Errors unless every symbol carries positive mass.
    pub fn require_strictly_positive(&self) -> Result<()> {
        match self.mass.iter().position(|&v| v <= 0.0) {
            Some(symbol) => Err(Error::NotStrictlyPositive { symbol, mass: self.mass[symbol] }),
            None => Ok(()),
        }
    }

    pub fn expectation(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.mass.iter().enumerate().map(|(i, &p)| p * f(i)).sum()
    }

    /// L1 distance `Σ |p - q|`.
    pub fn l1_distance(&self, other: &Distribution) -> Result<f64> {
        if !same_alphabet(&self.alphabet, &other.alphabet) {
            return Err(Error::AlphabetMismatch);
        }
        Ok(self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum())
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.mass.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.6}")?;
        }
        write!(f, ")")
    }
}

/// A law on words of length `m`, stored densely. Word `(x_1, ..., x_m)` sits
/// at index `Σ x_i k^(m-1-i)`, so the first coordinate is most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLaw {
    alphabet: Arc<Alphabet>,
    m: usize,
    mass: Vec<f64>,
}

/// Number of words of length `m`, or an error when it exceeds `cap`.
pub fn word_count(k: usize, m: usize, cap: usize) -> Result<usize> {
    let count = (k as f64).powi(m as i32);
    if count > cap as f64 {
        return Err(Error::CapExceeded { what: "block law", count, cap: cap as f64 });
    }
    Ok(k.pow(m as u32))
}

impl BlockLaw {
    pub fn new(alphabet: Arc<Alphabet>, m: usize, mass: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("block length must be at least 1".into()));
        }
        let words = word_count(alphabet.size(), m, usize::MAX)?;
        if mass.len() != words {
            return Err(Error::LengthMismatch { expected: words, got: mass.len() });
        }
        for (i, &v) in mass.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistribution(format!("block law word {i} has mass {v}")));
            }
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDistribution(format!("block law sums to {total}")));
        }
        Ok(BlockLaw { alphabet, m, mass })
    }

    pub(crate) fn from_raw(alphabet: Arc<Alphabet>, m: usize, mass: Vec<f64>) -> Self {
        BlockLaw { alphabet, m, mass }
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn block_len(&self) -> usize {
        self.m
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Decodes a dense index into its word.
    pub fn word(&self, mut index: usize) -> Vec<usize> {
        let k = self.alphabet.size();
        let mut w = vec![0; self.m];
        for slot in w.iter_mut().rev() {
            *slot = index % k;
            index /= k;
        }
        w
    }

    pub fn index_of(&self, word: &[usize]) -> usize {
        let k = self.alphabet.size();
        word.iter().fold(0, |acc, &x| acc * k + x)
    }

    pub fn prob(&self, word: &[usize]) -> f64 {
        if word.len() != self.m || word.iter().any(|&x| x >= self.alphabet.size()) {
            return 0.0;
        }
        self.mass[self.index_of(word)]
    }

    /// Law of coordinate `coord` (0-based).
    pub fn marginal(&self, coord: usize) -> Distribution {
        let k = self.alphabet.size();
        let stride = k.pow((self.m - 1 - coord) as u32);
        let mut out = vec![0.0; k];
        for (idx, &v) in self.mass.iter().enumerate() {
            out[(idx / stride) % k] += v;
        }
        Distribution::from_raw(self.alphabet.clone(), out)
    }

    /// Law of the first `len` coordinates.
    pub fn prefix(&self, len: usize) -> Result<BlockLaw> {
        if len == 0 || len > self.m {
            return Err(Error::InvalidArgument(format!("prefix length {len} not in 1..={}", self.m)));
        }
        let k = self.alphabet.size();
        let stride = k.pow((self.m - len) as u32);
        let mut out = vec![0.0; k.pow(len as u32)];
        for (idx, &v) in self.mass.iter().enumerate() {
            out[idx / stride] += v;
        }
        Ok(BlockLaw::from_raw(self.alphabet.clone(), len, out))
    }
}

/// Shared view used by [`tv_distance`] so it accepts single-letter and block laws alike.
pub trait Masses {
    fn alphabet(&self) -> &Arc<Alphabet>;
    fn block_len(&self) -> usize;
    fn masses(&self) -> &[f64];
}

impl Masses for Distribution {
    fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }
    fn block_len(&self) -> usize {
        1
    }
    fn masses(&self) -> &[f64] {
        &self.mass
    }
}

impl Masses for BlockLaw {
    fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }
    fn block_len(&self) -> usize {
        self.m
    }
    fn masses(&self) -> &[f64] {
        &self.mass
    }
}

/// Shannon entropy `-Σ p ln p` with `0 ln 0 = 0`.
pub fn entropy(p: &Distribution) -> f64 {
    -p.mass.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Relative entropy `D(q‖p) = Σ q ln(q/p)`.
///
/// Returns [`Error::InfiniteDivergence`] when `q` charges a symbol `p` does not.
pub fn kl_divergence(q: &Distribution, p: &Distribution) -> Result<f64> {
    if !same_alphabet(&q.alphabet, &p.alphabet) {
        return Err(Error::AlphabetMismatch);
    }
    let mut d = 0.0;
    for (i, (&qi, &pi)) in q.mass.iter().zip(&p.mass).enumerate() {
        if qi > 0.0 {
            if pi <= 0.0 {
                return Err(Error::InfiniteDivergence(i));
            }
            d += qi * (qi / pi).ln();
        }
    }
    // Rounding can leave a -1e-17 residue when q == p.
    Ok(d.max(0.0))
}

/// Total variation `½ Σ |p - q|` between two laws on the same words.
pub fn tv_distance<T: Masses>(p: &T, q: &T) -> Result<f64> {
    if !same_alphabet(p.alphabet(), q.alphabet()) || p.block_len() != q.block_len() {
        return Err(Error::AlphabetMismatch);
    }
    let s: f64 = p.masses().iter().zip(q.masses()).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * s).min(1.0))
}

/// The i.i.d. block law `p^{⊗m}` with the default word cap.
pub fn product_block_law(p: &Distribution, m: usize) -> Result<BlockLaw> {
    product_block_law_capped(p, m, DEFAULT_WORD_CAP)
}

pub fn product_block_law_capped(p: &Distribution, m: usize, cap: usize) -> Result<BlockLaw> {
    if m == 0 {
        return Err(Error::InvalidArgument("block length must be at least 1".into()));
    }
    word_count(p.size(), m, cap)?;
    let mut mass = vec![1.0];
    for _ in 0..m {
        mass = mass.iter().flat_map(|&w| p.mass.iter().map(move |&pi| w * pi)).collect();
    }
    Ok(BlockLaw::from_raw(p.alphabet.clone(), m, mass))
}
