//! Exact finite-`n` oracle built on the method of types.
//!
//! Conditioning an i.i.d. sequence on its type lying in `E` gives the
//! block law
//!
//! ```text
//! Pr(X_{1:m} = x | P_n ∈ E) = Σ_{Q ∈ E ∩ P_n} Pr(X_{1:m} = x | P_n = Q) · w_n(Q)
//! w_n(Q) = Pr(P_n = Q) / Σ_{Q' ∈ E ∩ P_n} Pr(P_n = Q')
//! ```
//!
//! where `Pr(X_{1:m} = x | P_n = Q) = Π_j (n_j)_{c_j(x)} / (n)_m` is the
//! multiple hypergeometric law of the first `m` draws without replacement.
//! Everything here is enumerated exactly; nothing is sampled except in
//! [`entropy_concentration`].

use std::sync::Arc;

use rayon::prelude::*;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::rng::{self, Multinomial};
use crate::simplex::{
    entropy, exp_clamped, kl_divergence, log_sum_exp, product_block_law, tv_distance, word_count, Alphabet, BlockLaw,
    Distribution, DEFAULT_WORD_CAP,
};
use crate::tilt::{i_project, MomentConstraint, TiltSolution};

/// Default cap on `C(n + k - 1, k - 1)`.
pub const DEFAULT_TYPE_CAP: f64 = 5e7;
/// Largest `n` probed when looking for the smallest feasible sample size.
pub const FEASIBILITY_PROBE_LIMIT: u64 = 64;

/// A type class: the count vector `(n_1, ..., n_k)` of a length-`n` sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeClass {
    alphabet: Arc<Alphabet>,
    counts: Vec<u64>,
    n: u64,
}

impl TypeClass {
    pub fn new(alphabet: Arc<Alphabet>, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != alphabet.size() {
            return Err(Error::LengthMismatch { expected: alphabet.size(), got: counts.len() });
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidArgument("a type needs n >= 1".into()));
        }
        Ok(TypeClass { alphabet, counts, n })
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// The empirical law `(n_1/n, ..., n_k/n)`.
    pub fn frequencies(&self) -> Distribution {
        let n = self.n as f64;
        Distribution::from_raw(self.alphabet.clone(), self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

/// `C(n + k - 1, k - 1)` as a float.
pub fn type_count(k: usize, n: u64) -> f64 {
    let (n, r) = (n as f64, (k - 1) as f64);
    (ln_factorial_f(n + r) - ln_factorial_f(n) - ln_factorial_f(r)).exp().round()
}

fn ln_factorial_f(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x + 1.0)
}

/// Compositions of `n` into `k` nonnegative parts in lexicographic order.
#[derive(Debug, Clone)]
pub struct Compositions {
    next: Option<Vec<u64>>,
}

impl Compositions {
    pub fn new(k: usize, n: u64) -> Self {
        let mut first = vec![0; k];
        if k > 0 {
            first[k - 1] = n;
        }
        Compositions { next: (k > 0).then_some(first) }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let current = self.next.take()?;
        let k = current.len();
        // Move one unit from the last nonzero slot j onto slot j - 1 and
        // sweep the rest of slot j into the final slot.
        if let Some(j) = (1..k).rev().find(|&j| current[j] > 0) {
            let mut succ = current.clone();
            let rest = succ[j] - 1;
            succ[j] = 0;
            succ[j - 1] += 1;
            succ[k - 1] += rest;
            self.next = Some(succ);
        }
        Some(current)
    }
}

/// Streams every type of size `n` on `alphabet`, under the default cap.
pub fn enumerate_types(alphabet: &Arc<Alphabet>, n: u64) -> Result<impl Iterator<Item = TypeClass>> {
    enumerate_types_capped(alphabet, n, DEFAULT_TYPE_CAP)
}

pub fn enumerate_types_capped(alphabet: &Arc<Alphabet>, n: u64, cap: f64) -> Result<impl Iterator<Item = TypeClass>> {
    check_enumerable(alphabet.size(), n, cap)?;
    let alphabet = alphabet.clone();
    Ok(Compositions::new(alphabet.size(), n).map(move |counts| TypeClass { alphabet: alphabet.clone(), counts, n }))
}

fn check_enumerable(k: usize, n: u64, cap: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("type enumeration needs n >= 1".into()));
    }
    let count = type_count(k, n);
    if count > cap {
        return Err(Error::CapExceeded { what: "type enumeration", count, cap });
    }
    Ok(())
}

/// Visits every type of size `n`, split by first coordinate so the prefixes
/// can run in parallel. Results come back in prefix order regardless of
/// scheduling.
fn par_fold_types<T, F>(k: usize, n: u64, cap: f64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[u64]) -> Option<T> + Sync,
{
    check_enumerable(k, n, cap)?;
    let chunks: Vec<Vec<T>> = (0..=n)
        .into_par_iter()
        .map(|first| {
            let mut out = Vec::new();
            let mut counts = vec![0u64; k];
            counts[0] = first;
            for tail in Compositions::new(k - 1, n - first) {
                counts[1..].copy_from_slice(&tail);
                if let Some(v) = f(&counts) {
                    out.push(v);
                }
            }
            out
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

/// Cached `ln j!` for `j ≤ n`.
#[derive(Debug, Clone)]
pub struct LnFactorials(Vec<f64>);

impl LnFactorials {
    pub fn up_to(n: u64) -> Self {
        LnFactorials((0..=n).map(ln_factorial).collect())
    }

    #[inline]
    pub fn get(&self, j: u64) -> f64 {
        self.0[j as usize]
    }

    /// Multinomial log-pmf of `counts` under `ln_p`.
    pub fn multinomial_ln_pmf(&self, counts: &[u64], ln_p: &[f64]) -> f64 {
        let n: u64 = counts.iter().sum();
        let mut lp = self.get(n);
        for (&c, &l) in counts.iter().zip(ln_p) {
            if c > 0 {
                lp += c as f64 * l - self.get(c);
            }
        }
        lp
    }
}

fn check_same_alphabet(a: &Arc<Alphabet>, b: &Arc<Alphabet>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::AlphabetMismatch)
    }
}

/// `ln Pr(P_n = t)` for i.i.d. draws from `p`, i.e. `ln[n!/Π n_j! · Π p_j^{n_j}]`.
pub fn type_log_prob(t: &TypeClass, p: &Distribution) -> Result<f64> {
    p.require_strictly_positive()?;
    check_same_alphabet(&t.alphabet, p.alphabet())?;
    let mut lp = ln_factorial(t.n);
    for (&c, &pj) in t.counts.iter().zip(p.masses()) {
        if c > 0 {
            lp += c as f64 * pj.ln() - ln_factorial(c);
        }
    }
    Ok(lp)
}

/// Slack in the two method-of-types bounds
/// `(n+1)^{-k} e^{-nD(Q‖P)} ≤ Pr(P_n = Q) ≤ e^{-nD(Q‖P)}`, in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SanovCheck {
    pub log_prob: f64,
    pub divergence: f64,
    /// `ln Pr - (-k ln(n+1) - nD)`.
    pub lower_slack: f64,
    /// `-nD - ln Pr`.
    pub upper_slack: f64,
    pub pass: bool,
}

pub fn sanov_bounds_check(t: &TypeClass, p: &Distribution) -> Result<SanovCheck> {
    let log_prob = type_log_prob(t, p)?;
    let divergence = kl_divergence(&t.frequencies(), p)?;
    Ok(sanov_from_parts(t.n, t.counts.len(), log_prob, divergence))
}

fn sanov_from_parts(n: u64, k: usize, log_prob: f64, divergence: f64) -> SanovCheck {
    let nd = n as f64 * divergence;
    let lower_slack = log_prob - (-(k as f64) * ((n + 1) as f64).ln() - nd);
    let upper_slack = -nd - log_prob;
    SanovCheck { log_prob, divergence, lower_slack, upper_slack, pass: lower_slack >= -1e-9 && upper_slack >= -1e-9 }
}

/// Outcome of checking every type of one size against the method-of-types bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SanovSweep {
    pub types: u64,
    pub violations: u64,
    pub min_lower_slack: f64,
    pub min_upper_slack: f64,
    /// `Σ_Q Pr(P_n = Q)`, which must be 1.
    pub total_prob: f64,
}

/// Runs [`sanov_bounds_check`] over all types of size `n`.
pub fn sanov_sweep(p: &Distribution, n: u64) -> Result<SanovSweep> {
    p.require_strictly_positive()?;
    let k = p.size();
    let lf = LnFactorials::up_to(n);
    let ln_p: Vec<f64> = p.masses().iter().map(|v| v.ln()).collect();
    let rows = par_fold_types(k, n, DEFAULT_TYPE_CAP, |counts| {
        let lp = lf.multinomial_ln_pmf(counts, &ln_p);
        let nf = n as f64;
        let d: f64 = counts
            .iter()
            .zip(p.masses())
            .filter(|(&c, _)| c > 0)
            .map(|(&c, &pj)| {
                let q = c as f64 / nf;
                q * (q / pj).ln()
            })
            .sum();
        Some(sanov_from_parts(n, k, lp, d.max(0.0)))
    })?;
    let logs: Vec<f64> = rows.iter().map(|r| r.log_prob).collect();
    Ok(SanovSweep {
        types: rows.len() as u64,
        violations: rows.iter().filter(|r| !r.pass).count() as u64,
        min_lower_slack: rows.iter().map(|r| r.lower_slack).fold(f64::INFINITY, f64::min),
        min_upper_slack: rows.iter().map(|r| r.upper_slack).fold(f64::INFINITY, f64::min),
        total_prob: log_sum_exp(&logs).exp(),
    })
}

/// The Sanov weights `w_n(Q) = Pr(P_n = Q | P_n ∈ E)` over `E ∩ P_n`.
#[derive(Debug, Clone)]
pub struct ConditionalWeights {
    pub constraint: MomentConstraint,
    pub n: u64,
    pub entries: Vec<(TypeClass, f64)>,
    /// `ln Pr(P_n ∈ E)`.
    pub log_event_prob: f64,
    /// `Σ w_n(Q)`, 1 up to rounding.
    pub total: f64,
}

impl ConditionalWeights {
    /// `Σ_Q w_n(Q) · L(X_{1:m} | P_n = Q)`.
    pub fn block_law(&self, m: usize) -> Result<BlockLaw> {
        let first = &self.entries[0].0;
        let k = first.alphabet.size();
        let words = word_count(k, m, DEFAULT_WORD_CAP)?;
        if m as u64 > self.n {
            return Err(Error::InvalidArgument(format!("block length {m} exceeds n = {}", self.n)));
        }
        let mut mass = vec![0.0; words];
        let mut scratch = vec![0.0; words];
        for (t, w) in &self.entries {
            if *w == 0.0 {
                continue;
            }
            fill_hypergeometric(&t.counts, m, &mut scratch);
            mass.iter_mut().zip(&scratch).for_each(|(acc, v)| *acc += w * v);
        }
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|v| *v /= total);
        Ok(BlockLaw::from_raw(first.alphabet.clone(), m, mass))
    }

    /// `β_n(δ)`: total weight of types with `‖Q - center‖_1 > δ`.
    pub fn mass_beyond(&self, center: &Distribution, delta: f64) -> f64 {
        let n = self.n as f64;
        self.entries
            .iter()
            .filter(|(t, _)| {
                let l1: f64 = t.counts.iter().zip(center.masses()).map(|(&c, &p)| (c as f64 / n - p).abs()).sum();
                l1 > delta
            })
            .map(|(_, w)| w)
            .sum()
    }
}

/// Exact Sanov weights of the types in `E ∩ P_n`.
pub fn conditional_weights(p: &Distribution, c: &MomentConstraint, n: u64) -> Result<ConditionalWeights> {
    p.require_strictly_positive()?;
    check_same_alphabet(c.statistic().alphabet(), p.alphabet())?;
    let k = p.size();
    let lf = LnFactorials::up_to(n);
    let ln_p: Vec<f64> = p.masses().iter().map(|v| v.ln()).collect();
    let admitted = par_fold_types(k, n, DEFAULT_TYPE_CAP, |counts| {
        c.admits_counts(counts).then(|| (counts.to_vec(), lf.multinomial_ln_pmf(counts, &ln_p)))
    })?;
    if admitted.is_empty() {
        let smallest_feasible = (1..=FEASIBILITY_PROBE_LIMIT)
            .filter(|&m| type_count(k, m) <= 1e6)
            .find(|&m| Compositions::new(k, m).any(|counts| c.admits_counts(&counts)));
        return Err(Error::EmptyConstraintSet { n, smallest_feasible });
    }
    let logs: Vec<f64> = admitted.iter().map(|(_, l)| *l).collect();
    let log_event_prob = log_sum_exp(&logs);
    let alphabet = p.alphabet().clone();
    let entries: Vec<(TypeClass, f64)> = admitted
        .into_iter()
        .map(|(counts, l)| (TypeClass { alphabet: alphabet.clone(), counts, n }, exp_clamped(l - log_event_prob)))
        .collect();
    let total = entries.iter().map(|(_, w)| w).sum();
    Ok(ConditionalWeights { constraint: c.clone(), n, entries, log_event_prob, total })
}

/// Fills `out` with the multiple hypergeometric law of the first `m` draws
/// without replacement from an urn with `counts`.
fn fill_hypergeometric(counts: &[u64], m: usize, out: &mut [f64]) {
    let k = counts.len();
    let n: u64 = counts.iter().sum();
    let mut left = counts.to_vec();
    for (idx, slot) in out.iter_mut().enumerate() {
        left.copy_from_slice(counts);
        // Decode most-significant first.
        let mut p = 1.0;
        let mut stride = k.pow(m as u32 - 1);
        let mut rest = idx;
        for i in 0..m {
            let x = rest / stride;
            rest %= stride;
            stride = (stride / k).max(1);
            if left[x] == 0 {
                p = 0.0;
                break;
            }
            p *= left[x] as f64 / (n - i as u64) as f64;
            left[x] -= 1;
        }
        *slot = p;
    }
}

/// Law of the first `m` coordinates of a uniformly random sequence of type `t`:
/// `Π_j (n_j)_{c_j} / (n)_m`.
pub fn hypergeometric_block_law(t: &TypeClass, m: usize) -> Result<BlockLaw> {
    if m == 0 || m as u64 > t.n {
        return Err(Error::InvalidArgument(format!("block length {m} must be in 1..={}", t.n)));
    }
    let words = word_count(t.alphabet.size(), m, DEFAULT_WORD_CAP)?;
    let mut mass = vec![0.0; words];
    fill_hypergeometric(&t.counts, m, &mut mass);
    Ok(BlockLaw::from_raw(t.alphabet.clone(), m, mass))
}

/// Sampling-without-replacement versus with-replacement distance and its
/// collision bound `m(m-1)/(2n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeometricCheck {
    pub tv: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn hypergeometric_tv_check(t: &TypeClass, m: usize) -> Result<HypergeometricCheck> {
    let hyper = hypergeometric_block_law(t, m)?;
    let prod = product_block_law(&t.frequencies(), m)?;
    let tv = tv_distance(&hyper, &prod)?;
    let bound = (m * (m - 1)) as f64 / (2 * t.n) as f64;
    Ok(HypergeometricCheck { tv, bound, pass: tv <= bound + 1e-12 })
}

/// Outcome of [`hypergeometric_tv_check`] over every type of one size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeometricSweep {
    pub types: u64,
    pub violations: u64,
    pub max_tv: f64,
    pub bound: f64,
}

pub fn hypergeometric_sweep(alphabet: &Arc<Alphabet>, n: u64, m: usize) -> Result<HypergeometricSweep> {
    let k = alphabet.size();
    if m == 0 || m as u64 > n {
        return Err(Error::InvalidArgument(format!("block length {m} must be in 1..={n}")));
    }
    let words = word_count(k, m, DEFAULT_WORD_CAP)?;
    let bound = (m * (m - 1)) as f64 / (2 * n) as f64;
    let tvs = par_fold_types(k, n, DEFAULT_TYPE_CAP, |counts| {
        let mut hyper = vec![0.0; words];
        fill_hypergeometric(counts, m, &mut hyper);
        let freq = Distribution::from_raw(alphabet.clone(), counts.iter().map(|&c| c as f64 / n as f64).collect());
        let prod = product_block_law(&freq, m).ok()?;
        let tv = 0.5 * hyper.iter().zip(prod.masses()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        Some(tv)
    })?;
    Ok(HypergeometricSweep {
        types: tvs.len() as u64,
        violations: tvs.iter().filter(|&&tv| tv > bound + 1e-12).count() as u64,
        max_tv: tvs.iter().copied().fold(0.0, f64::max),
        bound,
    })
}

/// Exact `L(X_{1:m} | P_n ∈ E)`.
pub fn conditional_block_law(p: &Distribution, c: &MomentConstraint, n: u64, m: usize) -> Result<BlockLaw> {
    if m as u64 > n {
        return Err(Error::InvalidArgument(format!("block length {m} exceeds n = {n}")));
    }
    conditional_weights(p, c, n)?.block_law(m)
}

/// One row of a convergence sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub n: u64,
    pub m: usize,
    /// Exact `‖L(X_{1:m} | P_n ∈ E) - (P*)^{⊗m}‖_TV`.
    pub tv: f64,
    /// `C (m / n^{1/3} + m² / n)` with the fitted constant.
    pub envelope_thm: f64,
    /// `m √(ln n / n) + m(m-1)/(2n)`.
    pub envelope_alt: f64,
    /// `β_n(δ)` at `δ = n^{-1/3}`.
    pub bad_mass: f64,
    pub delta: f64,
}

impl ConvergenceRecord {
    /// Whether `tv ≤ envelope_alt + 2 β_n`.
    pub fn within_alt_envelope(&self) -> bool {
        self.tv <= self.envelope_alt + 2.0 * self.bad_mass
    }
}

pub fn theorem_envelope_shape(n: u64, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    m / n.cbrt() + m * m / n
}

pub fn alt_envelope(n: u64, m: usize) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    mf * (nf.ln() / nf).sqrt() + mf * (mf - 1.0) / (2.0 * nf)
}

/// Result of [`theorem1_sweep`].
#[derive(Debug, Clone)]
pub struct Theorem1Sweep {
    pub projection: TiltSolution,
    pub records: Vec<ConvergenceRecord>,
    /// `max_n tv / (m/n^{1/3} + m²/n)`.
    pub fitted_constant: f64,
    /// Smallest grid `n` from which the alternative envelope holds and the bad
    /// mass is nonincreasing for every later grid point.
    pub n0: Option<u64>,
}

/// Exact conditional block laws against `(P*)^{⊗m}` along `n_grid`.
pub fn theorem1_sweep(p: &Distribution, c: &MomentConstraint, m: usize, n_grid: &[u64]) -> Result<Theorem1Sweep> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("n grid is empty".into()));
    }
    let projection = i_project(p, c)?;
    let target = product_block_law(&projection.tilted, m)?;
    let mut records = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let weights = conditional_weights(p, c, n)?;
        let law = weights.block_law(m)?;
        let tv = tv_distance(&law, &target)?;
        let delta = (n as f64).powf(-1.0 / 3.0);
        records.push(ConvergenceRecord {
            n,
            m,
            tv,
            envelope_thm: 0.0,
            envelope_alt: alt_envelope(n, m),
            bad_mass: weights.mass_beyond(&projection.tilted, delta),
            delta,
        });
    }
    let fitted_constant = records.iter().map(|r| r.tv / theorem_envelope_shape(r.n, r.m)).fold(0.0, f64::max);
    for r in &mut records {
        r.envelope_thm = fitted_constant * theorem_envelope_shape(r.n, r.m);
    }
    let n0 = settled_from(&records);
    Ok(Theorem1Sweep { projection, records, fitted_constant, n0 })
}

fn settled_from(records: &[ConvergenceRecord]) -> Option<u64> {
    let mut start = records.len();
    for i in (0..records.len()).rev() {
        let ok_env = records[i].within_alt_envelope();
        let ok_mono = i + 1 == records.len() || records[i + 1].bad_mass <= records[i].bad_mass;
        if ok_env && ok_mono {
            start = i;
        } else {
            break;
        }
    }
    records.get(start).map(|r| r.n)
}

/// Lattice resolution used by [`kl_gap`]: `grid_density`, reduced until the
/// number of lattice points is at most this.
const KL_GAP_LATTICE_CAP: f64 = 2e6;

/// The KL gap `η(δ) = inf { D(Q‖P) - D(P*‖P) : Q ∈ E, ‖Q - P*‖_1 > δ }`.
///
/// Feasible points of a type lattice are pulled back along the segment
/// toward `P*` until they sit at distance exactly `δ`; since `D(·‖P)` is
/// convex on `E` and minimized at `P*`, that only lowers the objective. The
/// infimum over those refined points is returned, clamped at zero, or
/// `+inf` when nothing feasible lies beyond `δ`.
///
/// Errors with [`Error::NonUniqueProjection`] when two well-separated
/// lattice points tie for the smallest divergence.
pub fn kl_gap(p: &Distribution, c: &MomentConstraint, delta: f64, grid_density: u64) -> Result<f64> {
    if grid_density < 100 {
        return Err(Error::InvalidArgument(format!("grid density must be at least 100, got {grid_density}")));
    }
    if c.statistic().dim() > 2 {
        return Err(Error::InvalidArgument("kl_gap supports one- or two-dimensional constraints".into()));
    }
    let projection = i_project(p, c)?;
    if delta <= 0.0 {
        return Ok(0.0);
    }
    let star = projection.tilted.masses().to_vec();
    let base = projection.divergence;
    let k = p.size();
    let mut res = grid_density;
    while type_count(k, res) > KL_GAP_LATTICE_CAP && res > 1 {
        res = res * 3 / 4;
    }
    let resf = res as f64;
    let pm = p.masses();
    let divergence =
        |q: &[f64]| -> f64 { q.iter().zip(pm).filter(|(&qi, _)| qi > 0.0).map(|(&qi, &pi)| qi * (qi / pi).ln()).sum() };
    let rows = par_fold_types(k, res, f64::INFINITY, |counts| {
        if !c.admits_counts(counts) {
            return None;
        }
        let q: Vec<f64> = counts.iter().map(|&x| x as f64 / resf).collect();
        let dist: f64 = q.iter().zip(&star).map(|(a, b)| (a - b).abs()).sum();
        let raw = divergence(&q);
        let refined = if dist > delta {
            let s = delta / dist;
            let pulled: Vec<f64> = star.iter().zip(&q).map(|(&ps, &qi)| ps + s * (qi - ps)).collect();
            Some(divergence(&pulled))
        } else {
            None
        };
        Some((q, raw, refined))
    })?;

    let mut best: Option<(&[f64], f64)> = None;
    for (q, raw, _) in &rows {
        match best {
            Some((_, d)) if *raw >= d => {}
            _ => best = Some((q, *raw)),
        }
    }
    if let Some((bq, bd)) = best {
        let separation = 4.0 * k as f64 / resf;
        if let Some((q, _, _)) = rows.iter().find(|(q, raw, _)| {
            (raw - bd).abs() <= 1e-9 && q.iter().zip(bq).map(|(a, b)| (a - b).abs()).sum::<f64>() > separation
        }) {
            return Err(Error::NonUniqueProjection(bq.to_vec(), q.clone()));
        }
    }

    let eta = rows.iter().filter_map(|(_, _, r)| *r).fold(f64::INFINITY, f64::min) - base;
    Ok(eta.max(0.0))
}

/// `(n + 1)^k e^{-n η}`, the bad-mass envelope implied by a KL gap `η`.
pub fn kl_gap_envelope(k: usize, n: u64, eta: f64) -> f64 {
    let nf = n as f64;
    (k as f64 * (nf + 1.0).ln() - nf * eta).exp()
}

/// Monte Carlo summary of how tightly empirical entropies concentrate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub sample_size: u64,
    pub samples: u64,
    pub interval: (f64, f64),
    /// Fraction of sampled types whose entropy lies in `interval`.
    pub coverage: f64,
    /// Empirical quantiles `(level, value)` of `2N·ΔH`, where `ΔH = D(P_N‖p)`
    /// (equal to `ln k - H(P_N)` for a uniform `p`).
    pub quantiles: Vec<(f64, f64)>,
    pub entropy_mean: f64,
}

impl ConcentrationReport {
    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles.iter().find(|(l, _)| (*l - level).abs() < 1e-12).map(|(_, v)| *v)
    }
}

pub const CONCENTRATION_LEVELS: [f64; 5] = [0.5, 0.9, 0.95, 0.975, 0.99];

/// Draws `samples` multinomial types of size `sample_size` from `p` and
/// reports how often their entropy falls in `interval`.
pub fn entropy_concentration(
    p: &Distribution,
    sample_size: u64,
    samples: u64,
    seed: u64,
    interval: (f64, f64),
) -> Result<ConcentrationReport> {
    p.require_strictly_positive()?;
    if sample_size == 0 || samples == 0 {
        return Err(Error::InvalidArgument("sample size and sample count must be positive".into()));
    }
    let k = p.size();
    let mult = Multinomial::new(sample_size, p.masses());
    let chunks: Vec<(u64, u64)> = rng::chunks(samples).collect();
    let draws: Vec<Vec<(f64, f64)>> = chunks
        .par_iter()
        .map(|&(id, len)| {
            let mut r = rng::stream(seed, id);
            let mut counts = vec![0u64; k];
            (0..len)
                .map(|_| {
                    mult.sample_into(&mut r, &mut counts);
                    let freq = Distribution::from_raw(
                        p.alphabet().clone(),
                        counts.iter().map(|&c| c as f64 / sample_size as f64).collect(),
                    );
                    let h = entropy(&freq);
                    let d = kl_divergence(&freq, p).expect("p strictly positive");
                    (h, 2.0 * sample_size as f64 * d)
                })
                .collect()
        })
        .collect();
    let draws: Vec<(f64, f64)> = draws.into_iter().flatten().collect();
    let inside = draws.iter().filter(|(h, _)| interval.0 <= *h && *h <= interval.1).count();
    let mut stats: Vec<f64> = draws.iter().map(|(_, s)| *s).collect();
    stats.sort_by(f64::total_cmp);
    let quantiles = CONCENTRATION_LEVELS.iter().map(|&l| (l, empirical_quantile(&stats, l))).collect();
    Ok(ConcentrationReport {
        sample_size,
        samples,
        interval,
        coverage: inside as f64 / samples as f64,
        quantiles,
        entropy_mean: draws.iter().map(|(h, _)| h).sum::<f64>() / samples as f64,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tilt::MomentFunction;
    use approx::assert_abs_diff_eq;

    fn binary_type(a: u64, b: u64) -> TypeClass {
        TypeClass::new(Alphabet::binary(), vec![a, b]).unwrap()
    }

    fn ber_at_least(q: f64, alpha: f64) -> (Distribution, MomentConstraint) {
        let p = Distribution::bernoulli(q).unwrap();
        let c = MomentConstraint::at_least(MomentFunction::binary_identity(), alpha).unwrap();
        (p, c)
    }

    #[test]
    fn enumeration_examples() {
        let a2 = Alphabet::binary();
        let types: Vec<Vec<u64>> = enumerate_types(&a2, 2).unwrap().map(|t| t.counts).collect();
        assert_eq!(types, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        let a3 = Alphabet::numbered(3).unwrap();
        assert_eq!(enumerate_types(&a3, 2).unwrap().count(), 6);
        assert!(enumerate_types(&Alphabet::numbered(6).unwrap(), 0).is_err());
        let err = enumerate_types_capped(&Alphabet::numbered(6).unwrap(), 100, 1e6).err().unwrap();
        assert!(matches!(err, Error::CapExceeded { count, .. } if count == 96_560_646.0));
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        for (k, n) in [(3usize, 7u64), (4, 5), (5, 3)] {
            let all: Vec<Vec<u64>> = Compositions::new(k, n).collect();
            assert_eq!(all.len() as f64, type_count(k, n));
            assert!(all.windows(2).all(|w| w[0] < w[1]));
            assert!(all.iter().all(|c| c.iter().sum::<u64>() == n));
        }
    }

    #[test]
    fn type_log_prob_examples() {
        let half = Distribution::bernoulli(0.5).unwrap();
        assert_abs_diff_eq!(type_log_prob(&binary_type(1, 1), &half).unwrap(), 0.5f64.ln(), epsilon = 1e-12);
        for n in [1, 5, 30] {
            assert_abs_diff_eq!(
                type_log_prob(&binary_type(n, 0), &half).unwrap(),
                -(n as f64) * 2f64.ln(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn sanov_examples() {
        let half = Distribution::bernoulli(0.5).unwrap();
        let tight = sanov_bounds_check(&binary_type(12, 0), &half).unwrap();
        assert!(tight.pass);
        assert_abs_diff_eq!(tight.upper_slack, 0.0, epsilon = 1e-9);
        let p = Distribution::bernoulli(0.3).unwrap();
        for t in enumerate_types(p.alphabet(), 10).unwrap() {
            assert!(sanov_bounds_check(&t, &p).unwrap().pass);
        }
        let p3 = Distribution::new(Alphabet::numbered(3).unwrap(), vec![0.2, 0.45, 0.35]).unwrap();
        let sweep = sanov_sweep(&p3, 15).unwrap();
        assert_eq!(sweep.violations, 0);
        assert_eq!(sweep.types, 136);
        assert_abs_diff_eq!(sweep.total_prob, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn conditional_weights_examples() {
        let (p, c) = ber_at_least(0.5, 0.75);
        let w = conditional_weights(&p, &c, 4).unwrap();
        let got: Vec<(Vec<u64>, f64)> = w.entries.iter().map(|(t, w)| (t.counts.clone(), *w)).collect();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].0, vec![0, 4]);
        assert_abs_diff_eq!(got[0].1, 0.2, epsilon = 1e-14);
        assert_eq!(got[1].0, vec![1, 3]);
        assert_abs_diff_eq!(got[1].1, 0.8, epsilon = 1e-14);

        let (p, vacuous) = ber_at_least(0.3, 0.0);
        let w = conditional_weights(&p, &vacuous, 6).unwrap();
        assert_eq!(w.entries.len(), 7);
        for (t, wt) in &w.entries {
            assert_abs_diff_eq!(*wt, type_log_prob(t, &p).unwrap().exp(), epsilon = 1e-14);
        }

        let h = MomentFunction::face_value(6).unwrap();
        let die = Distribution::uniform(h.alphabet().clone());
        let six = MomentConstraint::at_least(h, 6.0).unwrap();
        let w = conditional_weights(&die, &six, 5).unwrap();
        assert_eq!(w.entries.len(), 1);
        assert_eq!(w.entries[0].0.counts(), &[0, 0, 0, 0, 0, 5]);
        assert_eq!(w.entries[0].1, 1.0);
    }

    #[test]
    fn empty_constraint_names_smallest_feasible_n() {
        let h = MomentFunction::face_value(6).unwrap();
        let die = Distribution::uniform(h.alphabet().clone());
        let c = MomentConstraint::equality(h, vec![4.5]).unwrap();
        let err = conditional_weights(&die, &c, 3).unwrap_err();
        assert_eq!(err, Error::EmptyConstraintSet { n: 3, smallest_feasible: Some(2) });
        let h = MomentFunction::binary_identity();
        let c = MomentConstraint::equality(h, vec![1.0 / 3.0]).unwrap();
        let err = conditional_weights(&Distribution::bernoulli(0.5).unwrap(), &c, 4).unwrap_err();
        assert_eq!(err, Error::EmptyConstraintSet { n: 4, smallest_feasible: Some(3) });
    }

    #[test]
    fn hypergeometric_examples() {
        let law = hypergeometric_block_law(&binary_type(1, 1), 2).unwrap();
        assert_eq!(law.masses(), &[0.0, 0.5, 0.5, 0.0]);
        let all_first = hypergeometric_block_law(&binary_type(5, 0), 3).unwrap();
        assert_eq!(all_first.prob(&[0, 0, 0]), 1.0);
        let t = TypeClass::new(Alphabet::numbered(3).unwrap(), vec![2, 3, 5]).unwrap();
        assert_eq!(hypergeometric_block_law(&t, 1).unwrap().masses(), t.frequencies().masses());
        assert!(hypergeometric_block_law(&binary_type(1, 1), 3).is_err());
    }

    #[test]
    fn hypergeometric_check_examples() {
        let tight = hypergeometric_tv_check(&binary_type(1, 1), 2).unwrap();
        assert_abs_diff_eq!(tight.tv, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tight.bound, 0.5, epsilon = 1e-15);
        assert!(tight.pass);
        let one = hypergeometric_tv_check(&binary_type(3, 4), 1).unwrap();
        assert!(one.tv.abs() < 1e-15 && one.bound == 0.0 && one.pass);
        let a3 = Alphabet::numbered(3).unwrap();
        for n in [10, 20, 40] {
            for m in [2, 3] {
                let s = hypergeometric_sweep(&a3, n, m).unwrap();
                assert_eq!(s.violations, 0, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn conditional_block_law_examples() {
        let (p, c) = ber_at_least(0.5, 0.75);
        let law = conditional_block_law(&p, &c, 4, 1).unwrap();
        assert_abs_diff_eq!(law.masses()[1], 0.8, epsilon = 1e-14);
        // Frozen from a direct binomial-sum evaluation of the S ≥ 300 tail.
        let law = conditional_block_law(&p, &c, 400, 1).unwrap();
        assert_abs_diff_eq!(law.masses()[1], 0.7512201260600677, epsilon = 1e-10);
        assert!((law.masses()[1] - 0.75).abs() < 0.02);

        let (p, vacuous) = ber_at_least(0.3, 0.0);
        let law = conditional_block_law(&p, &vacuous, 9, 1).unwrap();
        assert_abs_diff_eq!(law.masses()[1], 0.3, epsilon = 1e-14);
    }

    #[test]
    fn conditional_block_law_is_exchangeable() {
        let h = MomentFunction::face_value(4).unwrap();
        let p = Distribution::new(h.alphabet().clone(), vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let c = MomentConstraint::at_least(h, 2.8).unwrap();
        let w = conditional_weights(&p, &c, 12).unwrap();
        let two = w.block_law(2).unwrap();
        let one = w.block_law(1).unwrap();
        let one = one.marginal(0);
        assert!(tv_distance(&two.marginal(0), &one).unwrap() < 1e-10);
        assert!(tv_distance(&two.marginal(1), &one).unwrap() < 1e-10);
        assert!(tv_distance(&two.prefix(1).unwrap(), &product_block_law(&one, 1).unwrap()).unwrap() < 1e-10);
    }

    #[test]
    fn sweep_on_bernoulli_benchmark() {
        let (p, c) = ber_at_least(0.5, 0.75);
        let grid: Vec<u64> = (1..=20).map(|i| 20 * i).collect();
        let sweep = theorem1_sweep(&p, &c, 1, &grid).unwrap();
        let first = sweep.records[0].tv;
        let last = sweep.records.last().unwrap().tv;
        assert!(sweep.records.iter().all(|r| r.tv > 0.0));
        assert!(last < first / 2.0);
        assert!(last < 0.02);
        assert_eq!(sweep.n0, Some(20));
        assert!(sweep.records.windows(2).all(|w| w[1].bad_mass <= w[0].bad_mass));
        assert!(sweep.records.iter().all(|r| r.tv <= r.envelope_thm + 1e-15));
    }

    #[test]
    fn vacuous_sweep_is_pure_hypergeometric_error() {
        let (p, c) = ber_at_least(0.3, 0.0);
        let sweep = theorem1_sweep(&p, &c, 2, &[10, 20, 40]).unwrap();
        for r in &sweep.records {
            assert!(r.tv <= 2.0 / (2 * r.n) as f64 + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn kl_gap_examples() {
        let (p, c) = ber_at_least(0.5, 0.75);
        assert_eq!(kl_gap(&p, &c, 0.0, 100).unwrap(), 0.0);
        let eta = kl_gap(&p, &c, 0.1, 200).unwrap();
        // Independent 1-d scan: Q = Ber(q), q ≥ 0.75, 2|q - 0.75| > 0.1 ⇒ infimum at q = 0.8.
        let d = |q: f64| q * (2.0 * q).ln() + (1.0 - q) * (2.0 * (1.0 - q)).ln();
        let scan = (0..=100_000)
            .map(|i| 0.8 + 1e-9 + 0.2 * i as f64 / 100_000.0)
            .filter(|q| *q < 1.0)
            .map(d)
            .fold(f64::INFINITY, f64::min)
            - d(0.75);
        assert!(eta > 0.0);
        assert_abs_diff_eq!(eta, scan, epsilon = 1e-6);
        let etas: Vec<f64> =
            [0.0, 0.02, 0.05, 0.1, 0.2, 0.3].iter().map(|&dl| kl_gap(&p, &c, dl, 100).unwrap()).collect();
        assert!(etas.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(kl_gap(&p, &c, 0.6, 100).unwrap(), f64::INFINITY);
        assert!(kl_gap(&p, &c, 0.1, 50).is_err());
    }

    #[test]
    fn kl_gap_bounds_exact_bad_mass() {
        let (p, c) = ber_at_least(0.5, 0.75);
        let star = i_project(&p, &c).unwrap().tilted;
        let delta = 0.1;
        let eta = kl_gap(&p, &c, delta, 400).unwrap();
        for n in [40, 100, 200] {
            let beta = conditional_weights(&p, &c, n).unwrap().mass_beyond(&star, delta);
            assert!(beta <= kl_gap_envelope(2, n, eta), "n={n}: {beta}");
        }
    }

    #[test]
    fn concentration_full_range_and_determinism() {
        let die = Distribution::uniform(Alphabet::numbered(6).unwrap());
        let r = entropy_concentration(&die, 200, 5_000, 3, (0.0, 6f64.ln())).unwrap();
        assert_eq!(r.coverage, 1.0);
        let again = entropy_concentration(&die, 200, 5_000, 3, (0.0, 6f64.ln())).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn concentration_quantile_scales_with_n() {
        let die = Distribution::uniform(Alphabet::numbered(6).unwrap());
        let a = entropy_concentration(&die, 1_000, 20_000, 11, (1.786, 1.792)).unwrap();
        let b = entropy_concentration(&die, 10_000, 20_000, 12, (1.786, 1.792)).unwrap();
        let dh = |r: &ConcentrationReport| r.quantile(0.95).unwrap() / (2.0 * r.sample_size as f64);
        let ratio = dh(&a) / dh(&b);
        assert!((ratio / 10.0 - 1.0).abs() < 0.15, "ratio {ratio}");
    }
}
