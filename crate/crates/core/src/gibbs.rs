//! Monte Carlo window conditioning.
//!
//! Draws length-`n` i.i.d. sequences, keeps those whose empirical average of
//! `h` falls in an open window `(a, b)`, and records the first `m` symbols.
//! Two proposal laws are supported: the baseline itself (plain rejection) and
//! an exponential tilt, reweighted by the likelihood ratio
//! `Π_i e^{-λ h(x_i) + M(λ)}` and self-normalized. The tilt is the I-projection
//! of the baseline onto the closed window, i.e. it puts its mean on the
//! endpoint nearest `E_p[h]`, which is where the conditional law piles up.
//! Centering the proposal on `(a + b)/2` instead leaves almost no proposals
//! near that endpoint once `n ε_n²` is large.
//!
//! A sequence is generated as its type (multinomial counts) followed by the
//! first `m` positions of a uniform shuffle of that type. That is the same
//! joint law as drawing the symbols one by one, and the window event only
//! depends on the type.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, Multinomial};
use crate::simplex::{product_block_law, tv_distance, word_count, BlockLaw, Distribution, DEFAULT_WORD_CAP};
use crate::tilt::{i_project, log_partition, solve_moment_equality, tilt, MomentConstraint, MomentFunction};

/// Smallest effective sample size at which an estimate is considered publishable.
pub const MIN_PUBLISHABLE_ESS: f64 = 50.0;
/// Smallest proposal budget accepted by the samplers.
pub const MIN_PROPOSALS: u64 = 1_000;

/// `ε_n = c · n^{-γ}` with `0 < γ < ½`, so that `n ε_n² → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSchedule {
    amplitude: f64,
    exponent: f64,
}

impl WindowSchedule {
    pub fn new(amplitude: f64, exponent: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!("window amplitude must be positive, got {amplitude}")));
        }
        // n ε_n² = c² n^{1 - 2γ} diverges iff 1 - 2γ > 0.
        if !(exponent > 0.0 && 1.0 - 2.0 * exponent > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "window exponent must lie in (0, 1/2) so that n·eps² diverges, got {exponent}"
            )));
        }
        Ok(WindowSchedule { amplitude, exponent })
    }

    /// `c = ½ (max h - min h)`, `γ = ¼`.
    pub fn default_for(h: &MomentFunction) -> Self {
        let (lo, hi) = h.range();
        WindowSchedule { amplitude: 0.5 * (hi - lo), exponent: 0.25 }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn epsilon(&self, n: u64) -> f64 {
        self.amplitude * (n as f64).powf(-self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    Rejection,
    TiltImportance,
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMethod::Rejection => "rejection",
            SamplingMethod::TiltImportance => "importance",
        })
    }
}

impl FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rejection" => Ok(SamplingMethod::Rejection),
            "importance" | "tilt-importance" => Ok(SamplingMethod::TiltImportance),
            other => Err(Error::InvalidArgument(format!("unknown sampling method {other:?}"))),
        }
    }
}

/// Point estimates with standard errors from one sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// `1 / Σ w_i²` over normalized weights; equals `accepted` for rejection.
    pub ess: f64,
    pub seed: u64,
}

impl McEstimate {
    pub fn publishable(&self) -> bool {
        self.ess >= MIN_PUBLISHABLE_ESS
    }
}

/// Accepted blocks and their self-normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSample {
    pub method: SamplingMethod,
    /// Per-word probability estimates of the empirical block law.
    pub estimate: McEstimate,
    pub block_law: BlockLaw,
    /// `(word index, normalized weight)` for each accepted block.
    pub draws: Vec<(usize, f64)>,
}

impl ConditionalSample {
    /// Weighted mean of `f(word)` and its standard error,
    /// `sqrt(Σ w_i² (f_i - μ)² · ess/(ess - 1))`, which is the usual
    /// `s/√N` when all weights are equal.
    pub fn functional(&self, f: impl Fn(usize) -> f64) -> (f64, f64) {
        weighted_mean_se(&self.draws, self.estimate.ess, f)
    }
}

fn weighted_mean_se(draws: &[(usize, f64)], ess: f64, f: impl Fn(usize) -> f64) -> (f64, f64) {
    let mean: f64 = draws.iter().map(|&(w, wt)| wt * f(w)).sum();
    if ess <= 1.0 {
        return (mean, f64::INFINITY);
    }
    let var: f64 = draws.iter().map(|&(w, wt)| wt * wt * (f(w) - mean).powi(2)).sum::<f64>() * ess / (ess - 1.0);
    (mean, var.sqrt())
}

/// Samples the first `m` coordinates of length-`n` sequences conditioned on
/// `a < (1/n) Σ h(X_i) < b`.
#[allow(clippy::too_many_arguments)]
pub fn sample_conditional_blocks(
    p: &Distribution,
    h: &MomentFunction,
    window: (f64, f64),
    n: u64,
    m: usize,
    proposals: u64,
    method: SamplingMethod,
    seed: u64,
) -> Result<ConditionalSample> {
    p.require_strictly_positive()?;
    if **h.alphabet() != **p.alphabet() {
        return Err(Error::AlphabetMismatch);
    }
    let (a, b) = window;
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("window ({a}, {b}) is empty")));
    }
    let event = MomentConstraint::window(h.clone(), 0.5 * (a + b), 0.5 * (b - a))?;
    if proposals < MIN_PROPOSALS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_PROPOSALS} proposals, got {proposals}")));
    }
    if m == 0 || m as u64 > n {
        return Err(Error::InvalidArgument(format!("block length {m} must be in 1..={n}")));
    }
    let k = p.size();
    let words = word_count(k, m, DEFAULT_WORD_CAP)?;

    // Proposal law and the per-type log likelihood ratio against the baseline.
    let (proposal, lambda, log_z) = match method {
        SamplingMethod::Rejection => (p.clone(), 0.0, 0.0),
        SamplingMethod::TiltImportance => {
            let lambda = i_project(p, &event)?.lambda[0];
            (tilt(p, h, &[lambda])?, lambda, log_partition(p, h, &[lambda])?)
        }
    };
    let mult = Multinomial::new(n, proposal.masses());
    let chunks: Vec<(u64, u64)> = rng::chunks(proposals).collect();
    let accepted: Vec<Vec<(usize, f64)>> = chunks
        .par_iter()
        .map(|&(id, len)| {
            let mut r = rng::stream(seed, id);
            let mut counts = vec![0u64; k];
            let mut word = vec![0usize; m];
            let mut out = Vec::new();
            for _ in 0..len {
                mult.sample_into(&mut r, &mut counts);
                let sum = h.sum_over_counts(&counts);
                if !event.admits_sum(&sum, n) {
                    continue;
                }
                rng::draw_without_replacement(&mut r, &counts, &mut word);
                let idx = word.iter().fold(0, |acc, &x| acc * k + x);
                let log_w = -lambda * sum[0] + n as f64 * log_z;
                out.push((idx, log_w));
            }
            out
        })
        .collect();
    let accepted: Vec<(usize, f64)> = accepted.into_iter().flatten().collect();
    if accepted.is_empty() {
        return Err(Error::NoAcceptance { proposals, advice: "use the importance method or a wider window".into() });
    }

    let max_lw = accepted.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = accepted.iter().map(|(_, l)| (l - max_lw).exp()).sum();
    let draws: Vec<(usize, f64)> = accepted.iter().map(|&(w, l)| (w, (l - max_lw).exp() / total)).collect();
    let ess = 1.0 / draws.iter().map(|(_, w)| w * w).sum::<f64>();

    let mut mass = vec![0.0; words];
    for &(w, wt) in &draws {
        mass[w] += wt;
    }
    let std_errors = (0..words).map(|target| weighted_mean_se(&draws, ess, |w| (w == target) as u8 as f64).1).collect();
    let estimate = McEstimate {
        estimates: mass.clone(),
        std_errors,
        proposals,
        accepted: draws.len() as u64,
        acceptance_rate: draws.len() as f64 / proposals as f64,
        ess,
        seed,
    };
    let block_law = BlockLaw::from_raw(p.alphabet().clone(), m, mass);
    Ok(ConditionalSample { method, estimate, block_law, draws })
}

/// One row of [`window_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSweepRow {
    pub n: u64,
    pub epsilon: f64,
    /// Plug-in TV between the empirical block law and `(P*)^{⊗m}`. Biased
    /// upward by sampling noise; `se` is its linearized standard error.
    pub tv: f64,
    pub se: f64,
    pub acceptance_rate: f64,
    pub ess: f64,
    pub method: SamplingMethod,
    pub seed: u64,
}

/// Conditions on `(α - ε_n, α + ε_n)` for each `n` and measures the distance
/// from the empirical block law to the tilt hitting `α`.
#[allow(clippy::too_many_arguments)]
pub fn window_sweep(
    p: &Distribution,
    h: &MomentFunction,
    alpha: f64,
    schedule: &WindowSchedule,
    n_grid: &[u64],
    m: usize,
    proposals: u64,
    method: SamplingMethod,
    seed: u64,
) -> Result<Vec<WindowSweepRow>> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("n grid is empty".into()));
    }
    let star = solve_moment_equality(p, h, &[alpha])?.tilted;
    let target = product_block_law(&star, m)?;
    n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let epsilon = schedule.epsilon(n);
            let run_seed = rng::derive_seed(seed, i as u64);
            let sample =
                sample_conditional_blocks(p, h, (alpha - epsilon, alpha + epsilon), n, m, proposals, method, run_seed)?;
            let tv = tv_distance(&sample.block_law, &target)?;
            let emp = sample.block_law.masses();
            let exact = target.masses();
            let (_, se) = sample.functional(|w| 0.5 * (emp[w] - exact[w]).signum());
            Ok(WindowSweepRow {
                n,
                epsilon,
                tv,
                se,
                acceptance_rate: sample.estimate.acceptance_rate,
                ess: sample.estimate.ess,
                method,
                seed: run_seed,
            })
        })
        .collect()
}

/// Least-squares fit of `ln tv = intercept + slope · ln n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub grid: Vec<f64>,
}

pub fn rate_fit(records: &[(f64, f64)]) -> Result<RateFit> {
    if records.len() < 4 {
        return Err(Error::InvalidArgument(format!("rate fit needs at least 4 points, got {}", records.len())));
    }
    if let Some(&(n, tv)) = records.iter().find(|(_, tv)| !(*tv > 0.0)) {
        return Err(Error::NonPositiveRate(tv, n));
    }
    let xs: Vec<f64> = records.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = records.iter().map(|(_, tv)| tv.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs at least two distinct n".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(RateFit { slope, intercept, residual_rms: (rss / len).sqrt(), grid: records.iter().map(|(n, _)| *n).collect() })
}
