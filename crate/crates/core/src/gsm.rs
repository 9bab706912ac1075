//! Gaussian scale (and location-scale) mixtures.
//!
//! An exchangeable real sequence is generated by drawing a latent pair
//! `(M, V)` once from a mixing law `G` and then `X_1, X_2, ...` i.i.d.
//! `N(M, V)` given the latent. For `M = 0` the one-dimensional characteristic
//! function is radial:
//!
//! ```text
//! φ(t) = ∫ e^{-½ v t²} G(dv)
//! ```
//!
//! The latent pair is operational: the empirical mean and variance of a single
//! sequence converge to it almost surely. Conditioning a sequence on both
//! empirical moments lying in small windows around `(m, v)` drives its
//! coordinates towards `N(m, v)`, the maximum-entropy law for those moments.

use rand::Rng;
use rand_distr::{Distribution as _, Gamma, Normal};
use rayon::prelude::*;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on the sum of discrete mixing weights.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Simpson panels used for the inverse-gamma characteristic function.
const QUADRATURE_PANELS: usize = 4_000;

/// One atom of a discrete mixing law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub mean: f64,
    pub variance: f64,
    pub weight: f64,
}

/// The law `G` of the latent pair `(M, V)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingLaw {
    /// Degenerate latent: plain i.i.d. `N(mean, variance)`.
    Point { mean: f64, variance: f64 },
    /// Finitely many latent pairs.
    Discrete(Vec<Atom>),
    /// `V = scale / W` with `W ~ Gamma(shape, 1)`, and a fixed location.
    InverseGamma { shape: f64, scale: f64, mean: f64 },
}

impl MixingLaw {
    pub fn point(mean: f64, variance: f64) -> Result<Self> {
        check_variance(variance)?;
        check_finite("mean", mean)?;
        Ok(MixingLaw::Point { mean, variance })
    }

    /// Centered scale mixture over `(variance, weight)` pairs.
    pub fn scale_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::discrete(atoms.iter().map(|&(variance, weight)| Atom { mean: 0.0, variance, weight }).collect())
    }

    pub fn discrete(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("mixing law needs at least one atom".into()));
        }
        for a in &atoms {
            check_variance(a.variance)?;
            check_finite("mean", a.mean)?;
            if !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidArgument(format!("mixing weight {} is not a probability", a.weight)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDistribution(format!("mixing weights sum to {total}")));
        }
        Ok(MixingLaw::Discrete(atoms))
    }

    pub fn inverse_gamma(shape: f64, scale: f64, mean: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "inverse-gamma parameters ({shape}, {scale}) must be positive"
            )));
        }
        check_finite("mean", mean)?;
        Ok(MixingLaw::InverseGamma { shape, scale, mean })
    }

    /// Draws one latent `(M, V)`.
    pub fn draw_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match self {
            MixingLaw::Point { mean, variance } => (*mean, *variance),
            MixingLaw::Discrete(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight;
                    if u < acc {
                        return (a.mean, a.variance);
                    }
                }
                let last = atoms.last().expect("non-empty");
                (last.mean, last.variance)
            }
            MixingLaw::InverseGamma { shape, scale, mean } => {
                let w = Gamma::new(*shape, 1.0).expect("validated shape").sample(rng);
                (*mean, scale / w.max(f64::MIN_POSITIVE))
            }
        }
    }

    /// `E[e^{itX_1}]` as `(re, im)`.
    pub fn characteristic_function(&self, t: f64) -> (f64, f64) {
        let at = |m: f64, weight: f64| (weight * (t * m).cos(), weight * (t * m).sin());
        match self {
            MixingLaw::Point { mean, variance } => at(*mean, (-0.5 * variance * t * t).exp()),
            MixingLaw::Discrete(atoms) => atoms.iter().fold((0.0, 0.0), |(re, im), a| {
                let (r, i) = at(a.mean, a.weight * (-0.5 * a.variance * t * t).exp());
                (re + r, im + i)
            }),
            MixingLaw::InverseGamma { shape, scale, mean } => at(*mean, inverse_gamma_radial(*shape, *scale, t)),
        }
    }
}

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("variance {v} must be positive and finite")))
    }
}

fn check_finite(what: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} {x} is not finite")))
    }
}

/// `∫ e^{-½ v t²} G(dv)` for `V = β/W`, `W ~ Gamma(a, 1)`, by Simpson's rule in
/// `s = ln W`:
///
/// ```text
/// ∫ exp(a s − e^s − ln Γ(a) − ½ t² β e^{−s}) ds
/// ```
fn inverse_gamma_radial(a: f64, beta: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let lg = ln_gamma(a);
    let lo = -60.0 / a.min(1.0) - 5.0;
    let hi = (a + 60.0).ln() + 1.0;
    let step = (hi - lo) / QUADRATURE_PANELS as f64;
    let f = |s: f64| (a * s - s.exp() - lg - 0.5 * t * t * beta * (-s).exp()).exp();
    let mut acc = f(lo) + f(hi);
    for i in 1..QUADRATURE_PANELS {
        acc += f(lo + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * step / 3.0
}

/// One exchangeable sequence together with the latent pair that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSample {
    pub values: Vec<f64>,
    pub seed: u64,
    /// The latent `(M, V)` drawn for this sequence.
    pub latent: (f64, f64),
}

/// Draws `(M, V)` once from `g`, then `n` conditionally i.i.d. `N(M, V)` values.
pub fn sample_gsm(g: &MixingLaw, n: usize, seed: u64) -> Result<RealSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample length must be at least 1".into()));
    }
    let mut r = rng::stream(seed, 0);
    let values = draw_sequence(g, n, &mut r);
    Ok(RealSample { latent: values.1, values: values.0, seed })
}

fn draw_sequence<R: Rng + ?Sized>(g: &MixingLaw, n: usize, r: &mut R) -> (Vec<f64>, (f64, f64)) {
    let (m, v) = g.draw_latent(r);
    let normal = Normal::new(m, v.sqrt()).expect("positive variance");
    ((0..n).map(|_| normal.sample(r)).collect(), (m, v))
}

/// `(X̄_n, (1/n) Σ (X_i − X̄_n)²)`.
pub fn empirical_limits(s: &RealSample) -> Result<(f64, f64)> {
    mean_and_variance(&s.values)
}

fn mean_and_variance(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 values, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var))
}

/// Mean absolute error `|V̂_n − V|` of the empirical variance against each
/// sequence's own latent variance, over `sequences` independent sequences per
/// grid point.
pub fn variance_recovery(g: &MixingLaw, n_grid: &[usize], sequences: u64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if sequences == 0 {
        return Err(Error::InvalidArgument("need at least one sequence".into()));
    }
    n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if n < 2 {
                return Err(Error::InvalidArgument(format!("sequence length {n} is below 2")));
            }
            let sub = rng::derive_seed(seed, i as u64);
            let errs: Vec<f64> = (0..sequences)
                .into_par_iter()
                .map(|j| {
                    let mut r = rng::stream(sub, j);
                    let (xs, (_, v)) = draw_sequence(g, n, &mut r);
                    let (_, var) = mean_and_variance(&xs).expect("n ≥ 2");
                    (var - v).abs()
                })
                .collect();
            Ok((n as f64, errs.iter().sum::<f64>() / sequences as f64))
        })
        .collect()
}

/// A complex number as `(re, im)`.
pub type Complex = (f64, f64);

/// Empirical versus closed-form characteristic function of `X_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CfCheck {
    /// `(t, empirical (re, im), exact (re, im))`.
    pub rows: Vec<(f64, Complex, Complex)>,
    pub max_deviation: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Estimates `E[e^{itX_1}]` from `samples` independent sequences and returns
/// the largest modulus of the error over `t_grid`.
pub fn radial_cf_check(g: &MixingLaw, t_grid: &[f64], samples: u64, seed: u64) -> Result<CfCheck> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid point {t} is not finite")));
    }
    let chunks: Vec<(u64, u64)> = rng::chunks(samples).collect();
    let firsts: Vec<f64> = chunks
        .par_iter()
        .flat_map_iter(|&(id, len)| {
            let mut r = rng::stream(seed, id);
            (0..len).map(move |_| draw_sequence(g, 1, &mut r).0[0]).collect::<Vec<_>>()
        })
        .collect();
    let count = samples as f64;
    let rows: Vec<_> = t_grid
        .iter()
        .map(|&t| {
            let (re, im) = firsts.iter().fold((0.0, 0.0), |(re, im), x| (re + (t * x).cos(), im + (t * x).sin()));
            (t, (re / count, im / count), g.characteristic_function(t))
        })
        .collect();
    let max_deviation = rows.iter().map(|(_, e, x)| (e.0 - x.0).hypot(e.1 - x.1)).fold(0.0, f64::max);
    Ok(CfCheck { rows, max_deviation, samples, seed })
}

/// Pooled block coordinates of sequences whose empirical mean and variance
/// both fall in their windows, and their distance to `N(m, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoMomentSample {
    pub values: Vec<f64>,
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub ks: f64,
    pub ks_p_value: f64,
    pub seed: u64,
}

/// Rejection sampling of sequences with `|X̄_n − m| < ε` and
/// `|(1/n) Σ (X_i − X̄_n)² − v| < ε`; the first `b` coordinates of every
/// accepted sequence are pooled and compared to `N(m, v)` by Kolmogorov–Smirnov.
#[allow(clippy::too_many_arguments)]
pub fn condition_two_moments(
    g: &MixingLaw,
    targets: (f64, f64),
    epsilon: f64,
    n: usize,
    b: usize,
    proposals: u64,
    seed: u64,
) -> Result<TwoMomentSample> {
    let (m, v) = targets;
    check_finite("target mean", m)?;
    check_variance(v)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("window half-width {epsilon} must be positive")));
    }
    if n < 2 || b == 0 || b > n {
        return Err(Error::InvalidArgument(format!("need n ≥ 2 and 1 ≤ b ≤ n, got n = {n}, b = {b}")));
    }
    if proposals == 0 {
        return Err(Error::InvalidArgument("need at least one proposal".into()));
    }
    let chunks: Vec<(u64, u64)> = rng::chunks(proposals).collect();
    let blocks: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&(id, len)| {
            let mut r = rng::stream(seed, id);
            let mut out = Vec::new();
            for _ in 0..len {
                let (xs, _) = draw_sequence(g, n, &mut r);
                let (mean, var) = mean_and_variance(&xs).expect("n ≥ 2");
                if (mean - m).abs() < epsilon && (var - v).abs() < epsilon {
                    out.extend_from_slice(&xs[..b]);
                }
            }
            out
        })
        .collect();
    let values: Vec<f64> = blocks.into_iter().flatten().collect();
    let accepted = (values.len() / b) as u64;
    if accepted == 0 {
        return Err(Error::NoAcceptance {
            proposals,
            advice: format!(
                "acceptance probability is below about {:.3e} (95% upper bound); widen the window or raise the budget",
                3.0 / proposals as f64
            ),
        });
    }
    let sd = v.sqrt();
    let ks = ks_statistic(&values, |x| normal_cdf((x - m) / sd));
    let ks_p_value = kolmogorov_p_value(ks, values.len());
    Ok(TwoMomentSample {
        values,
        proposals,
        accepted,
        acceptance_rate: accepted as f64 / proposals as f64,
        ks,
        ks_p_value,
        seed,
    })
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `sup_x |F_n(x) − F(x)|` for the empirical law of `xs`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic Kolmogorov tail `P(D_n > d)` with the Stephens small-sample
/// correction `λ = (√n + 0.12 + 0.11/√n) d`:
///
/// ```text
/// Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2 j² λ²}
/// ```
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    let lambda = (rn + 0.12 + 0.11 / rn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::rate_fit;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_four() -> MixingLaw {
        MixingLaw::scale_atoms(&[(1.0, 0.5), (4.0, 0.5)]).unwrap()
    }

    #[test]
    fn rejects_bad_mixing_laws() {
        assert!(MixingLaw::point(0.0, 0.0).is_err());
        assert!(MixingLaw::scale_atoms(&[(1.0, 0.5), (-1.0, 0.5)]).is_err());
        assert!(MixingLaw::scale_atoms(&[(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(MixingLaw::inverse_gamma(0.0, 1.0, 0.0).is_err());
        assert!(sample_gsm(&one_four(), 0, 1).is_err());
    }

    #[test]
    fn point_mass_recovers_mean_and_variance() {
        let g = MixingLaw::point(0.0, 1.0).unwrap();
        let s = sample_gsm(&g, 100_000, 11).unwrap();
        let (mean, var) = empirical_limits(&s).unwrap();
        assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.02, "{mean} {var}");
        assert_eq!(s, sample_gsm(&g, 100_000, 11).unwrap());
    }

    #[test]
    fn constant_sample_has_zero_variance() {
        let s = RealSample { values: vec![3.0; 5], seed: 0, latent: (3.0, 1.0) };
        assert_eq!(empirical_limits(&s).unwrap(), (3.0, 0.0));
    }

    #[test]
    fn point_mass_passes_normality_in_most_seeds() {
        let g = MixingLaw::point(0.0, 1.0).unwrap();
        let passes = (0..100)
            .filter(|&seed| {
                let s = sample_gsm(&g, 1_000, seed).unwrap();
                kolmogorov_p_value(ks_statistic(&s.values, normal_cdf), s.values.len()) >= 0.01
            })
            .count();
        assert!(passes >= 95, "{passes}");
    }

    #[test]
    fn per_sequence_variance_tracks_the_latent_draw() {
        let g = one_four();
        let n = 10_000.0f64;
        let mut near = [0usize; 2];
        let mut sums = [0.0; 2];
        let mut outside_three_sigma = 0;
        for seed in 0..40 {
            let s = sample_gsm(&g, n as usize, seed).unwrap();
            let (mean, var) = empirical_limits(&s).unwrap();
            let (_, v) = s.latent;
            // 3σ for the empirical variance is 3 v √(2/n), and for the mean 3 √(v/n).
            if (var - v).abs() > 3.0 * v * (2.0 / n).sqrt() || mean.abs() > 3.0 * (v / n).sqrt() {
                outside_three_sigma += 1;
            }
            let cluster = if var < 2.5 { 0 } else { 1 };
            assert_eq!([1.0, 4.0][cluster], v);
            near[cluster] += 1;
            sums[cluster] += var;
        }
        // Each sequence leaves its 3σ box with probability about 0.5%.
        assert!(outside_three_sigma <= 2, "{outside_three_sigma}");
        assert!(near[0] > 5 && near[1] > 5, "{near:?}");
        for (c, center) in [1.0, 4.0].iter().enumerate() {
            assert!((sums[c] / near[c] as f64 - center).abs() < 0.1);
        }
    }

    #[test]
    fn characteristic_function_closed_forms() {
        let g = MixingLaw::point(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(g.characteristic_function(1.0).0, 0.60653, epsilon = 1e-5);
        let two = MixingLaw::scale_atoms(&[(1.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_abs_diff_eq!(two.characteristic_function(1.0).0, 0.48720, epsilon = 1e-5);
        assert_eq!(two.characteristic_function(0.0), (1.0, 0.0));
    }

    #[test]
    fn inverse_gamma_quadrature_matches_known_cases() {
        // Shape ½ gives a Cauchy mixture: ∫ e^{−½ v t²} IG(v; ½, β) dv = e^{−|t| √(2β)}.
        for &(beta, t) in &[(0.5, 1.0), (2.0, 0.5), (1.0, 2.0)] {
            let exact = (-(2.0f64 * beta).sqrt() * t).exp();
            assert_abs_diff_eq!(inverse_gamma_radial(0.5, beta, t), exact, epsilon = 1e-9);
        }
        assert_eq!(inverse_gamma_radial(3.0, 1.0, 0.0), 1.0);
        // Small-t expansion 1 − ½ t² E[V] with E[V] = β/(a − 1).
        let (a, beta, t) = (5.0, 2.0, 1e-3);
        assert_abs_diff_eq!(inverse_gamma_radial(a, beta, t), 1.0 - 0.5 * t * t * beta / (a - 1.0), epsilon = 1e-10);
    }

    #[test]
    fn empirical_cf_matches_closed_form() {
        let grid = [0.0, 0.5, 1.0, 2.0];
        let samples = 200_000u64;
        let bound = 4.0 / (samples as f64).sqrt() + 1e-3;
        for g in [
            MixingLaw::point(0.0, 1.0).unwrap(),
            MixingLaw::scale_atoms(&[(1.0, 0.5), (2.0, 0.5)]).unwrap(),
            MixingLaw::inverse_gamma(3.0, 2.0, 0.0).unwrap(),
        ] {
            let check = radial_cf_check(&g, &grid, samples, 3).unwrap();
            assert!(check.max_deviation <= bound, "{g:?}: {}", check.max_deviation);
            assert_eq!(check.rows[0].1 .0, 1.0);
        }
    }

    #[test]
    fn two_moment_conditioning_selects_the_matching_component() {
        let out = condition_two_moments(&one_four(), (0.0, 1.0), 0.1, 200, 1, 20_000, 8).unwrap();
        assert!(out.accepted >= 2_000, "{}", out.accepted);
        assert!(out.ks < 0.05, "{}", out.ks);
    }

    #[test]
    fn wide_window_leaves_the_mixture_unconditioned() {
        let g = MixingLaw::scale_atoms(&[(1.0, 0.5), (16.0, 0.5)]).unwrap();
        let out = condition_two_moments(&g, (0.0, 1.0), 1e3, 50, 1, 5_000, 9).unwrap();
        assert_eq!(out.accepted, 5_000);
        assert!(out.ks > 0.1, "{}", out.ks);
    }

    #[test]
    fn own_moments_are_a_vacuous_condition() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let g = MixingLaw::point(0.0, 1.0).unwrap();
        let (n, eps, proposals) = (100usize, 0.3, 20_000u64);
        let out = condition_two_moments(&g, (0.0, 1.0), eps, n, 2, proposals, 2).unwrap();
        // n V̂ ~ χ²_{n−1} independently of X̄ ~ N(0, 1/n).
        let chi = ChiSquared::new((n - 1) as f64).unwrap();
        let p_var = chi.cdf(n as f64 * (1.0 + eps)) - chi.cdf(n as f64 * (1.0 - eps));
        let p_mean = 1.0 - 2.0 * normal_cdf(-eps * (n as f64).sqrt());
        let p = p_var * p_mean;
        let se = (p * (1.0 - p) / proposals as f64).sqrt();
        assert!((out.acceptance_rate - p).abs() < 4.0 * se, "{} vs {p}", out.acceptance_rate);
        assert!(out.ks_p_value > 1e-3, "{}", out.ks);
    }

    #[test]
    fn zero_acceptance_reports_a_diagnostic() {
        let g = MixingLaw::point(0.0, 1.0).unwrap();
        let err = condition_two_moments(&g, (5.0, 1.0), 0.01, 100, 1, 1_000, 1).unwrap_err();
        assert!(matches!(err, Error::NoAcceptance { proposals: 1_000, .. }));
    }

    #[test]
    fn variance_error_decays_at_root_n() {
        let rows = variance_recovery(&one_four(), &[100, 400, 1_600, 6_400], 400, 5).unwrap();
        let fit = rate_fit(&rows).unwrap();
        assert!(fit.slope > -0.65 && fit.slope < -0.35, "{fit:?}");
    }

    #[test]
    fn ks_shrinks_with_the_window() {
        let g = one_four();
        let rows: Vec<TwoMomentSample> = [50usize, 200, 800]
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let eps = 8.0 * (n as f64).powf(-0.25);
                condition_two_moments(&g, (0.0, 1.0), eps, n, 1, 6_000, 20 + i as u64).unwrap()
            })
            .collect();
        for w in rows.windows(2) {
            let se = 1.0 / (w[1].values.len() as f64).sqrt();
            assert!(w[1].ks <= w[0].ks + se, "{} then {}", w[0].ks, w[1].ks);
        }
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // Q(1.36) ≈ 0.0495 and Q(1.63) ≈ 0.0098 are the classic 5% and 1% points.
        assert_abs_diff_eq!(kolmogorov_p_value(1.36 / 1e4, 100_000_000), 0.0495, epsilon = 5e-4);
        assert_abs_diff_eq!(kolmogorov_p_value(1.63 / 1e4, 100_000_000), 0.0098, epsilon = 2e-4);
        assert_eq!(kolmogorov_p_value(0.0, 10), 1.0);
    }

    proptest! {
        #[test]
        fn cf_is_bounded_and_even(v1 in 0.1f64..5.0, v2 in 0.1f64..5.0, w in 0.0f64..1.0, t in -4.0f64..4.0) {
            let g = MixingLaw::scale_atoms(&[(v1, w), (v2, 1.0 - w)]).unwrap();
            let (re, im) = g.characteristic_function(t);
            prop_assert!(re.abs() <= 1.0 + 1e-12);
            prop_assert!(im.abs() < 1e-15);
            prop_assert!((re - g.characteristic_function(-t).0).abs() < 1e-15);
        }

        #[test]
        fn ks_is_a_distance(xs in proptest::collection::vec(-5.0f64..5.0, 1..50)) {
            let d = ks_statistic(&xs, normal_cdf);
            prop_assert!(d > 0.0 && d <= 1.0);
        }
    }
}
