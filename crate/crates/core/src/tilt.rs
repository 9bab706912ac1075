//! Exponential tilting and I-projection under moment constraints.
//!
//! For a strictly positive baseline `p` and a statistic `h: X -> R^d` the
//! tilted family is
//!
//! ```text
//! p_λ(x) = p(x) exp(λᵀh(x) - M(λ)),     M(λ) = ln Σ_x p(x) exp(λᵀh(x))
//! ```
//!
//! with `∇M(λ) = E_{p_λ}[h]` and `∇²M(λ) = Cov_{p_λ}[h]`. The tilt that hits a
//! target mean `α` minimizes the convex dual `M(λ) - λᵀα`, which is what
//! [`solve_moment_equality`] does by damped Newton from `λ = 0`.
//!
//! Sign convention: the tilt is always `exp(+λᵀh)`. Sources that write die
//! tilts as `exp(-λ i)` report the negated multiplier.

use std::sync::Arc;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::simplex::{kl_divergence, log_sum_exp, Alphabet, Distribution};

/// Relative margin used when asking whether a target is strictly inside the hull of `h`.
pub const HULL_MARGIN: f64 = 1e-9;
/// Residual below which a target is considered hit.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// A statistic `h: X -> R^d`, stored as a `k × d` row-major table.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFunction {
    alphabet: Arc<Alphabet>,
    dim: usize,
    table: Vec<f64>,
}

impl MomentFunction {
    pub fn new(alphabet: Arc<Alphabet>, dim: usize, table: Vec<f64>) -> Result<Self> {
        let k = alphabet.size();
        if dim == 0 {
            return Err(Error::InvalidMomentFunction("dimension must be at least 1".into()));
        }
        if table.len() != k * dim {
            return Err(Error::LengthMismatch { expected: k * dim, got: table.len() });
        }
        if let Some(v) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMomentFunction(format!("non-finite entry {v}")));
        }
        let first = &table[..dim];
        if table.chunks(dim).all(|row| row == first) {
            return Err(Error::InvalidMomentFunction("all rows are identical, so the moment map is constant".into()));
        }
        Ok(MomentFunction { alphabet, dim, table })
    }

    /// A one-dimensional statistic given by its value on each symbol.
    pub fn scalar(alphabet: Arc<Alphabet>, values: Vec<f64>) -> Result<Self> {
        Self::new(alphabet, 1, values)
    }

    /// `h(x) = x` on the binary alphabet `{0, 1}`.
    pub fn binary_identity() -> Self {
        Self::scalar(Alphabet::binary(), vec![0.0, 1.0]).expect("valid statistic")
    }

    /// `h(i) = i` on die faces `1..=k`.
    pub fn face_value(k: usize) -> Result<Self> {
        Self::scalar(Alphabet::numbered(k)?, (1..=k).map(|i| i as f64).collect())
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.dim..(x + 1) * self.dim]
    }

    /// Value of a one-dimensional statistic.
    pub fn value(&self, x: usize) -> f64 {
        self.table[x * self.dim]
    }

    pub fn is_integer_valued(&self) -> bool {
        self.table.iter().all(|v| v.fract() == 0.0)
    }

    /// `(min h, max h)` for `d = 1`.
    pub fn range(&self) -> (f64, f64) {
        let col = (0..self.alphabet.size()).map(|x| self.value(x));
        let lo = col.clone().fold(f64::INFINITY, f64::min);
        let hi = col.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// `Σ_x counts[x] h(x)`, one entry per dimension.
    pub fn sum_over_counts(&self, counts: &[u64]) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for (x, &c) in counts.iter().enumerate() {
            if c > 0 {
                for (acc, v) in s.iter_mut().zip(self.row(x)) {
                    *acc += c as f64 * v;
                }
            }
        }
        s
    }

    pub fn mean_under(&self, q: &Distribution) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for (x, &w) in q.masses().iter().enumerate() {
            for (acc, v) in s.iter_mut().zip(self.row(x)) {
                *acc += w * v;
            }
        }
        s
    }

    fn require_scalar(&self, what: &str) -> Result<()> {
        if self.dim != 1 {
            return Err(Error::InvalidConstraint(format!("{what} needs a one-dimensional statistic")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `E_Q[h] = α`.
    Equality,
    /// `E_Q[h] ≥ α`, `d = 1`.
    LowerHalfspace,
}

/// A moment constraint set `E`, optionally relaxed to an open window
/// `(α - ε, α + ε)` on the empirical average.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConstraint {
    h: MomentFunction,
    kind: ConstraintKind,
    target: Vec<f64>,
    half_width: Option<f64>,
}

impl MomentConstraint {
    pub fn equality(h: MomentFunction, target: Vec<f64>) -> Result<Self> {
        if target.len() != h.dim() {
            return Err(Error::LengthMismatch { expected: h.dim(), got: target.len() });
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConstraint("target must be finite".into()));
        }
        Ok(MomentConstraint { h, kind: ConstraintKind::Equality, target, half_width: None })
    }

    /// `E_Q[h] ≥ alpha`.
    pub fn at_least(h: MomentFunction, alpha: f64) -> Result<Self> {
        h.require_scalar("a halfspace constraint")?;
        if !alpha.is_finite() {
            return Err(Error::InvalidConstraint("target must be finite".into()));
        }
        Ok(MomentConstraint { h, kind: ConstraintKind::LowerHalfspace, target: vec![alpha], half_width: None })
    }

    /// The open window `(α - ε, α + ε)` around an equality target.
    pub fn window(h: MomentFunction, alpha: f64, half_width: f64) -> Result<Self> {
        h.require_scalar("a window")?;
        let c = MomentConstraint::equality(h, vec![alpha])?;
        c.with_window(half_width)
    }

    pub fn with_window(mut self, half_width: f64) -> Result<Self> {
        self.h.require_scalar("a window")?;
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidConstraint(format!("window half-width must be positive, got {half_width}")));
        }
        let (lo, hi) = self.h.range();
        let (a, b) = (self.target[0] - half_width, self.target[0] + half_width);
        if !(lo < a && b < hi) {
            return Err(Error::InvalidConstraint(format!("window ({a}, {b}) must sit strictly inside ({lo}, {hi})")));
        }
        self.half_width = Some(half_width);
        Ok(self)
    }

    pub fn statistic(&self) -> &MomentFunction {
        &self.h
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// `(a, b)` when the constraint is a window.
    pub fn window_bounds(&self) -> Option<(f64, f64)> {
        self.half_width.map(|e| (self.target[0] - e, self.target[0] + e))
    }

    /// Whether a sample of size `n` whose statistic sums to `sums` lies in the event.
    ///
    /// Comparisons are made on sums (`Σ h(x_i)` against `α n`) with a
    /// tolerance of `1e-12` relative to the scale of `α n`, which classifies
    /// lattice points exactly for integer-valued statistics. Window endpoints
    /// are excluded.
    pub fn admits_sum(&self, sums: &[f64], n: u64) -> bool {
        let n = n as f64;
        let tol = |x: f64| 1e-12 * x.abs().max(1.0);
        if let Some((a, b)) = self.window_bounds() {
            let (lo, hi) = (a * n, b * n);
            let s = sums[0];
            return s > lo + tol(lo) && s < hi - tol(hi);
        }
        match self.kind {
            ConstraintKind::Equality => self.target.iter().zip(sums).all(|(&t, &s)| (s - t * n).abs() <= tol(t * n)),
            ConstraintKind::LowerHalfspace => {
                let t = self.target[0] * n;
                sums[0] >= t - tol(t)
            }
        }
    }

    /// Whether the integer count vector lies in the event.
    pub fn admits_counts(&self, counts: &[u64]) -> bool {
        let n = counts.iter().sum();
        self.admits_sum(&self.h.sum_over_counts(counts), n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltStatus {
    /// The baseline already satisfies the constraint; `λ = 0`.
    Interior,
    /// The constraint binds and a nonzero multiplier was solved for.
    Active,
}

/// Result of an I-projection / moment-matching solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSolution {
    pub lambda: Vec<f64>,
    pub log_partition: f64,
    pub tilted: Distribution,
    /// `D(P*‖P)` in nats.
    pub divergence: f64,
    pub status: TiltStatus,
    /// `‖E_{P*}[h] - α‖_∞`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iterations: 100, tolerance: RESIDUAL_TOL, max_halvings: 40 }
    }
}

fn check_inputs(p: &Distribution, h: &MomentFunction, lambda: &[f64]) -> Result<()> {
    p.require_strictly_positive()?;
    if **p.alphabet() != **h.alphabet() {
        return Err(Error::AlphabetMismatch);
    }
    if lambda.len() != h.dim() {
        return Err(Error::LengthMismatch { expected: h.dim(), got: lambda.len() });
    }
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("multiplier must be finite".into()));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unnormalized log masses `ln p(x) + λᵀh(x)`.
fn tilted_logits(p: &Distribution, h: &MomentFunction, lambda: &[f64]) -> Vec<f64> {
    p.masses().iter().enumerate().map(|(x, &px)| px.ln() + dot(lambda, h.row(x))).collect()
}

/// Tilted law, log-partition, mean and covariance at `λ` in one pass.
struct TiltState {
    log_partition: f64,
    masses: Vec<f64>,
    mean: Vec<f64>,
}

impl TiltState {
    fn at(p: &Distribution, h: &MomentFunction, lambda: &[f64]) -> Self {
        let logits = tilted_logits(p, h, lambda);
        let log_partition = log_sum_exp(&logits);
        let masses: Vec<f64> = logits.iter().map(|&l| (l - log_partition).exp()).collect();
        let mut mean = vec![0.0; h.dim()];
        for (x, &w) in masses.iter().enumerate() {
            for (acc, v) in mean.iter_mut().zip(h.row(x)) {
                *acc += w * v;
            }
        }
        TiltState { log_partition, masses, mean }
    }

    fn covariance(&self, h: &MomentFunction) -> DMatrix<f64> {
        let d = h.dim();
        let mut cov = DMatrix::zeros(d, d);
        for (x, &w) in self.masses.iter().enumerate() {
            let c: Vec<f64> = h.row(x).iter().zip(&self.mean).map(|(v, m)| v - m).collect();
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += w * c[i] * c[j];
                }
            }
        }
        cov
    }

    fn residual(&self, alpha: &[f64]) -> f64 {
        self.mean.iter().zip(alpha).map(|(m, a)| (m - a).abs()).fold(0.0, f64::max)
    }
}

/// `M(λ) = ln Σ_x p(x) e^{λᵀh(x)}`, computed by max-shifted log-sum-exp.
pub fn log_partition(p: &Distribution, h: &MomentFunction, lambda: &[f64]) -> Result<f64> {
    check_inputs(p, h, lambda)?;
    Ok(log_sum_exp(&tilted_logits(p, h, lambda)))
}

/// The exponential tilt `p(x) e^{λᵀh(x) - M(λ)}`. `λ = 0` returns `p` unchanged.
pub fn tilt(p: &Distribution, h: &MomentFunction, lambda: &[f64]) -> Result<Distribution> {
    check_inputs(p, h, lambda)?;
    if lambda.iter().all(|&l| l == 0.0) {
        return Ok(p.clone());
    }
    let state = TiltState::at(p, h, lambda);
    Ok(Distribution::from_raw(p.alphabet().clone(), state.masses))
}

/// `E_{p_λ}[h] = ∇M(λ)`.
pub fn moment_map(p: &Distribution, h: &MomentFunction, lambda: &[f64]) -> Result<Vec<f64>> {
    check_inputs(p, h, lambda)?;
    Ok(TiltState::at(p, h, lambda).mean)
}

/// Cumulative distribution of the tilted law over the symbol order, `F_λ(x) = Σ_{u ≤ x} p_λ(u)`.
pub fn tilted_cdf(p: &Distribution, h: &MomentFunction, lambda: f64, x: usize) -> Result<f64> {
    h.require_scalar("the tilted cdf")?;
    let q = tilt(p, h, &[lambda])?;
    if x >= q.size() {
        return Err(Error::InvalidArgument(format!("symbol {x} out of range")));
    }
    if x + 1 == q.size() {
        return Ok(1.0);
    }
    Ok(q.masses()[..=x].iter().sum::<f64>().min(1.0))
}

/// Errors with [`Error::BoundaryInfeasible`] unless `alpha` is strictly inside
/// the convex hull of `{h(x)}` by the relative margin [`HULL_MARGIN`].
pub fn check_strictly_inside_hull(h: &MomentFunction, alpha: &[f64]) -> Result<()> {
    if alpha.len() != h.dim() {
        return Err(Error::LengthMismatch { expected: h.dim(), got: alpha.len() });
    }
    if h.dim() == 1 {
        let (lo, hi) = h.range();
        let margin = HULL_MARGIN * (hi - lo);
        let a = alpha[0];
        if !(lo + margin < a && a < hi - margin) {
            return Err(Error::BoundaryInfeasible(format!(
                "target {a} is not strictly inside the hull [{lo}, {hi}]; no finite multiplier exists"
            )));
        }
        return Ok(());
    }
    // Largest t such that α = Σ w_x h(x) with Σ w_x = 1 and every w_x ≥ t.
    // α is interior (relative to the affine hull) iff t > 0.
    let k = h.alphabet().size();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    let w: Vec<_> = (0..k).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    lp.add_constraint(w.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    for (j, &a) in alpha.iter().enumerate() {
        let row: Vec<_> = w.iter().enumerate().map(|(x, &v)| (v, h.row(x)[j])).collect();
        lp.add_constraint(row, ComparisonOp::Eq, a);
    }
    for &v in &w {
        lp.add_constraint([(v, 1.0), (t, -1.0)], ComparisonOp::Ge, 0.0);
    }
    let outside = || Error::BoundaryInfeasible(format!("target {alpha:?} is outside the convex hull of the statistic"));
    let sol = lp.solve().map_err(|_| outside())?;
    if sol.objective() <= HULL_MARGIN / k as f64 {
        return Err(Error::BoundaryInfeasible(format!(
            "target {alpha:?} lies on the boundary of the convex hull of the statistic; no finite multiplier exists"
        )));
    }
    Ok(())
}

/// Solves `E_{p_λ}[h] = α` for `λ` with the default [`NewtonOptions`].
pub fn solve_moment_equality(p: &Distribution, h: &MomentFunction, alpha: &[f64]) -> Result<TiltSolution> {
    solve_moment_equality_with(p, h, alpha, &NewtonOptions::default())
}

pub fn solve_moment_equality_with(
    p: &Distribution,
    h: &MomentFunction,
    alpha: &[f64],
    opts: &NewtonOptions,
) -> Result<TiltSolution> {
    let d = h.dim();
    let zero = vec![0.0; d];
    check_inputs(p, h, &zero)?;
    check_strictly_inside_hull(h, alpha)?;

    let base = TiltState::at(p, h, &zero);
    if base.residual(alpha) <= opts.tolerance {
        return finish(p, h, alpha, zero, TiltStatus::Interior, 0);
    }

    match newton(p, h, alpha, opts) {
        Ok((lambda, iterations)) => finish(p, h, alpha, lambda, TiltStatus::Active, iterations),
        Err(err) if d == 1 => {
            log::debug!("newton failed ({err}); falling back to bisection");
            let (lambda, iterations) = bisect(p, h, alpha[0], opts)?;
            finish(p, h, alpha, vec![lambda], TiltStatus::Active, iterations)
        }
        Err(err) => Err(err),
    }
}

fn newton(p: &Distribution, h: &MomentFunction, alpha: &[f64], opts: &NewtonOptions) -> Result<(Vec<f64>, usize)> {
    let d = h.dim();
    let mut lambda = vec![0.0; d];
    let mut state = TiltState::at(p, h, &lambda);
    let mut residual = state.residual(alpha);
    for iter in 0..opts.max_iterations {
        if residual <= opts.tolerance {
            return Ok((lambda, iter));
        }
        let hess = state.covariance(h);
        let grad = DVector::from_iterator(d, state.mean.iter().zip(alpha).map(|(m, a)| m - a));
        let step = hess.cholesky().ok_or(Error::SingularHessian)?.solve(&(-grad));
        if step.iter().any(|s| !s.is_finite()) {
            return Err(Error::SingularHessian);
        }
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, s)| l + scale * s).collect();
            let trial_state = TiltState::at(p, h, &trial);
            let trial_residual = trial_state.residual(alpha);
            if trial_residual < residual {
                lambda = trial;
                state = trial_state;
                residual = trial_residual;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if residual <= opts.tolerance {
        Ok((lambda, opts.max_iterations))
    } else {
        Err(Error::NoConvergence { iterations: opts.max_iterations, residual })
    }
}

/// Bisection on the increasing map `λ ↦ E_{p_λ}[h]` (d = 1) over a bracket found by doubling.
fn bisect(p: &Distribution, h: &MomentFunction, alpha: f64, opts: &NewtonOptions) -> Result<(f64, usize)> {
    let mean = |l: f64| TiltState::at(p, h, &[l]).mean[0];
    let dir = if mean(0.0) < alpha { 1.0 } else { -1.0 };
    let mut width = 1.0;
    let mut iterations = 0;
    while (mean(dir * width) - alpha) * dir < 0.0 {
        width *= 2.0;
        iterations += 1;
        if width > 1e300 {
            return Err(Error::NoConvergence { iterations, residual: f64::INFINITY });
        }
    }
    let (mut lo, mut hi) = if dir > 0.0 { (0.0, width) } else { (-width, 0.0) };
    for _ in 0..400 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let r = mean(mid) - alpha;
        if r.abs() <= opts.tolerance {
            return Ok((mid, iterations));
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    let residual = (mean(mid) - alpha).abs();
    if residual <= opts.tolerance {
        Ok((mid, iterations))
    } else {
        Err(Error::NoConvergence { iterations, residual })
    }
}

fn finish(
    p: &Distribution,
    h: &MomentFunction,
    alpha: &[f64],
    lambda: Vec<f64>,
    status: TiltStatus,
    iterations: usize,
) -> Result<TiltSolution> {
    let state = TiltState::at(p, h, &lambda);
    let residual = state.residual(alpha);
    let tilted = if status == TiltStatus::Interior {
        p.clone()
    } else {
        Distribution::from_raw(p.alphabet().clone(), state.masses)
    };
    let log_partition = if status == TiltStatus::Interior { 0.0 } else { state.log_partition };
    let divergence = kl_divergence(&tilted, p)?;
    Ok(TiltSolution { lambda, log_partition, tilted, divergence, status, residual, iterations })
}

/// The I-projection `argmin_{Q ∈ E} D(Q‖P)`.
///
/// Equality constraints solve the moment equation directly. For a halfspace
/// `E_Q[h] ≥ α` the multiplier is zero when the baseline is already feasible
/// and otherwise the constraint binds at `α`. A window projects onto its
/// closed interval, binding at whichever endpoint is nearer the baseline mean.
pub fn i_project(p: &Distribution, c: &MomentConstraint) -> Result<TiltSolution> {
    let h = c.statistic();
    let zero = vec![0.0; h.dim()];
    check_inputs(p, h, &zero)?;

    if let Some((a, b)) = c.window_bounds() {
        let mean = h.mean_under(p)[0];
        return if mean < a {
            solve_moment_equality(p, h, &[a])
        } else if mean > b {
            solve_moment_equality(p, h, &[b])
        } else {
            finish(p, h, &[mean], zero, TiltStatus::Interior, 0)
        };
    }

    match c.kind() {
        ConstraintKind::Equality => solve_moment_equality(p, h, c.target()),
        ConstraintKind::LowerHalfspace => {
            let alpha = c.target()[0];
            let mean = h.mean_under(p)[0];
            if mean >= alpha {
                let mut sol = finish(p, h, &[mean], zero, TiltStatus::Interior, 0)?;
                sol.residual = 0.0;
                return Ok(sol);
            }
            let (_, hi) = h.range();
            if alpha > hi {
                return Err(Error::BoundaryInfeasible(format!("halfspace E[h] >= {alpha} is empty: max h = {hi}")));
            }
            solve_moment_equality(p, h, &[alpha])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn die() -> (Distribution, MomentFunction) {
        let h = MomentFunction::face_value(6).unwrap();
        (Distribution::uniform(h.alphabet().clone()), h)
    }

    fn ber(q: f64) -> (Distribution, MomentFunction) {
        (Distribution::bernoulli(q).unwrap(), MomentFunction::binary_identity())
    }

    #[test]
    fn moment_function_rejects_constant_statistic() {
        let a = Alphabet::numbered(3).unwrap();
        assert!(MomentFunction::scalar(a.clone(), vec![2.0, 2.0, 2.0]).is_err());
        assert!(MomentFunction::scalar(a.clone(), vec![1.0, f64::NAN, 2.0]).is_err());
        assert!(MomentFunction::new(a, 2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn log_partition_examples() {
        let (p, h) = die();
        assert_eq!(log_partition(&p, &h, &[0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(log_partition(&p, &h, &[2f64.ln()]).unwrap(), 21f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(21f64.ln(), 3.04452, epsilon = 1e-5);
        let (p, h) = ber(0.5);
        assert_abs_diff_eq!(log_partition(&p, &h, &[1.0]).unwrap(), ((1.0 + 1f64.exp()) / 2.0).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(log_partition(&p, &h, &[1.0]).unwrap(), 0.62011, epsilon = 1e-5);
        // Huge multipliers stay finite.
        assert!(log_partition(&p, &h, &[1e5]).unwrap().is_finite());
    }

    #[test]
    fn tilt_examples() {
        let (p, h) = die();
        assert_eq!(tilt(&p, &h, &[0.0]).unwrap(), p);
        let (b, hb) = ber(0.5);
        let q = tilt(&b, &hb, &[3f64.ln()]).unwrap();
        assert_abs_diff_eq!(q.masses()[1], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(moment_map(&b, &hb, &[3f64.ln()]).unwrap()[0], 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(moment_map(&p, &h, &[0.0]).unwrap()[0], 3.5, epsilon = 1e-14);
        assert!(moment_map(&p, &h, &[50.0]).unwrap()[0] > 6.0 - 1e-9);
    }

    #[test]
    fn dice_solution() {
        let (p, h) = die();
        let sol = solve_moment_equality(&p, &h, &[4.5]).unwrap();
        assert_eq!(sol.status, TiltStatus::Active);
        assert_abs_diff_eq!(sol.lambda[0], 0.37105, epsilon = 1e-4);
        assert!(sol.residual <= 1e-10);
        // Values from an independent root-finder on the six-term moment equation.
        let expected = [0.05435317, 0.07877155, 0.11415998, 0.1654468, 0.23977444, 0.34749407];
        for (got, want) in sol.tilted.masses().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-7);
        }
        assert_abs_diff_eq!(sol.divergence, 6f64.ln() - 1.61358, epsilon = 1e-4);
        let mean = h.mean_under(&sol.tilted)[0];
        assert_abs_diff_eq!(sol.divergence, sol.lambda[0] * mean - sol.log_partition, epsilon = 1e-9);
        assert_abs_diff_eq!(tilted_cdf(&p, &h, sol.lambda[0], 2).unwrap(), 0.246, epsilon = 0.002);
    }

    #[test]
    fn dice_degenerate_targets() {
        let (p, h) = die();
        let sol = solve_moment_equality(&p, &h, &[3.5]).unwrap();
        assert_eq!(sol.status, TiltStatus::Interior);
        assert_eq!(sol.lambda, vec![0.0]);
        assert_eq!(sol.tilted, p);
        let err = solve_moment_equality(&p, &h, &[6.5]).unwrap_err();
        assert!(matches!(err, Error::BoundaryInfeasible(_)));
        assert!(err.to_string().contains("outside convex hull"));
        assert!(matches!(solve_moment_equality(&p, &h, &[6.0]), Err(Error::BoundaryInfeasible(_))));
        assert!(matches!(solve_moment_equality(&p, &h, &[1.0]), Err(Error::BoundaryInfeasible(_))));
    }

    #[test]
    fn extreme_targets_still_converge() {
        let (p, h) = die();
        for alpha in [1.0 + 1e-6, 5.999_999, 1.01, 5.9] {
            let sol = solve_moment_equality(&p, &h, &[alpha]).unwrap();
            assert!(sol.residual <= 1e-10, "{alpha}: {}", sol.residual);
        }
    }

    #[test]
    fn bisection_fallback_matches_newton() {
        let (p, h) = die();
        let opts = NewtonOptions { max_iterations: 0, ..Default::default() };
        let a = solve_moment_equality_with(&p, &h, &[4.5], &opts).unwrap();
        let b = solve_moment_equality(&p, &h, &[4.5]).unwrap();
        assert_abs_diff_eq!(a.lambda[0], b.lambda[0], epsilon = 1e-9);
    }

    #[test]
    fn halfspace_projection() {
        let (p, h) = ber(0.5);
        let c = MomentConstraint::at_least(h.clone(), 0.75).unwrap();
        let sol = i_project(&p, &c).unwrap();
        assert_eq!(sol.status, TiltStatus::Active);
        assert_abs_diff_eq!(sol.tilted.masses()[1], 0.75, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.lambda[0], 3f64.ln(), epsilon = 1e-9);

        let (p9, _) = ber(0.9);
        let sol = i_project(&p9, &c).unwrap();
        assert_eq!(sol.status, TiltStatus::Interior);
        assert_eq!(sol.lambda, vec![0.0]);
        assert_eq!(sol.tilted, p9);

        let infeasible = MomentConstraint::at_least(h, 1.5).unwrap();
        assert!(matches!(i_project(&p, &infeasible), Err(Error::BoundaryInfeasible(_))));

        let (d, hd) = die();
        let eq = solve_moment_equality(&d, &hd, &[4.5]).unwrap();
        let hs = i_project(&d, &MomentConstraint::at_least(hd, 4.5).unwrap()).unwrap();
        assert_abs_diff_eq!(eq.lambda[0], hs.lambda[0], epsilon = 1e-12);
    }

    #[test]
    fn window_projection_binds_at_nearest_endpoint() {
        let (p, h) = ber(0.5);
        let c = MomentConstraint::window(h.clone(), 0.75, 0.05).unwrap();
        let sol = i_project(&p, &c).unwrap();
        assert_abs_diff_eq!(sol.tilted.masses()[1], 0.70, epsilon = 1e-10);
        let inside = MomentConstraint::window(h.clone(), 0.55, 0.1).unwrap();
        assert_eq!(i_project(&p, &inside).unwrap().status, TiltStatus::Interior);
        assert!(MomentConstraint::window(h, 0.9, 0.2).is_err());
    }

    #[test]
    fn admits_sum_on_lattice() {
        let h = MomentFunction::binary_identity();
        let w = MomentConstraint::window(h.clone(), 0.75, 0.05).unwrap();
        assert!(!w.admits_sum(&[70.0], 100));
        assert!(w.admits_sum(&[71.0], 100));
        assert!(w.admits_sum(&[79.0], 100));
        assert!(!w.admits_sum(&[80.0], 100));
        let ge = MomentConstraint::at_least(h.clone(), 0.75).unwrap();
        assert!(ge.admits_counts(&[1, 3]));
        assert!(!ge.admits_counts(&[2, 2]));
        let d = MomentFunction::face_value(6).unwrap();
        let eq = MomentConstraint::equality(d, vec![4.5]).unwrap();
        assert!(eq.admits_counts(&[0, 0, 0, 1, 1, 0]));
        assert!(!eq.admits_counts(&[0, 0, 1, 1, 1, 0]));
    }

    #[test]
    fn two_dimensional_solve() {
        let a = Alphabet::numbered(4).unwrap();
        let h = MomentFunction::new(a.clone(), 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let p = Distribution::new(a, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let sol = solve_moment_equality(&p, &h, &[0.3, 0.8]).unwrap();
        assert!(sol.residual <= 1e-10);
        let mean = h.mean_under(&sol.tilted);
        assert_abs_diff_eq!(mean[0], 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(mean[1], 0.8, epsilon = 1e-10);
        assert!(matches!(solve_moment_equality(&p, &h, &[1.2, 0.5]), Err(Error::BoundaryInfeasible(_))));
        assert!(matches!(solve_moment_equality(&p, &h, &[1.0, 0.5]), Err(Error::BoundaryInfeasible(_))));
    }

    #[test]
    fn rejects_non_positive_baseline() {
        let h = MomentFunction::binary_identity();
        let p = Distribution::point_mass(Alphabet::binary(), 1).unwrap();
        assert!(matches!(log_partition(&p, &h, &[0.0]), Err(Error::NotStrictlyPositive { .. })));
    }

    fn setup() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (2usize..7).prop_flat_map(|k| {
            (prop::collection::vec(0.05f64..1.0, k), prop::collection::vec(-3.0f64..3.0, k), -2.0f64..2.0)
        })
    }

    fn build(w: &[f64], hv: &[f64]) -> Option<(Distribution, MomentFunction)> {
        let a = Alphabet::numbered(w.len()).unwrap();
        let p = Distribution::from_weights(a.clone(), w.to_vec()).ok()?;
        let h = MomentFunction::scalar(a, hv.to_vec()).ok()?;
        Some((p, h))
    }

    proptest! {
        #[test]
        fn moment_map_is_gradient((w, hv, l) in setup()) {
            let Some((p, h)) = build(&w, &hv) else { return Ok(()) };
            let step = 1e-6;
            let fd = (log_partition(&p, &h, &[l + step]).unwrap() - log_partition(&p, &h, &[l - step]).unwrap()) / (2.0 * step);
            prop_assert!((moment_map(&p, &h, &[l]).unwrap()[0] - fd).abs() < 1e-6);
        }

        #[test]
        fn log_partition_is_convex((w, hv, l1) in setup(), l2 in -2.0f64..2.0) {
            let Some((p, h)) = build(&w, &hv) else { return Ok(()) };
            let m = |l: f64| log_partition(&p, &h, &[l]).unwrap();
            prop_assert!(m(0.5 * (l1 + l2)) <= 0.5 * (m(l1) + m(l2)) + 1e-12);
        }

        #[test]
        fn tilt_inverts((w, hv, l) in setup()) {
            let Some((p, h)) = build(&w, &hv) else { return Ok(()) };
            let q = tilt(&p, &h, &[l]).unwrap();
            prop_assert!(q.is_strictly_positive());
            let back = tilt(&q, &h, &[-l]).unwrap();
            for (a, b) in back.masses().iter().zip(p.masses()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn projection_is_feasible_and_satisfies_dual_identity((w, hv, _l) in setup(), frac in 0.02f64..0.98, halfspace in any::<bool>()) {
            let Some((p, h)) = build(&w, &hv) else { return Ok(()) };
            let (lo, hi) = h.range();
            let alpha = lo + frac * (hi - lo);
            let c = if halfspace {
                MomentConstraint::at_least(h.clone(), alpha).unwrap()
            } else {
                MomentConstraint::equality(h.clone(), vec![alpha]).unwrap()
            };
            let sol = i_project(&p, &c).unwrap();
            let mean = h.mean_under(&sol.tilted)[0];
            if halfspace {
                prop_assert!(mean >= alpha - 1e-10);
            } else {
                prop_assert!((mean - alpha).abs() <= 1e-10);
            }
            prop_assert!(sol.tilted.is_strictly_positive());
            let dual = sol.lambda[0] * mean - sol.log_partition;
            prop_assert!((sol.divergence - dual).abs() <= 1e-9);
        }

        // D(Q‖P) ≥ D(Q‖P*) + D(P*‖P) for feasible Q, active halfspace case.
        #[test]
        fn pythagorean_inequality((w, hv, _l) in setup(), frac in 0.05f64..0.95, qw in prop::collection::vec(0.01f64..1.0, 6)) {
            let Some((p, h)) = build(&w, &hv) else { return Ok(()) };
            let mean_p = h.mean_under(&p)[0];
            let (_, hi) = h.range();
            let alpha = mean_p + frac * (hi - mean_p);
            let c = MomentConstraint::at_least(h.clone(), alpha).unwrap();
            let sol = match i_project(&p, &c) { Ok(s) => s, Err(_) => return Ok(()) };
            let k = p.size();
            let q = Distribution::from_weights(p.alphabet().clone(), qw[..k].to_vec()).unwrap();
            // Push q into the halfspace by mixing toward the argmax of h.
            let top = (0..k).max_by(|&a, &b| h.value(a).total_cmp(&h.value(b))).unwrap();
            let peak = Distribution::point_mass(p.alphabet().clone(), top).unwrap();
            let mq = h.mean_under(&q)[0];
            let t = if mq >= alpha { 0.0 } else { (alpha - mq) / (hi - mq) };
            let mixed: Vec<f64> = q.masses().iter().zip(peak.masses()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            let q = Distribution::from_weights(p.alphabet().clone(), mixed).unwrap();
            prop_assume!(h.mean_under(&q)[0] >= alpha - 1e-12);
            let lhs = kl_divergence(&q, &p).unwrap();
            let rhs = kl_divergence(&q, &sol.tilted).unwrap() + sol.divergence;
            prop_assert!(lhs >= rhs - 1e-8, "{lhs} < {rhs}");
        }
    }
}
