//! Statistical-dimension bounds for the descent cone of the group norm
//! `Σᵢ ‖Θ_Vi‖_F` (and its ridge-smoothed variant) at a group-sparse point,
//! together with the sequence-length predictions derived from them.
//!
//! All bounds are of the form
//!
//! ```text
//! δ / N ≤ inf_τ { ρ (2M + c τ²) + (1 − ρ) J_M(τ) },   J_M(τ) = E[(u − τ)₊²],  u ~ χ_{2M}
//! ```
//!
//! with `c = 1` for the plain norm and `c = 1 + 2μā + μ²b̄` after smoothing.
//! `J_M` and the first-order condition are reduced to regularized upper
//! incomplete gamma functions, so root finding never touches quadrature.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{derive_seed, rng_from, GroundTruth};

/// Bound on the statistical dimension and the minimizing `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatDimResult {
    /// Bound in ambient units, `0 ≤ delta ≤ 2NM`.
    pub delta: f64,
    /// Minimizer of the bound; `+∞` when `ρ = 0`.
    pub tau_star: f64,
    /// `delta / (2M)`: the bound expressed as a signature length.
    pub delta_seq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionPrediction {
    /// Smallest `L` meeting the success condition.
    pub l_success: usize,
    /// Largest `L` meeting the failure condition.
    pub l_fail: usize,
    pub eta: f64,
    /// `√(8 log(4/η))`.
    pub a_eta: f64,
    pub delta_seq: f64,
}

impl TransitionPrediction {
    pub fn width(&self) -> usize {
        self.l_success - self.l_fail
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.l_success + self.l_fail) as f64
    }
}

/// Normalized error levels predicted for the norm-constrained least-squares
/// estimator with an orthonormal sensing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisyPrediction {
    /// `max_σ E[R] / σ²`.
    pub worst_case_ratio: f64,
    /// `lim_{σ→0} E[R̂] / σ²`.
    pub empirical_limit_ratio: f64,
    /// Set when `L` equals the transition location exactly.
    pub at_boundary: bool,
}

/// First and second moments of the active group norms `‖(Θ̃₀)_Vi‖_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupMoments {
    /// Mean group norm.
    pub a_bar: f64,
    /// Mean squared group norm.
    pub b_bar: f64,
}

impl GroupMoments {
    pub const ZERO: GroupMoments = GroupMoments { a_bar: 0.0, b_bar: 0.0 };

    /// Empirical moments over the support of an instance.
    pub fn from_ground_truth(truth: &GroundTruth) -> Self {
        let norms = linalg::group_norms(truth.stacked().view());
        let active: Vec<f64> = truth.support.iter().map(|&i| norms[i]).collect();
        if active.is_empty() {
            return Self::ZERO;
        }
        let s = active.len() as f64;
        Self {
            a_bar: active.iter().sum::<f64>() / s,
            b_bar: active.iter().map(|v| v * v).sum::<f64>() / s,
        }
    }

    /// `1 + 2μā + μ²b̄`.
    pub fn smoothing_factor(&self, mu: f64) -> f64 {
        1.0 + 2.0 * mu * self.a_bar + mu * mu * self.b_bar
    }
}

/// Moments for i.i.d. `𝒩(0, σ²)` real entries: the group norm over `σ` is
/// chi-distributed with `2M` degrees of freedom.
///
/// `sigma_real` is the per-real-component standard deviation; for
/// `𝒞𝒩(0, 1)` channels it is `1/√2`.
pub fn gaussian_moments(m: usize, sigma_real: f64) -> GroupMoments {
    GroupMoments {
        a_bar: chi_mean(m) * sigma_real,
        b_bar: 2.0 * m as f64 * sigma_real * sigma_real,
    }
}

/// `E[u]` for `u ~ χ_{2M}`, i.e. `√2 Γ(M + ½) / Γ(M)`.
fn chi_mean(m: usize) -> f64 {
    let m = m as f64;
    std::f64::consts::SQRT_2 * (ln_gamma(m + 0.5) - ln_gamma(m)).exp()
}

/// Regularized upper incomplete gamma `Q(a, x)` with `Q(a, 0) = 1`.
fn upper_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(a, x)
    }
}

/// `E[(u − τ)₊²]` for `u ~ χ_{2M}`:
/// `(2^{1−M}/Γ(M)) ∫_τ^∞ (u−τ)² u^{2M−1} e^{−u²/2} du`.
///
/// Expanding the square gives
/// `2M·Q(M+1, x) − 2τ·E[u]·Q(M+½, x) + τ²·Q(M, x)` with `x = τ²/2`.
pub fn chi_tail_term(m: usize, tau: f64) -> f64 {
    assert!(m >= 1, "group must have at least one antenna");
    let tau = tau.max(0.0);
    let mf = m as f64;
    let x = 0.5 * tau * tau;
    let value = 2.0 * mf * upper_q(mf + 1.0, x) - 2.0 * tau * chi_mean(m) * upper_q(mf + 0.5, x)
        + tau * tau * upper_q(mf, x);
    value.clamp(0.0, 2.0 * mf)
}

/// Left side of the first-order condition for `τ*`:
/// `(2^{1−M}/Γ(M)) ∫_τ^∞ (u/τ − 1) u^{2M−1} e^{−u²/2} du`.
///
/// Strictly decreasing on `(0, ∞)` from `+∞` to `0`.
pub fn stationarity_lhs(m: usize, tau: f64) -> f64 {
    let mf = m as f64;
    let x = 0.5 * tau * tau;
    (chi_mean(m) * upper_q(mf + 0.5, x) / tau - upper_q(mf, x)).max(0.0)
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("rho = {rho} must lie in [0, 1]")))
    }
}

/// Solves `stationarity_lhs(M, τ) = target` by bracketing and 200 bisection steps.
fn solve_tau(m: usize, target: f64) -> f64 {
    let mut lo = 1e-6;
    let mut hi = 1.0;
    // The root can sit below the default lower end when the target is huge.
    while stationarity_lhs(m, lo) < target && lo > 1e-300 {
        hi = lo;
        lo *= 0.5;
    }
    while stationarity_lhs(m, hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stationarity_lhs(m, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `τ*` for the plain group norm: root of `lhs(τ) = ρ / (1 − ρ)`.
pub fn tau_star_plain(rho: f64, m: usize) -> Result<f64> {
    tau_star_smoothed(rho, m, 0.0, GroupMoments::ZERO)
}

/// `τ*` for the smoothed norm: root of `lhs(τ) = ρ(1 + 2μā + μ²b̄) / (1 − ρ)`.
pub fn tau_star_smoothed(rho: f64, m: usize, mu: f64, moments: GroupMoments) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::OutOfRange(format!("rho = {rho} must lie in (0, 1)")));
    }
    if m == 0 {
        return Err(Error::OutOfRange("M must be at least 1".into()));
    }
    if mu < 0.0 {
        return Err(Error::OutOfRange(format!("mu = {mu} must be non-negative")));
    }
    let target = rho * moments.smoothing_factor(mu) / (1.0 - rho);
    Ok(solve_tau(m, target))
}

/// Per-device value of the bound at a given `τ`.
pub fn bound_objective(rho: f64, m: usize, tau: f64, smoothing_factor: f64) -> f64 {
    rho * (2.0 * m as f64 + smoothing_factor * tau * tau) + (1.0 - rho) * chi_tail_term(m, tau)
}

/// Statistical-dimension bound for the plain group norm.
pub fn statdim_plain(rho: f64, m: usize, n: usize) -> Result<StatDimResult> {
    statdim_smoothed(rho, m, n, 0.0, GroupMoments::ZERO)
}

/// Statistical-dimension bound for the norm plus `μ/2 ‖·‖²_F`.
pub fn statdim_smoothed(rho: f64, m: usize, n: usize, mu: f64, moments: GroupMoments) -> Result<StatDimResult> {
    check_rho(rho)?;
    if m == 0 || n == 0 {
        return Err(Error::OutOfRange("M and N must be at least 1".into()));
    }
    let ambient = 2.0 * (n * m) as f64;
    let (tau_star, delta) = if rho == 0.0 {
        (f64::INFINITY, 0.0)
    } else if rho == 1.0 {
        (0.0, ambient)
    } else {
        let tau = tau_star_smoothed(rho, m, mu, moments)?;
        let per_device = bound_objective(rho, m, tau, moments.smoothing_factor(mu));
        (tau, (n as f64 * per_device).clamp(0.0, ambient))
    };
    Ok(StatDimResult {
        delta,
        tau_star,
        delta_seq: delta / (2.0 * m as f64),
    })
}

/// Monte Carlo estimate of `inf_τ E[dist²(G, τ·∂R(Θ̃₀))]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub delta: f64,
    pub std_error: f64,
    /// Grid point attaining the minimum.
    pub tau: f64,
}

const MC_BATCH: usize = 1000;

/// Samples `dist²(G, τ·∂R(Θ̃₀))` for standard Gaussian `G` and returns the
/// smallest sample mean over `tau_grid`.
///
/// Active groups contribute `‖G_Vi − τ(Θ_Vi/‖Θ_Vi‖ + μΘ_Vi)‖²_F`, inactive
/// ones `max{‖G_Vi‖ − τ, 0}²`. `mu = 0` gives the plain norm. The same draws
/// are shared across the grid. Batches of 1000 samples use sub-seeds derived
/// from `seed`, so the result does not depend on the thread pool.
pub fn statdim_monte_carlo(
    truth: &GroundTruth,
    tau_grid: &[f64],
    samples: usize,
    seed: u64,
    mu: f64,
) -> Result<MonteCarloEstimate> {
    if samples < 1000 {
        return Err(Error::OutOfRange(format!("need at least 1000 samples, got {samples}")));
    }
    if tau_grid.is_empty() || tau_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::OutOfRange("tau grid must be non-empty and non-negative".into()));
    }
    let theta = truth.stacked();
    let n = truth.n();
    let m = truth.m();
    let norms = linalg::group_norms(theta.view());

    // Target direction per active group; `None` marks an inactive group.
    let targets: Vec<Option<Array2<f64>>> = (0..n)
        .map(|i| {
            if norms[i] > 0.0 {
                let mut block = Array2::zeros((2, m));
                block.row_mut(0).assign(&theta.row(i));
                block.row_mut(1).assign(&theta.row(i + n));
                let scale = 1.0 / norms[i] + mu;
                Some(block * scale)
            } else {
                None
            }
        })
        .collect();
    let target_sq: Vec<f64> = targets
        .iter()
        .map(|t| t.as_ref().map_or(0.0, |b| linalg::frobenius_sq(b.view())))
        .collect();

    let grid_len = tau_grid.len();
    let batches = samples.div_ceil(MC_BATCH);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = MC_BATCH.min(samples - b * MC_BATCH);
            let mut rng = rng_from(derive_seed(seed, b as u64, 0));
            let mut sum = vec![0.0; grid_len];
            let mut sum_sq = vec![0.0; grid_len];
            let mut dist = vec![0.0; grid_len];
            for _ in 0..count {
                dist.iter_mut().for_each(|d| *d = 0.0);
                for (i, target) in targets.iter().enumerate() {
                    let mut g_sq = 0.0;
                    let mut g_dot = 0.0;
                    for r in 0..2 {
                        for c in 0..m {
                            let g: f64 = rng.sample(StandardNormal);
                            g_sq += g * g;
                            if let Some(t) = target {
                                g_dot += g * t[[r, c]];
                            }
                        }
                    }
                    match target {
                        Some(_) => {
                            for (d, &tau) in dist.iter_mut().zip(tau_grid) {
                                *d += g_sq - 2.0 * tau * g_dot + tau * tau * target_sq[i];
                            }
                        }
                        None => {
                            let g_norm = g_sq.sqrt();
                            for (d, &tau) in dist.iter_mut().zip(tau_grid) {
                                let excess = (g_norm - tau).max(0.0);
                                *d += excess * excess;
                            }
                        }
                    }
                }
                for k in 0..grid_len {
                    sum[k] += dist[k];
                    sum_sq[k] += dist[k] * dist[k];
                }
            }
            (sum, sum_sq)
        })
        .collect();

    let mut sum = vec![0.0; grid_len];
    let mut sum_sq = vec![0.0; grid_len];
    for (s, sq) in &partials {
        for k in 0..grid_len {
            sum[k] += s[k];
            sum_sq[k] += sq[k];
        }
    }
    let count = samples as f64;
    let (best, mean) = sum
        .iter()
        .map(|s| s / count)
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    let var = (sum_sq[best] / count - mean * mean).max(0.0) * count / (count - 1.0);
    Ok(MonteCarloEstimate {
        delta: mean,
        std_error: (var / count).sqrt(),
        tau: tau_grid[best],
    })
}

/// `√(8 log(4/η))`.
pub fn a_eta(eta: f64) -> f64 {
    (8.0 * (4.0 / eta).ln()).max(0.0).sqrt()
}

/// Success and failure lengths for a given bound and margin `a_η`.
///
/// Success: `2L ≥ δ/M + a_η√(2NM)/M`, rounded up. Failure:
/// `2L ≤ δ/M − a_η√(2NM)/M`, rounded down and clamped at zero.
pub fn transition_with_margin(delta: f64, n: usize, m: usize, margin: f64) -> (usize, usize) {
    let mf = m as f64;
    let spread = margin * (2.0 * (n * m) as f64).sqrt() / mf;
    let success = (0.5 * (delta / mf + spread)).ceil().max(0.0) as usize;
    let fail = (0.5 * (delta / mf - spread)).floor().max(0.0) as usize;
    (success, fail)
}

/// Predicted transition for `S` active devices out of `N` with `M` antennas.
pub fn predict_transition(n: usize, m: usize, s: usize, eta: f64) -> Result<TransitionPrediction> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::OutOfRange(format!("eta = {eta} must lie in (0, 1)")));
    }
    if s > n {
        return Err(Error::OutOfRange(format!("S = {s} exceeds N = {n}")));
    }
    let bound = statdim_plain(s as f64 / n as f64, m, n)?;
    let margin = a_eta(eta);
    let (l_success, l_fail) = transition_with_margin(bound.delta, n, m, margin);
    Ok(TransitionPrediction {
        l_success,
        l_fail,
        eta,
        a_eta: margin,
        delta_seq: bound.delta_seq,
    })
}

/// Error levels on either side of the transition at `delta_seq`.
pub fn predict_noisy_error(l: f64, delta_seq: f64) -> NoisyPrediction {
    if l < delta_seq {
        NoisyPrediction {
            worst_case_ratio: 1.0,
            empirical_limit_ratio: 0.0,
            at_boundary: false,
        }
    } else {
        let ratio = delta_seq / l;
        NoisyPrediction {
            worst_case_ratio: ratio,
            empirical_limit_ratio: 1.0 - ratio,
            at_boundary: l == delta_seq,
        }
    }
}

/// Constraint radius `ε = σ√(2LM − δ)` from the expected empirical error.
///
/// `sigma2_real` is the per-real-component noise variance.
pub fn epsilon_rule(sigma2_real: f64, l: usize, m: usize, delta_smoothed: f64) -> Result<f64> {
    let capacity = 2.0 * (l * m) as f64;
    if capacity <= delta_smoothed {
        return Err(Error::InfeasibleRadius { capacity, delta: delta_smoothed });
    }
    Ok(sigma2_real.max(0.0).sqrt() * (capacity - delta_smoothed).sqrt())
}

/// Signature length that keeps the worst-case normalized error at `gamma1`
/// under smoothing `mu`: `⌈δ_μ / (2M γ₁)⌉`.
pub fn plan_sequence_length(
    mu: f64,
    gamma1: f64,
    rho: f64,
    m: usize,
    n: usize,
    moments: GroupMoments,
) -> Result<usize> {
    if !(gamma1 > 0.0) {
        return Err(Error::OutOfRange(format!("gamma1 = {gamma1} must be positive")));
    }
    let bound = statdim_smoothed(rho, m, n, mu, moments)?;
    Ok((bound.delta / (2.0 * m as f64 * gamma1)).ceil() as usize)
}
