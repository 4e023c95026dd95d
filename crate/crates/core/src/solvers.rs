//! Solvers for the real-embedded recovery problems.
//!
//! [`solve_smoothed_dual`] runs the Lan–Lu–Monteiro accelerated scheme on the
//! dual of
//!
//! ```text
//! minimize  Σᵢ ‖Θ_Vi‖_F + μ/2 ‖Θ‖²_F   subject to  ‖Q̃Θ − Ỹ‖_F ≤ ε
//! ```
//!
//! whose smooth part has gradient `Q̃Θ_Z − Ỹ` with Lipschitz constant
//! `‖Q̃‖²₂ / μ`. [`solve_pb_projected_gradient`] solves the norm-constrained
//! least-squares problem `min ‖Q̄Θ − Ỹ‖²_F s.t. Σᵢ ‖Θ_Vi‖_F ≤ r` and serves as
//! the reference.

use std::time::Instant;

use ndarray::{Array1, ArrayView2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, frobenius_sq, group_count, group_norms, inner, scale_groups};
use crate::model::{rng_from, RealMatrix};

/// `max{1 − t/‖Z‖_F, 0} · Z`.
pub fn shrink(z: ArrayView2<f64>, t: f64) -> RealMatrix {
    let norm = frobenius(z);
    if t <= 0.0 {
        return z.to_owned();
    }
    if norm <= t {
        return RealMatrix::zeros(z.raw_dim());
    }
    z.mapv(|v| v * (1.0 - t / norm))
}

/// Applies [`shrink`] to every `2 × M` block `V_i = {i, i + N}`.
pub fn group_soft_threshold(x: ArrayView2<f64>, t: f64) -> RealMatrix {
    let mut out = x.to_owned();
    if t <= 0.0 {
        return out;
    }
    let scale = group_norms(x).mapv(|n| if n > t { 1.0 - t / n } else { 0.0 });
    scale_groups(out.view_mut(), &scale);
    out
}

/// Largest singular value by power iteration on `QᵀQ`.
///
/// Stops when the Rayleigh quotient changes by at most `tol` relative.
pub fn spectral_norm(q: ArrayView2<f64>, tol: f64) -> f64 {
    let cols = q.ncols();
    if cols == 0 || q.nrows() == 0 {
        return 0.0;
    }
    let mut rng = rng_from(0x5eed);
    let mut v = Array1::from_shape_simple_fn(cols, || rng.sample::<f64, _>(StandardNormal));
    v /= v.dot(&v).sqrt();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let qv = q.dot(&v);
        let next = qv.dot(&qv);
        let w = q.t().dot(&qv);
        let w_norm = w.dot(&w).sqrt();
        if w_norm == 0.0 {
            return 0.0;
        }
        v = w / w_norm;
        if (next - lambda).abs() <= tol * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// Minimizer of `Σᵢ ‖Θ_Vi‖_F + μ/2 ‖Θ‖²_F − ⟨Z, Q̃Θ⟩`:
/// `μ⁻¹ · group_soft_threshold(Q̃ᵀZ, 1)`.
pub fn theta_from_dual(z: ArrayView2<f64>, qt: ArrayView2<f64>, mu: f64) -> RealMatrix {
    let mut theta = group_soft_threshold(qt.t().dot(&z).view(), 1.0);
    theta.mapv_inplace(|v| v / mu);
    theta
}

/// `∇D̃(Z) = Q̃Θ_Z − Ỹ`.
pub fn dual_gradient(z: ArrayView2<f64>, qt: ArrayView2<f64>, yt: ArrayView2<f64>, mu: f64) -> RealMatrix {
    let theta = theta_from_dual(z, qt, mu);
    qt.dot(&theta) - yt
}

/// Smooth part `D̃(Z) = −inf_Θ {R̃(Θ) − ⟨Z, Q̃Θ⟩} − ⟨Z, Ỹ⟩`.
///
/// The infimum has the closed form `−Σᵢ (‖(Q̃ᵀZ)_Vi‖ − 1)₊² / (2μ)`.
pub fn smooth_dual_value(z: ArrayView2<f64>, qt: ArrayView2<f64>, yt: ArrayView2<f64>, mu: f64) -> f64 {
    let w = qt.t().dot(&z);
    smooth_dual_from_correlation(w.view(), z, yt, mu)
}

fn smooth_dual_from_correlation(w: ArrayView2<f64>, z: ArrayView2<f64>, yt: ArrayView2<f64>, mu: f64) -> f64 {
    let excess: f64 = group_norms(w).iter().map(|&n| (n - 1.0).max(0.0).powi(2)).sum();
    excess / (2.0 * mu) - inner(z, yt)
}

/// Composite dual objective `D(Z) = D̃(Z) + ε‖Z‖_F` (minimized).
pub fn dual_objective(z: ArrayView2<f64>, qt: ArrayView2<f64>, yt: ArrayView2<f64>, mu: f64, epsilon: f64) -> f64 {
    smooth_dual_value(z, qt, yt, mu) + epsilon * frobenius(z)
}

/// Threshold used in the `Z` update of the accelerated scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZStepVariant {
    /// Composite gradient mapping with step `1/L_s`: threshold `ε / L_s`.
    #[default]
    LipschitzScaled,
    /// Threshold `ε / t_k`, the unscaled step-size form.
    PaperLiteral,
}

impl std::str::FromStr for ZStepVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lipschitz_scaled" | "lipschitz-scaled" => Ok(Self::LipschitzScaled),
            "paper_literal" | "paper-literal" => Ok(Self::PaperLiteral),
            other => Err(Error::InvalidConfig(format!("unknown z-step variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub mu: f64,
    /// Constraint radius. Zero switches to the absolute stopping rule
    /// `‖Q̃Θ − Ỹ‖_F ≤ γ₀‖Ỹ‖_F`.
    pub epsilon: f64,
    /// Tolerance on the relative feasibility gap `|‖Q̃Θ − Ỹ‖_F − ε| / ε`.
    pub gamma_stop: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub z_step_variant: ZStepVariant,
    #[serde(default = "default_power_tol")]
    pub power_iter_tol: f64,
    /// Reset the momentum when the gradient-mapping step points uphill.
    #[serde(default)]
    pub restart: bool,
    #[serde(default)]
    pub record_trace: bool,
}

fn default_power_tol() -> f64 {
    1e-10
}

impl SolverOptions {
    pub fn new(mu: f64, epsilon: f64) -> Self {
        Self {
            mu,
            epsilon,
            gamma_stop: 1e-3,
            max_iter: 10_000,
            z_step_variant: ZStepVariant::default(),
            power_iter_tol: default_power_tol(),
            restart: false,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu = {} must be positive", self.mu)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon = {} must be non-negative", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Feasibility gap for the dual solver, relative iterate change for the
    /// projected-gradient solver.
    pub gap: f64,
    /// Dual objective `D(Z_{k+1})` for the dual solver, `½‖Q̄Θ − Ỹ‖²_F` for the
    /// projected-gradient solver.
    pub objective: f64,
    pub elapsed_ns: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// `2N × M` real-embedded estimate.
    pub theta_hat: RealMatrix,
    pub iterations: usize,
    pub final_gap: f64,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
}

impl Estimate {
    pub fn theta_complex(&self) -> crate::model::ComplexMatrix {
        crate::model::real_to_complex_stack(self.theta_hat.view()).expect("estimates have even row count")
    }
}

fn check_shapes(q: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<()> {
    if q.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "operator has {} rows but observation has {}",
            q.nrows(),
            y.nrows()
        )));
    }
    if !q.ncols().is_multiple_of(2) {
        return Err(Error::Dimension(format!("operator has odd column count {}", q.ncols())));
    }
    Ok(())
}

/// Accelerated dual scheme for the smoothed problem.
///
/// Starting from `Z₀ = Z̄₀ = 0`, `t₀ = 1`, each iteration forms
/// `B_k = (1 − t_k)Z_k + t_k Z̄_k`, the primal point `Θ_k = Θ_{B_k}`, then
/// takes the two composite gradient steps on `Z̄` and `Z`. The returned
/// estimate is the primal point at which the stopping rule fired, or the one
/// with the smallest gap if `max_iter` is exhausted.
pub fn solve_smoothed_dual(qt: ArrayView2<f64>, yt: ArrayView2<f64>, options: &SolverOptions) -> Result<Estimate> {
    options.validate()?;
    check_shapes(qt, yt)?;
    let start = Instant::now();
    let mu = options.mu;
    let eps = options.epsilon;
    let y_norm = frobenius(yt);
    let theta_dim = (qt.ncols(), yt.ncols());

    // Θ = 0 is the unconstrained minimizer; if it is feasible it is optimal.
    if y_norm <= eps {
        return Ok(Estimate {
            theta_hat: RealMatrix::zeros(theta_dim),
            iterations: 1,
            final_gap: 0.0,
            converged: true,
            trace: Vec::new(),
        });
    }

    let q_norm = spectral_norm(qt, options.power_iter_tol);
    let lipschitz = q_norm * q_norm / mu;
    let gap_of = |resid_norm: f64| {
        if eps > 0.0 {
            (resid_norm - eps).abs() / eps
        } else {
            resid_norm / y_norm
        }
    };

    let mut z = RealMatrix::zeros(yt.raw_dim());
    let mut z_bar = z.clone();
    let mut t = 1.0_f64;
    let mut best: Option<(f64, RealMatrix)> = None;
    let mut trace = Vec::new();

    for k in 0..options.max_iter {
        let b = if t == 1.0 { z_bar.clone() } else { &z * (1.0 - t) + &z_bar * t };
        let theta = theta_from_dual(b.view(), qt, mu);
        let resid = qt.dot(&theta) - yt;
        let gap = gap_of(frobenius(resid.view()));

        if gap <= options.gamma_stop {
            if options.record_trace {
                trace.push(TraceRecord {
                    iteration: k + 1,
                    gap,
                    objective: dual_objective(b.view(), qt, yt, mu, eps),
                    elapsed_ns: start.elapsed().as_nanos(),
                });
            }
            return Ok(Estimate {
                theta_hat: theta,
                iterations: k + 1,
                final_gap: gap,
                converged: true,
                trace,
            });
        }

        let step_bar = 1.0 / (lipschitz * t);
        let z_bar_next = shrink((&z_bar - &(&resid * step_bar)).view(), eps * step_bar);
        let z_threshold = match options.z_step_variant {
            ZStepVariant::LipschitzScaled => eps / lipschitz,
            ZStepVariant::PaperLiteral => eps / t,
        };
        let z_next = shrink((&b - &(&resid / lipschitz)).view(), z_threshold);

        let uphill = options.restart && {
            let mut acc = 0.0;
            Zip::from(&b).and(&z_next).and(&z).for_each(|&bv, &zn, &zv| acc += (bv - zn) * (zn - zv));
            acc > 0.0
        };
        if uphill {
            z_bar = z_next.clone();
            t = 1.0;
        } else {
            z_bar = z_bar_next;
            t = 2.0 / (1.0 + (1.0 + 4.0 / (t * t)).sqrt());
        }
        z = z_next;

        if options.record_trace {
            trace.push(TraceRecord {
                iteration: k + 1,
                gap,
                objective: dual_objective(z.view(), qt, yt, mu, eps),
                elapsed_ns: start.elapsed().as_nanos(),
            });
        }
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, theta));
        }
    }

    let (final_gap, theta_hat) = best.expect("at least one iteration ran");
    Ok(Estimate {
        theta_hat,
        iterations: options.max_iter,
        final_gap,
        converged: false,
        trace,
    })
}

/// Euclidean projection onto `{X : Σᵢ ‖X_Vi‖_F ≤ r}`.
///
/// The group norms are projected onto the `ℓ₁` ball of radius `r` by the
/// sort-and-threshold rule; each block is then rescaled.
pub fn project_group_l1_ball(x: ArrayView2<f64>, r: f64) -> RealMatrix {
    let norms = group_norms(x);
    let total: f64 = norms.sum();
    if total <= r {
        return x.to_owned();
    }
    if r <= 0.0 {
        return RealMatrix::zeros(x.raw_dim());
    }
    let lambda = l1_threshold(&norms, r);
    let scale = norms.mapv(|n| if n > lambda { 1.0 - lambda / n } else { 0.0 });
    let mut out = x.to_owned();
    scale_groups(out.view_mut(), &scale);
    out
}

/// `λ` with `Σ max{nᵢ − λ, 0} = r`, assuming `Σ nᵢ > r > 0` and `nᵢ ≥ 0`.
fn l1_threshold(norms: &Array1<f64>, r: f64) -> f64 {
    let mut sorted = norms.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut lambda = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - r) / (j + 1) as f64;
        if u > candidate {
            lambda = candidate;
        } else {
            break;
        }
    }
    lambda.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedGradientOptions {
    /// Stop when `‖Θ_{k+1} − Θ_k‖_F / ‖Θ_{k+1}‖_F ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Nesterov momentum with gradient-based restart. Without it every step
    /// is a plain projected gradient step and the objective is monotone.
    #[serde(default)]
    pub accelerated: bool,
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for ProjectedGradientOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            accelerated: false,
            record_trace: false,
        }
    }
}

/// Projected gradient on `½‖Q̄Θ − Ỹ‖²_F` over the group-norm ball of radius
/// `radius`, with step `1/‖Q̄‖²₂`.
pub fn solve_pb_projected_gradient(
    qb: ArrayView2<f64>,
    yt: ArrayView2<f64>,
    radius: f64,
    options: &ProjectedGradientOptions,
) -> Result<Estimate> {
    check_shapes(qb, yt)?;
    if !(radius >= 0.0) {
        return Err(Error::InvalidConfig(format!("radius = {radius} must be non-negative")));
    }
    if options.max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    let start = Instant::now();
    let q_norm = spectral_norm(qb, 1e-12);
    if q_norm == 0.0 {
        return Ok(Estimate {
            theta_hat: RealMatrix::zeros((qb.ncols(), yt.ncols())),
            iterations: 1,
            final_gap: 0.0,
            converged: true,
            trace: Vec::new(),
        });
    }
    let step = 1.0 / (q_norm * q_norm);
    group_count(qb.t());

    let mut x = RealMatrix::zeros((qb.ncols(), yt.ncols()));
    let mut point = x.clone();
    let mut t = 1.0_f64;
    let mut trace = Vec::new();
    let mut change = f64::INFINITY;

    for k in 0..options.max_iter {
        let resid = qb.dot(&point) - yt;
        let grad = qb.t().dot(&resid);
        let x_next = project_group_l1_ball((&point - &(grad * step)).view(), radius);
        let diff = &x_next - &x;
        change = frobenius(diff.view()) / frobenius(x_next.view()).max(f64::MIN_POSITIVE);
        if frobenius_sq(diff.view()) == 0.0 {
            change = 0.0;
        }

        if options.accelerated {
            let mut acc = 0.0;
            Zip::from(&point).and(&x_next).and(&x).for_each(|&p, &xn, &xo| acc += (p - xn) * (xn - xo));
            if acc > 0.0 {
                t = 1.0;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            point = &x_next + &(diff * ((t - 1.0) / t_next));
            t = t_next;
        } else {
            point = x_next.clone();
        }
        x = x_next;

        if options.record_trace {
            let r = qb.dot(&x) - yt;
            trace.push(TraceRecord {
                iteration: k + 1,
                gap: change,
                objective: 0.5 * frobenius_sq(r.view()),
                elapsed_ns: start.elapsed().as_nanos(),
            });
        }
        if change <= options.tol {
            return Ok(Estimate {
                theta_hat: x,
                iterations: k + 1,
                final_gap: change,
                converged: true,
                trace,
            });
        }
    }
    Ok(Estimate {
        theta_hat: x,
        iterations: options.max_iter,
        final_gap: change,
        converged: false,
        trace,
    })
}
