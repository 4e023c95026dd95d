//! Seeded Monte Carlo sweeps.
//!
//! Every trial draws its instance from `derive_seed(master_seed, point,
//! trial)`, so results do not depend on the thread pool. Sweeps over `μ` or
//! over sensing ensembles reuse the point index of the underlying `(S, L)`
//! pair and therefore see the same channels and noise.

mod analysis;
mod spec;
mod table;

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

pub use analysis::{crossing_length, isotonic_fit, mean, median, std_error};
pub use spec::{Ensemble, Experiment, NoiselessSolver, SweepSpec};
pub use table::{fmt_f64, fmt_opt, sibling_path, CsvTable};

use crate::detect::{empirical_error, estimation_error, prediction_error, recovery_success};
use crate::error::{Error, Result};
use crate::linalg::group_norm_sum;
use crate::model::{
    complex_to_real_stack, derive_seed, gaussian_real_sensing, generate_system, row_orthonormalize, GroundTruth,
    RealMatrix, SystemConfig,
};
use crate::solvers::{
    solve_pb_projected_gradient, solve_smoothed_dual, Estimate, ProjectedGradientOptions, SolverOptions,
};
use crate::statdim::{
    a_eta, epsilon_rule, gaussian_moments, predict_noisy_error, statdim_plain, statdim_smoothed, transition_with_margin,
};

/// One solved Monte Carlo instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: Experiment,
    pub ensemble: Ensemble,
    pub point: usize,
    pub s: usize,
    pub l: usize,
    /// Smoothing used by the solver; `0` for the norm-ball reference.
    pub mu: f64,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub converged: bool,
    /// Prediction error `‖Q̄(Θ̂ − Θ₀)‖² / (2LM)`.
    pub r: f64,
    /// Empirical error `‖Q̄Θ̂ − Ỹ‖² / (2LM)`.
    pub r_hat: f64,
    /// `‖Θ̂ − Θ₀‖² / (NM)`.
    pub est_error: f64,
    pub missed: usize,
    pub false_alarm: usize,
    pub iterations: usize,
    pub wall_ns: u128,
}

/// Aggregate over the trials of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub ensemble: Ensemble,
    pub mu: f64,
    pub s: usize,
    pub l: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_prob: f64,
    pub nonconverged: usize,
    pub mean_iterations: f64,
    pub median_iterations: f64,
    pub mean_r: f64,
    pub se_r: f64,
    pub mean_r_hat: f64,
    pub mean_est_error: f64,
    pub se_est_error: f64,
    pub mean_missed: f64,
    pub mean_false_alarm: f64,
    /// Predicted transition `δ/(2M)` for this point (smoothed when `μ > 0`).
    pub delta_seq: f64,
    pub l_fail: usize,
    pub l_success: usize,
    /// Constraint radius of noisy smoothed solves.
    pub epsilon: Option<f64>,
    /// Set when `ε` had to fall back to the unsmoothed bound.
    pub eps_fallback: bool,
    /// Mean error of the norm-ball reference on the same instances.
    pub oracle_est_error: Option<f64>,
}

/// Empirical 5/50/95% crossing lengths for one `(ensemble, μ, S)` curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSummary {
    pub ensemble: Ensemble,
    pub mu: f64,
    pub s: usize,
    pub l05: Option<f64>,
    pub l50: Option<f64>,
    pub l95: Option<f64>,
    pub delta_seq: f64,
    pub l_fail: usize,
    pub l_success: usize,
}

impl TransitionSummary {
    pub fn width(&self) -> Option<f64> {
        Some(self.l95? - self.l05?)
    }
}

/// One iteration of a convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub mu: f64,
    pub s: usize,
    pub l: usize,
    pub iteration: usize,
    pub gap: f64,
    pub objective: f64,
    pub elapsed_ns: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatdimRow {
    pub rho: f64,
    pub m: usize,
    pub n: usize,
    pub mu: f64,
    pub tau_star: f64,
    pub delta: f64,
    pub delta_seq: f64,
    pub l_fail: usize,
    pub l_success: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub experiment: Experiment,
    pub points: Vec<PointSummary>,
    pub transitions: Vec<TransitionSummary>,
    pub trials: Vec<TrialRecord>,
    pub traces: Vec<TraceRow>,
    pub statdim: Vec<StatdimRow>,
}

impl SweepResult {
    fn empty(experiment: Experiment) -> Self {
        Self {
            experiment,
            points: Vec::new(),
            transitions: Vec::new(),
            trials: Vec::new(),
            traces: Vec::new(),
            statdim: Vec::new(),
        }
    }

    pub fn point(&self, ensemble: Ensemble, mu: f64, s: usize, l: usize) -> Option<&PointSummary> {
        self.points.iter().find(|p| p.ensemble == ensemble && p.mu == mu && p.s == s && p.l == l)
    }

    pub fn transition(&self, ensemble: Ensemble, mu: f64, s: usize) -> Option<&TransitionSummary> {
        self.transitions.iter().find(|t| t.ensemble == ensemble && t.mu == mu && t.s == s)
    }
}

/// Runs the experiment named in `spec`.
pub fn run(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    match spec.experiment {
        Experiment::PhaseMap => run_phase_map(spec),
        Experiment::NoisyError => run_noisy_error(spec),
        Experiment::SmoothingMap => run_smoothing_map(spec),
        Experiment::Convergence => run_convergence(spec),
        Experiment::ErrorVsMu => run_error_vs_mu(spec),
        Experiment::EmbeddingCompare => run_embedding_compare(spec),
        Experiment::StatdimTable => run_statdim_table(spec),
    }
}

/// `(S, L)` grid in the order the point indices are assigned.
fn grid(spec: &SweepSpec) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for &s in &spec.s_values {
        for l in spec.lengths(s)? {
            out.push((s, l));
        }
    }
    Ok(out)
}

struct Instance {
    truth: GroundTruth,
    theta0: RealMatrix,
    qb: RealMatrix,
    yt: RealMatrix,
}

fn draw_instance(
    spec: &SweepSpec,
    s: usize,
    l: usize,
    sigma2: f64,
    seed: u64,
    ensemble: Ensemble,
    orthonormal: bool,
) -> Result<Instance> {
    let cfg = SystemConfig {
        sigma2,
        master_seed: spec.master_seed,
        gamma_stop: spec.gamma_stop,
        gamma_act: spec.gamma_act,
        ..SystemConfig::new(spec.n, spec.m, l, s)
    };
    let (truth, obs) = generate_system(&cfg, seed)?;
    let theta0 = truth.stacked();
    let (qb, yt) = match ensemble {
        Ensemble::Structured if !orthonormal => (obs.q_embedded(), obs.y_stacked()),
        _ => {
            let raw = match ensemble {
                Ensemble::Structured => obs.q_embedded(),
                Ensemble::Gaussian => gaussian_real_sensing(l, spec.n, spec.gaussian_variance, derive_seed(seed, 1, 0)),
            };
            let qb = if orthonormal { row_orthonormalize(raw.view())? } else { raw };
            let yt = qb.dot(&theta0) + complex_to_real_stack(obs.noise.view());
            (qb, yt)
        }
    };
    Ok(Instance { truth, theta0, qb, yt })
}

fn reference_solve(spec: &SweepSpec, inst: &Instance) -> Result<Estimate> {
    let opts = ProjectedGradientOptions {
        tol: spec.pg_tol,
        max_iter: spec.max_iter,
        accelerated: true,
        record_trace: false,
    };
    solve_pb_projected_gradient(inst.qb.view(), inst.yt.view(), group_norm_sum(inst.theta0.view()), &opts)
}

fn noiseless_smoothed_solve(spec: &SweepSpec, inst: &Instance, mu: f64) -> Result<Estimate> {
    let opts = SolverOptions {
        gamma_stop: spec.noiseless_gamma_stop,
        max_iter: spec.max_iter,
        restart: true,
        ..SolverOptions::new(mu, 0.0)
    };
    solve_smoothed_dual(inst.qb.view(), inst.yt.view(), &opts)
}

#[allow(clippy::too_many_arguments)]
fn record(
    spec: &SweepSpec,
    inst: &Instance,
    est: &Estimate,
    ensemble: Ensemble,
    (point, s, l): (usize, usize, usize),
    mu: f64,
    (trial, seed): (usize, u64),
    wall_ns: u128,
) -> Result<TrialRecord> {
    let detection = crate::detect::detect_activity(est.theta_complex().view(), spec.gamma_act, &inst.truth)?;
    Ok(TrialRecord {
        experiment: spec.experiment,
        ensemble,
        point,
        s,
        l,
        mu,
        trial,
        seed,
        success: est.converged && recovery_success(est.theta_hat.view(), inst.theta0.view(), spec.success_tol, false),
        converged: est.converged,
        r: prediction_error(inst.qb.view(), est.theta_hat.view(), inst.theta0.view()),
        r_hat: empirical_error(inst.qb.view(), est.theta_hat.view(), inst.yt.view()),
        est_error: estimation_error(est.theta_hat.view(), inst.theta0.view()),
        missed: detection.missed,
        false_alarm: detection.false_alarm,
        iterations: est.iterations,
        wall_ns,
    })
}

/// Noiseless recovery trial; `mu = 0` selects the configured solver.
fn noiseless_trial(
    spec: &SweepSpec,
    ensemble: Ensemble,
    (point, s, l): (usize, usize, usize),
    mu: f64,
    trial: usize,
) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = derive_seed(spec.master_seed, point as u64, trial as u64);
    let inst = draw_instance(spec, s, l, 0.0, seed, ensemble, false)?;
    let (est, mu_used) = if mu > 0.0 {
        (noiseless_smoothed_solve(spec, &inst, mu)?, mu)
    } else {
        match spec.solver {
            NoiselessSolver::Reference => (reference_solve(spec, &inst)?, 0.0),
            NoiselessSolver::Smoothed => (noiseless_smoothed_solve(spec, &inst, spec.smoothed_mu)?, spec.smoothed_mu),
        }
    };
    let wall = start.elapsed().as_nanos();
    record(spec, &inst, &est, ensemble, (point, s, l), mu_used, (trial, seed), wall)
}

/// Predicted `(delta, delta_seq)` for sparsity `s / n`, smoothed when `mu > 0`.
fn predicted_bound(spec: &SweepSpec, s: usize, mu: f64) -> Result<(f64, f64)> {
    let rho = s as f64 / spec.n as f64;
    let b = if mu > 0.0 {
        statdim_smoothed(rho, spec.m, spec.n, mu, gaussian_moments(spec.m, FRAC_1_SQRT_2))?
    } else {
        statdim_plain(rho, spec.m, spec.n)?
    };
    Ok((b.delta, b.delta_seq))
}

fn summarize(spec: &SweepSpec, ensemble: Ensemble, mu: f64, s: usize, l: usize, trials: &[&TrialRecord]) -> Result<PointSummary> {
    let (delta, delta_seq) = predicted_bound(spec, s, mu)?;
    let (l_success, l_fail) = transition_with_margin(delta, spec.n, spec.m, a_eta(spec.eta));
    let successes = trials.iter().filter(|t| t.success).count();
    let iters: Vec<usize> = trials.iter().map(|t| t.iterations).collect();
    let rs: Vec<f64> = trials.iter().map(|t| t.r).collect();
    let errs: Vec<f64> = trials.iter().map(|t| t.est_error).collect();
    let k = trials.len() as f64;
    Ok(PointSummary {
        ensemble,
        mu,
        s,
        l,
        trials: trials.len(),
        successes,
        success_prob: successes as f64 / k,
        nonconverged: trials.iter().filter(|t| !t.converged).count(),
        mean_iterations: iters.iter().sum::<usize>() as f64 / k,
        median_iterations: median(&iters),
        mean_r: mean(&rs),
        se_r: std_error(&rs),
        mean_r_hat: mean(&trials.iter().map(|t| t.r_hat).collect::<Vec<_>>()),
        mean_est_error: mean(&errs),
        se_est_error: std_error(&errs),
        mean_missed: trials.iter().map(|t| t.missed as f64).sum::<f64>() / k,
        mean_false_alarm: trials.iter().map(|t| t.false_alarm as f64).sum::<f64>() / k,
        delta_seq,
        l_fail,
        l_success,
        epsilon: None,
        eps_fallback: false,
        oracle_est_error: None,
    })
}

fn transitions_of(points: &[PointSummary]) -> Vec<TransitionSummary> {
    let mut keys: Vec<(Ensemble, f64, usize)> = Vec::new();
    for p in points {
        let key = (p.ensemble, p.mu, p.s);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(ensemble, mu, s)| {
            let curve: Vec<&PointSummary> =
                points.iter().filter(|p| p.ensemble == ensemble && p.mu == mu && p.s == s).collect();
            let ls: Vec<usize> = curve.iter().map(|p| p.l).collect();
            let ps: Vec<f64> = curve.iter().map(|p| p.success_prob).collect();
            TransitionSummary {
                ensemble,
                mu,
                s,
                l05: crossing_length(&ls, &ps, 0.05),
                l50: crossing_length(&ls, &ps, 0.5),
                l95: crossing_length(&ls, &ps, 0.95),
                delta_seq: curve[0].delta_seq,
                l_fail: curve[0].l_fail,
                l_success: curve[0].l_success,
            }
        })
        .collect()
}

/// Runs noiseless trials for every `(ensemble, μ, point, trial)` job and
/// summarizes them per point.
fn noiseless_sweep(spec: &SweepSpec, ensembles: &[Ensemble], mus: &[f64]) -> Result<SweepResult> {
    let points = grid(spec)?;
    let mut jobs = Vec::new();
    for &ensemble in ensembles {
        for &mu in mus {
            for (p, &(s, l)) in points.iter().enumerate() {
                for trial in 0..spec.trials {
                    jobs.push((ensemble, mu, p, s, l, trial));
                }
            }
        }
    }
    let trials: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(ensemble, mu, p, s, l, trial)| noiseless_trial(spec, ensemble, (p, s, l), mu, trial))
        .collect::<Result<_>>()?;

    let mut out = SweepResult::empty(spec.experiment);
    for (i, chunk) in trials.chunks(spec.trials).enumerate() {
        // The grid μ, not the solver μ recorded per trial, labels the point.
        let (ensemble, mu, _, s, l, _) = jobs[i * spec.trials];
        let refs: Vec<&TrialRecord> = chunk.iter().collect();
        out.points.push(summarize(spec, ensemble, mu, s, l, &refs)?);
    }
    out.transitions = transitions_of(&out.points);
    out.trials = trials;
    Ok(out)
}

/// Success probability over an `(S, L)` grid of noiseless instances.
pub fn run_phase_map(spec: &SweepSpec) -> Result<SweepResult> {
    noiseless_sweep(spec, &[Ensemble::Structured], &[0.0])
}

/// Phase maps of the smoothed problem, one per `μ`; `μ = 0` uses the
/// configured noiseless solver.
pub fn run_smoothing_map(spec: &SweepSpec) -> Result<SweepResult> {
    noiseless_sweep(spec, &[Ensemble::Structured], &spec.mu_values)
}

/// Phase maps for the structured embedding and an i.i.d. Gaussian operator
/// on the same channels.
pub fn run_embedding_compare(spec: &SweepSpec) -> Result<SweepResult> {
    noiseless_sweep(spec, &[Ensemble::Structured, Ensemble::Gaussian], &[0.0])
}

/// Prediction error of the norm-ball estimator with a row-orthonormalized
/// Gaussian operator.
pub fn run_noisy_error(spec: &SweepSpec) -> Result<SweepResult> {
    let points = grid(spec)?;
    let jobs: Vec<(usize, usize, usize, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, &(s, l))| (0..spec.trials).map(move |t| (p, s, l, t)))
        .collect();
    let trials: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(p, s, l, trial)| {
            let start = Instant::now();
            let seed = derive_seed(spec.master_seed, p as u64, trial as u64);
            let inst = draw_instance(spec, s, l, spec.sigma2, seed, Ensemble::Gaussian, true)?;
            let est = reference_solve(spec, &inst)?;
            let wall = start.elapsed().as_nanos();
            record(spec, &inst, &est, Ensemble::Gaussian, (p, s, l), 0.0, (trial, seed), wall)
        })
        .collect::<Result<_>>()?;
    let mut out = SweepResult::empty(spec.experiment);
    for (chunk, &(s, l)) in trials.chunks(spec.trials).zip(&points) {
        let refs: Vec<&TrialRecord> = chunk.iter().collect();
        out.points.push(summarize(spec, Ensemble::Gaussian, 0.0, s, l, &refs)?);
    }
    out.trials = trials;
    Ok(out)
}

/// `ε` from the smoothed bound, or from the plain bound when the smoothed
/// one exceeds `2LM`. Returns `(ε, fallback)`.
pub fn epsilon_for(spec: &SweepSpec, s: usize, l: usize, mu: f64) -> Result<(f64, bool)> {
    let sigma2_real = spec.sigma2 / 2.0;
    let (delta_smoothed, _) = predicted_bound(spec, s, mu)?;
    match epsilon_rule(sigma2_real, l, spec.m, delta_smoothed) {
        Ok(eps) => Ok((eps, false)),
        Err(Error::InfeasibleRadius { .. }) => {
            let (delta_plain, _) = predicted_bound(spec, s, 0.0)?;
            Ok((epsilon_rule(sigma2_real, l, spec.m, delta_plain)?, true))
        }
        Err(e) => Err(e),
    }
}

fn noisy_smoothed_options(spec: &SweepSpec, mu: f64, eps: f64, trace: bool) -> SolverOptions {
    SolverOptions {
        gamma_stop: spec.gamma_stop,
        max_iter: spec.max_iter,
        restart: spec.restart,
        record_trace: trace,
        ..SolverOptions::new(mu, eps)
    }
}

/// Iteration traces of the smoothed solver on one instance per `(S, L)`,
/// shared across `μ`.
pub fn run_convergence(spec: &SweepSpec) -> Result<SweepResult> {
    let points = grid(spec)?;
    let jobs: Vec<(usize, usize, usize, f64)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, &(s, l))| spec.mu_values.iter().map(move |&mu| (p, s, l, mu)))
        .collect();
    let runs: Vec<(PointSummary, TrialRecord, Vec<TraceRow>)> = jobs
        .par_iter()
        .map(|&(p, s, l, mu)| {
            let start = Instant::now();
            let seed = derive_seed(spec.master_seed, p as u64, 0);
            let inst = draw_instance(spec, s, l, spec.sigma2, seed, Ensemble::Structured, false)?;
            let (eps, fallback) = epsilon_for(spec, s, l, mu)?;
            let est = solve_smoothed_dual(inst.qb.view(), inst.yt.view(), &noisy_smoothed_options(spec, mu, eps, true))?;
            let wall = start.elapsed().as_nanos();
            let rec = record(spec, &inst, &est, Ensemble::Structured, (p, s, l), mu, (0, seed), wall)?;
            let mut summary = summarize(spec, Ensemble::Structured, mu, s, l, &[&rec])?;
            summary.epsilon = Some(eps);
            summary.eps_fallback = fallback;
            let trace = est
                .trace
                .iter()
                .map(|t| TraceRow {
                    mu,
                    s,
                    l,
                    iteration: t.iteration,
                    gap: t.gap,
                    objective: t.objective,
                    elapsed_ns: t.elapsed_ns,
                })
                .collect();
            Ok((summary, rec, trace))
        })
        .collect::<Result<_>>()?;
    let mut out = SweepResult::empty(spec.experiment);
    for (summary, rec, trace) in runs {
        out.points.push(summary);
        out.trials.push(rec);
        out.traces.extend(trace);
    }
    Ok(out)
}

/// Estimation error of the smoothed solver against `μ`, with `ε` from the
/// smoothed bound. Instances are shared across `μ`.
pub fn run_error_vs_mu(spec: &SweepSpec) -> Result<SweepResult> {
    let points = grid(spec)?;
    let mut jobs = Vec::new();
    for &mu in &spec.mu_values {
        for (p, &(s, l)) in points.iter().enumerate() {
            for trial in 0..spec.trials {
                jobs.push((mu, p, s, l, trial));
            }
        }
    }
    let trials: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(mu, p, s, l, trial)| {
            let start = Instant::now();
            let seed = derive_seed(spec.master_seed, p as u64, trial as u64);
            let inst = draw_instance(spec, s, l, spec.sigma2, seed, Ensemble::Structured, false)?;
            let (eps, _) = epsilon_for(spec, s, l, mu)?;
            let est = solve_smoothed_dual(inst.qb.view(), inst.yt.view(), &noisy_smoothed_options(spec, mu, eps, false))?;
            let wall = start.elapsed().as_nanos();
            record(spec, &inst, &est, Ensemble::Structured, (p, s, l), mu, (trial, seed), wall)
        })
        .collect::<Result<_>>()?;

    let oracle: Vec<f64> = if spec.oracle {
        let oracle_jobs: Vec<(usize, usize, usize, usize)> = points
            .iter()
            .enumerate()
            .flat_map(|(p, &(s, l))| (0..spec.trials).map(move |t| (p, s, l, t)))
            .collect();
        oracle_jobs
            .par_iter()
            .map(|&(p, s, l, trial)| {
                let seed = derive_seed(spec.master_seed, p as u64, trial as u64);
                let inst = draw_instance(spec, s, l, spec.sigma2, seed, Ensemble::Structured, false)?;
                let est = reference_solve(spec, &inst)?;
                Ok(estimation_error(est.theta_hat.view(), inst.theta0.view()))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut out = SweepResult::empty(spec.experiment);
    for (i, chunk) in trials.chunks(spec.trials).enumerate() {
        let (mu, p, s, l, _) = jobs[i * spec.trials];
        let refs: Vec<&TrialRecord> = chunk.iter().collect();
        let mut summary = summarize(spec, Ensemble::Structured, mu, s, l, &refs)?;
        let (eps, fallback) = epsilon_for(spec, s, l, mu)?;
        summary.epsilon = Some(eps);
        summary.eps_fallback = fallback;
        if spec.oracle {
            summary.oracle_est_error = Some(mean(&oracle[p * spec.trials..(p + 1) * spec.trials]));
        }
        out.points.push(summary);
    }
    out.trials = trials;
    Ok(out)
}

/// Closed-form bounds and predicted lengths over `ρ × M × μ`.
pub fn run_statdim_table(spec: &SweepSpec) -> Result<SweepResult> {
    let rhos: Vec<f64> = if spec.rho_values.is_empty() {
        spec.s_values.iter().map(|&s| s as f64 / spec.n as f64).collect()
    } else {
        spec.rho_values.clone()
    };
    let ms = if spec.m_values.is_empty() { vec![spec.m] } else { spec.m_values.clone() };
    let mus = if spec.mu_values.is_empty() { vec![0.0] } else { spec.mu_values.clone() };
    let mut out = SweepResult::empty(spec.experiment);
    for &rho in &rhos {
        for &m in &ms {
            for &mu in &mus {
                let b = if mu > 0.0 {
                    statdim_smoothed(rho, m, spec.n, mu, gaussian_moments(m, FRAC_1_SQRT_2))?
                } else {
                    statdim_plain(rho, m, spec.n)?
                };
                let (l_success, l_fail) = transition_with_margin(b.delta, spec.n, m, a_eta(spec.eta));
                out.statdim.push(StatdimRow {
                    rho,
                    m,
                    n: spec.n,
                    mu,
                    tau_star: b.tau_star,
                    delta: b.delta,
                    delta_seq: b.delta_seq,
                    l_fail,
                    l_success,
                });
            }
        }
    }
    Ok(out)
}

/// Named CSV tables; the first has an empty suffix and is the main output.
pub fn tables(result: &SweepResult, spec: &SweepSpec) -> Vec<(&'static str, CsvTable)> {
    let f = fmt_f64;
    let mut out = Vec::new();
    match result.experiment {
        Experiment::StatdimTable => {
            let mut t = CsvTable::new(&["rho", "M", "N", "mu", "tau_star", "delta", "delta_seq", "l_fail", "l_success"]);
            for r in &result.statdim {
                t.push(vec![
                    f(r.rho),
                    r.m.to_string(),
                    r.n.to_string(),
                    f(r.mu),
                    f(r.tau_star),
                    f(r.delta),
                    f(r.delta_seq),
                    r.l_fail.to_string(),
                    r.l_success.to_string(),
                ]);
            }
            out.push(("", t));
            return out;
        }
        Experiment::NoisyError => {
            let mut t = CsvTable::new(&[
                "S",
                "L",
                "sigma2",
                "trials",
                "mean_R",
                "se_R",
                "R_over_sigma2",
                "R_over_sigma2_real",
                "Rhat_over_sigma2_real",
                "delta_seq",
                "pred_ratio",
                "pred_empirical_ratio",
                "nonconverged",
            ]);
            for p in &result.points {
                let pred = predict_noisy_error(p.l as f64, p.delta_seq);
                t.push(vec![
                    p.s.to_string(),
                    p.l.to_string(),
                    f(spec.sigma2),
                    p.trials.to_string(),
                    f(p.mean_r),
                    f(p.se_r),
                    f(p.mean_r / spec.sigma2),
                    f(p.mean_r / (spec.sigma2 / 2.0)),
                    f(p.mean_r_hat / (spec.sigma2 / 2.0)),
                    f(p.delta_seq),
                    f(pred.worst_case_ratio),
                    f(pred.empirical_limit_ratio),
                    p.nonconverged.to_string(),
                ]);
            }
            out.push(("", t));
        }
        Experiment::Convergence | Experiment::ErrorVsMu => {
            let mut t = CsvTable::new(&[
                "mu",
                "S",
                "L",
                "sigma2",
                "trials",
                "epsilon",
                "eps_fallback",
                "delta_seq",
                "mean_iterations",
                "median_iterations",
                "nonconverged",
                "mean_est_error",
                "se_est_error",
                "oracle_est_error",
                "mean_R",
                "mean_Rhat",
            ]);
            for p in &result.points {
                t.push(vec![
                    f(p.mu),
                    p.s.to_string(),
                    p.l.to_string(),
                    f(spec.sigma2),
                    p.trials.to_string(),
                    fmt_opt(p.epsilon),
                    u8::from(p.eps_fallback).to_string(),
                    f(p.delta_seq),
                    f(p.mean_iterations),
                    f(p.median_iterations),
                    p.nonconverged.to_string(),
                    f(p.mean_est_error),
                    f(p.se_est_error),
                    fmt_opt(p.oracle_est_error),
                    f(p.mean_r),
                    f(p.mean_r_hat),
                ]);
            }
            out.push(("", t));
            if !result.traces.is_empty() {
                let mut tr = CsvTable::new(&["mu", "S", "L", "iteration", "gap", "dual_objective", "elapsed_ns"]);
                for r in &result.traces {
                    tr.push(vec![
                        f(r.mu),
                        r.s.to_string(),
                        r.l.to_string(),
                        r.iteration.to_string(),
                        f(r.gap),
                        f(r.objective),
                        r.elapsed_ns.to_string(),
                    ]);
                }
                out.push(("_trace", tr));
            }
        }
        Experiment::PhaseMap | Experiment::SmoothingMap | Experiment::EmbeddingCompare => {
            let mut t = CsvTable::new(&[
                "ensemble",
                "mu",
                "S",
                "L",
                "trials",
                "success_prob",
                "nonconverged",
                "median_iterations",
                "mean_missed",
                "mean_false_alarm",
                "delta_seq",
                "l_fail",
                "l_success",
            ]);
            for p in &result.points {
                t.push(vec![
                    p.ensemble.name().into(),
                    f(p.mu),
                    p.s.to_string(),
                    p.l.to_string(),
                    p.trials.to_string(),
                    f(p.success_prob),
                    p.nonconverged.to_string(),
                    f(p.median_iterations),
                    f(p.mean_missed),
                    f(p.mean_false_alarm),
                    f(p.delta_seq),
                    p.l_fail.to_string(),
                    p.l_success.to_string(),
                ]);
            }
            out.push(("", t));
            let mut tr = CsvTable::new(&[
                "ensemble", "mu", "S", "l05", "l50", "l95", "delta_seq", "l_fail", "l_success",
            ]);
            for x in &result.transitions {
                tr.push(vec![
                    x.ensemble.name().into(),
                    f(x.mu),
                    x.s.to_string(),
                    fmt_opt(x.l05),
                    fmt_opt(x.l50),
                    fmt_opt(x.l95),
                    f(x.delta_seq),
                    x.l_fail.to_string(),
                    x.l_success.to_string(),
                ]);
            }
            out.push(("_transitions", tr));
        }
    }
    let mut trials = CsvTable::new(&[
        "experiment",
        "ensemble",
        "point",
        "S",
        "L",
        "mu",
        "trial",
        "seed",
        "success",
        "converged",
        "R",
        "R_hat",
        "est_error",
        "missed",
        "false_alarm",
        "iterations",
        "wall_ns",
    ]);
    for r in &result.trials {
        trials.push(vec![
            r.experiment.name().into(),
            r.ensemble.name().into(),
            r.point.to_string(),
            r.s.to_string(),
            r.l.to_string(),
            f(r.mu),
            r.trial.to_string(),
            r.seed.to_string(),
            u8::from(r.success).to_string(),
            u8::from(r.converged).to_string(),
            f(r.r),
            f(r.r_hat),
            f(r.est_error),
            r.missed.to_string(),
            r.false_alarm.to_string(),
            r.iterations.to_string(),
            r.wall_ns.to_string(),
        ]);
    }
    out.push(("_trials", trials));
    out
}

/// Comment line written at the top of every CSV.
pub fn provenance_comment(spec: &SweepSpec) -> String {
    format!(
        "experiment={} config_sha256={} master_seed={}",
        spec.experiment,
        spec.config_hash(),
        spec.master_seed
    )
}

/// Writes all tables next to `spec.output` (default `<experiment>.csv`) and
/// returns the paths written.
pub fn write_outputs(result: &SweepResult, spec: &SweepSpec) -> Result<Vec<PathBuf>> {
    let base = spec.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.experiment)));
    let comment = provenance_comment(spec);
    let mut paths = Vec::new();
    for (suffix, table) in tables(result, spec) {
        let path = sibling_path(&base, suffix);
        table.write(&path, &comment)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests;
