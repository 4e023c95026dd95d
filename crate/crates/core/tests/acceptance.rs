//! Acceptance criteria. Each test prints one `ACCEPTANCE <id> PASS|FAIL` line.
//!
//! Run with `cargo test -p jade-core --test acceptance -- --nocapture`.

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use jade_core::harness::{self, Ensemble, Experiment, SweepResult, SweepSpec};
use jade_core::linalg::{frobenius, group_norm_sum, group_norms};
use jade_core::model::{generate_system, SystemConfig};
use jade_core::solvers::{
    dual_gradient, project_group_l1_ball, shrink, smooth_dual_value, solve_pb_projected_gradient, solve_smoothed_dual,
    ProjectedGradientOptions, SolverOptions,
};
use jade_core::statdim::{gaussian_moments, statdim_monte_carlo, statdim_plain, statdim_smoothed, GroupMoments};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SIGMA_REAL: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Criteria run one at a time so each runtime is measured on its own.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let within = elapsed <= budget;
    let verdict = if pass && within { "PASS" } else { "FAIL" };
    // Written straight to stdout so the line survives the harness's output capture.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "ACCEPTANCE {id} {verdict} ({:.1}s of {:.0}s budget) {detail}",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    let _ = out.flush();
    assert!(pass, "criterion {id}: {detail}");
    assert!(within, "criterion {id} exceeded its runtime budget");
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn criterion_1_statdim_anchor() {
    let _serial = serial();
    let start = Instant::now();
    let b = statdim_plain(42.0 / 300.0, 3, 300).unwrap();
    let pass = (b.delta_seq - 100.0).abs() <= 2.0;
    report(
        1,
        pass,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("delta_seq = {:.3} (target 100 +/- 2), tau* = {:.4}", b.delta_seq, b.tau_star),
    );
}

#[test]
fn criterion_2_monte_carlo_oracle() {
    let _serial = serial();
    let start = Instant::now();
    let n = 200;
    let points = [
        (0.05, 1, 0.0),
        (0.1, 2, 0.0),
        (0.2, 4, 0.0),
        (0.05, 2, 0.1),
        (0.1, 4, 0.1),
        (0.2, 1, 1.0),
        (0.1, 2, 1.0),
    ];
    let mut worst = 0.0_f64;
    let mut lines = Vec::new();
    for (k, &(rho, m, mu)) in points.iter().enumerate() {
        let s = (rho * n as f64).round() as usize;
        let cfg = SystemConfig::new(n, m, 1, s).with_seed(2024);
        let (truth, _) = generate_system(&cfg, k as u64).unwrap();
        // The bound is an expectation over Gaussian noise given Θ₀, so the
        // closed form uses the moments of this particular Θ₀.
        let closed = if mu == 0.0 {
            statdim_plain(rho, m, n).unwrap()
        } else {
            statdim_smoothed(rho, m, n, mu, GroupMoments::from_ground_truth(&truth)).unwrap()
        };
        let grid: Vec<f64> = (0..=40).map(|i| closed.tau_star * (0.8 + 0.01 * i as f64)).collect();
        let mc = statdim_monte_carlo(&truth, &grid, 10_000, 77 + k as u64, mu).unwrap();
        let rel = (mc.delta - closed.delta).abs() / closed.delta;
        worst = worst.max(rel);
        lines.push(format!("rho={rho} M={m} mu={mu}: {:.2} vs {:.2}", mc.delta, closed.delta));
    }
    // The Gaussian-moment form used for planning sits close to the
    // instance-moment form at this size.
    let planning = statdim_smoothed(0.1, 2, n, 0.1, gaussian_moments(2, SIGMA_REAL)).unwrap();
    lines.push(format!("planning bound at mu=0.1: {:.2}", planning.delta));
    report(
        2,
        worst <= 0.02,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("max relative gap {:.4} over {} points; {}", worst, points.len(), lines.join("; ")),
    );
}

/// Structured and Gaussian phase maps at N=100, M=2, S=10, L=14..=50. The
/// structured half is exactly `run_phase_map` on the same seeds.
fn fig2_maps() -> &'static (SweepResult, Duration) {
    static MAPS: OnceLock<(SweepResult, Duration)> = OnceLock::new();
    MAPS.get_or_init(|| {
        let start = Instant::now();
        let spec = SweepSpec {
            s_values: vec![10],
            l_values: (14..=50).collect(),
            trials: 50,
            master_seed: 2,
            ..SweepSpec::new(Experiment::EmbeddingCompare, 100, 2)
        };
        let out = harness::run(&spec).unwrap();
        (out, start.elapsed())
    })
}

#[test]
fn criterion_3_noiseless_transition() {
    let _serial = serial();
    let start = Instant::now();
    let (maps, _) = fig2_maps();
    let phase_spec = SweepSpec {
        s_values: vec![10],
        l_values: vec![14],
        trials: 50,
        master_seed: 2,
        ..SweepSpec::new(Experiment::PhaseMap, 100, 2)
    };
    // Spot-check that the shared map is what run_phase_map would produce on
    // its first grid point (same point index, hence same seeds).
    let direct = harness::run_phase_map(&phase_spec).unwrap();
    for (a, b) in direct.trials.iter().zip(&maps.trials) {
        assert_eq!((a.seed, a.iterations, a.success), (b.seed, b.iterations, b.success));
    }

    let t = maps.transition(Ensemble::Structured, 0.0, 10).unwrap();
    let prediction = statdim_plain(0.1, 2, 100).unwrap().delta_seq;
    let l50 = t.l50.unwrap_or(f64::NAN);
    let width = t.width().unwrap_or(f64::INFINITY);
    let pass = (l50 - prediction).abs() <= 4.0 && width <= 12.0;
    report(
        3,
        pass,
        start.elapsed(),
        Duration::from_secs(15 * 60),
        &format!(
            "L50 = {l50:.2} vs predicted {prediction:.2}; L05 = {:.2}, L95 = {:.2}, width {width:.2}",
            t.l05.unwrap_or(f64::NAN),
            t.l95.unwrap_or(f64::NAN)
        ),
    );
}

#[test]
fn criterion_4_noisy_prediction() {
    let _serial = serial();
    let start = Instant::now();
    let sigma2 = 1e-3;
    let spec = SweepSpec {
        s_values: vec![21],
        l_factors: vec![0.8, 1.2, 1.5, 2.0],
        sigma2,
        trials: 50,
        master_seed: 4,
        ..SweepSpec::new(Experiment::NoisyError, 150, 3)
    };
    let out = harness::run(&spec).unwrap();
    let delta = statdim_plain(21.0 / 150.0, 3, 150).unwrap().delta_seq;
    let sigma2_real = sigma2 / 2.0;
    let mut pass = true;
    let mut lines = Vec::new();
    for p in &out.points {
        let ratio = p.mean_r / sigma2_real;
        let ok = if (p.l as f64) < delta {
            ratio >= 0.8
        } else {
            let target = delta / p.l as f64;
            (ratio - target).abs() <= 0.15 * target
        };
        pass &= ok;
        lines.push(format!(
            "L={} R/sigma2_real={:.3} (R/sigma2={:.3}) target {:.3}",
            p.l,
            ratio,
            p.mean_r / sigma2,
            (delta / p.l as f64).min(1.0)
        ));
    }
    report(
        4,
        pass,
        start.elapsed(),
        Duration::from_secs(20 * 60),
        &format!("delta_seq = {delta:.2}; {}", lines.join("; ")),
    );
}

#[test]
fn criterion_5_smoothing_shift() {
    let _serial = serial();
    let start = Instant::now();
    let mus = [0.0, 1e-3, 1e-2, 1e-1, 1.0];
    let bounds: Vec<f64> = mus
        .iter()
        .map(|&mu| {
            if mu == 0.0 {
                statdim_plain(0.1, 2, 100).unwrap().delta_seq
            } else {
                statdim_smoothed(0.1, 2, 100, mu, gaussian_moments(2, SIGMA_REAL)).unwrap().delta_seq
            }
        })
        .collect();
    let increasing = bounds.windows(2).all(|w| w[1] > w[0]);

    let spec = SweepSpec {
        s_values: vec![10],
        l_values: (14..=66).step_by(2).collect(),
        mu_values: mus.to_vec(),
        trials: 50,
        master_seed: 5,
        ..SweepSpec::new(Experiment::SmoothingMap, 100, 2)
    };
    let out = harness::run(&spec).unwrap();
    let mut within = true;
    let mut l50s = Vec::new();
    let mut lines = Vec::new();
    for (&mu, &pred) in mus.iter().zip(&bounds) {
        let t = out.transition(Ensemble::Structured, mu, 10).unwrap();
        let l50 = t.l50.unwrap_or(f64::NAN);
        within &= (l50 - pred).abs() <= 4.0;
        l50s.push(l50);
        lines.push(format!("mu={mu}: L50 {l50:.2} vs {pred:.2}"));
    }
    // Neighbouring small-μ curves nearly coincide, so allow one length unit
    // of Monte Carlo jitter between them.
    let shifts = l50s.windows(2).all(|w| w[1] >= w[0] - 1.0) && l50s[l50s.len() - 1] > l50s[0];
    report(
        5,
        increasing && within && shifts,
        start.elapsed(),
        Duration::from_secs(30 * 60),
        &format!(
            "bounds {:?} increasing={increasing}; shifts right={shifts}; {}",
            bounds.iter().map(|b| format!("{b:.3}")).collect::<Vec<_>>(),
            lines.join("; ")
        ),
    );
}

#[test]
fn criterion_6_computation_estimation_tradeoff() {
    let _serial = serial();
    let start = Instant::now();
    let base = |experiment| SweepSpec {
        s_values: vec![25],
        l_values: vec![125],
        mu_values: vec![0.01, 0.1, 1.0],
        sigma2: 0.01,
        gamma_stop: 1e-3,
        trials: 50,
        master_seed: 6,
        max_iter: 100_000,
        ..SweepSpec::new(experiment, 500, 5)
    };
    let conv = harness::run(&base(Experiment::Convergence)).unwrap();
    let iters: Vec<usize> = conv.trials.iter().map(|t| t.iterations).collect();
    let all_converged = conv.trials.iter().all(|t| t.converged);
    let faster = iters.windows(2).all(|w| w[1] < w[0]);

    let errs_spec = SweepSpec {
        oracle: false,
        ..base(Experiment::ErrorVsMu)
    };
    let errs = harness::run(&errs_spec).unwrap();
    let means: Vec<f64> = errs.points.iter().map(|p| p.mean_est_error).collect();
    let worse = means.windows(2).all(|w| w[1] >= 0.95 * w[0]);
    let fallback: Vec<bool> = errs.points.iter().map(|p| p.eps_fallback).collect();
    report(
        6,
        faster && worse && all_converged,
        start.elapsed(),
        Duration::from_secs(20 * 60),
        &format!(
            "iterations {iters:?} (all converged: {all_converged}); mean error {:?}; eps fallback {fallback:?}",
            means.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_7_solver_agreement() {
    let _serial = serial();
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for k in 0..10 {
        let cfg = SystemConfig::new(20, 2, 16, 2).with_seed(7);
        let (truth, obs) = generate_system(&cfg, k).unwrap();
        let (qt, yt, theta0) = (obs.q_embedded(), obs.y_stacked(), truth.stacked());
        let opts = SolverOptions {
            gamma_stop: 1e-3,
            max_iter: 200_000,
            ..SolverOptions::new(1e-2, 1e-4 * frobenius(yt.view()))
        };
        let smoothed = solve_smoothed_dual(qt.view(), yt.view(), &opts).unwrap();
        assert!(smoothed.converged);
        let pg_opts = ProjectedGradientOptions {
            tol: 1e-12,
            max_iter: 200_000,
            accelerated: true,
            record_trace: false,
        };
        let reference =
            solve_pb_projected_gradient(qt.view(), yt.view(), group_norm_sum(theta0.view()), &pg_opts).unwrap();
        let rel = frobenius((&smoothed.theta_hat - &reference.theta_hat).view()) / frobenius(reference.theta_hat.view());
        worst = worst.max(rel);
    }
    report(
        7,
        worst <= 1e-2,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("max relative difference {worst:.2e} over 10 instances"),
    );
}

#[test]
fn criterion_8_gradient_and_operators() {
    let _serial = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let qt = gaussian(16, 24, &mut rng);
    let yt = gaussian(16, 2, &mut rng);
    let mu = 0.1;
    let mut worst_fd = 0.0_f64;
    for _ in 0..100 {
        let z = gaussian(16, 2, &mut rng);
        let dir = gaussian(16, 2, &mut rng);
        let h = 1e-6;
        let fd = (smooth_dual_value((&z + &(&dir * h)).view(), qt.view(), yt.view(), mu)
            - smooth_dual_value((&z - &(&dir * h)).view(), qt.view(), yt.view(), mu))
            / (2.0 * h);
        let g = dual_gradient(z.view(), qt.view(), yt.view(), mu);
        let an: f64 = (&g * &dir).sum();
        worst_fd = worst_fd.max((fd - an).abs() / an.abs().max(1.0));
    }

    let mut shrink_ok = true;
    let mut idempotent_ok = true;
    for _ in 0..100 {
        let a = gaussian(6, 3, &mut rng);
        let b = gaussian(6, 3, &mut rng);
        let t = 3.0 * rng.random::<f64>();
        let lhs = frobenius((shrink(a.view(), t) - shrink(b.view(), t)).view());
        shrink_ok &= lhs <= frobenius((&a - &b).view()) + 1e-12;

        let x = gaussian(12, 2, &mut rng);
        let r = 1.5 * rng.random::<f64>() * group_norms(x.view()).sum();
        let p = project_group_l1_ball(x.view(), r);
        let pp = project_group_l1_ball(p.view(), r);
        idempotent_ok &= frobenius((&p - &pp).view()) <= 1e-10 * frobenius(p.view()).max(1.0);
    }
    report(
        8,
        worst_fd <= 1e-5 && shrink_ok && idempotent_ok,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("max finite-difference error {worst_fd:.2e}; shrink non-expansive {shrink_ok}; projection idempotent {idempotent_ok}"),
    );
}

#[test]
fn criterion_9_embedding_equivalence() {
    let _serial = serial();
    let start = Instant::now();
    let (maps, build) = fig2_maps();
    let s = maps.transition(Ensemble::Structured, 0.0, 10).unwrap().l50.unwrap_or(f64::NAN);
    let g = maps.transition(Ensemble::Gaussian, 0.0, 10).unwrap().l50.unwrap_or(f64::NAN);
    report(
        9,
        (s - g).abs() <= 3.0,
        start.elapsed().max(*build),
        Duration::from_secs(30 * 60),
        &format!("L50 structured {s:.2}, gaussian {g:.2}"),
    );
}
