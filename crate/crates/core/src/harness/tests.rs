use super::*;

fn small(experiment: Experiment) -> SweepSpec {
    SweepSpec {
        s_values: vec![3],
        l_values: vec![1, 20],
        trials: 4,
        master_seed: 9,
        ..SweepSpec::new(experiment, 20, 2)
    }
}

fn without_wall_time(result: &SweepResult, spec: &SweepSpec) -> Vec<String> {
    tables(result, spec)
        .into_iter()
        .map(|(_, mut t)| {
            for name in ["wall_ns", "elapsed_ns"] {
                if let Some(c) = t.column(name) {
                    t.rows.iter_mut().for_each(|r| r[c].clear());
                }
            }
            t.render("")
        })
        .collect()
}

#[test]
fn phase_map_extremes() {
    let spec = small(Experiment::PhaseMap);
    let out = run(&spec).unwrap();
    assert_eq!(out.trials.len(), 8);
    assert_eq!(out.point(Ensemble::Structured, 0.0, 3, 1).unwrap().success_prob, 0.0);
    let square = out.point(Ensemble::Structured, 0.0, 3, 20).unwrap();
    assert_eq!(square.success_prob, 1.0);
    assert_eq!(square.mean_missed, 0.0);
    let t = out.transition(Ensemble::Structured, 0.0, 3).unwrap();
    assert!(t.l50.unwrap() > 1.0 && t.l50.unwrap() <= 20.0);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = small(Experiment::PhaseMap);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| run(&spec).unwrap());
    let b = three.install(|| run(&spec).unwrap());
    assert_eq!(without_wall_time(&a, &spec), without_wall_time(&b, &spec));
    let mut other = spec.clone();
    other.master_seed = 10;
    let c = run(&other).unwrap();
    assert_ne!(a.trials[0].seed, c.trials[0].seed);
}

#[test]
fn zero_mu_column_reproduces_phase_map() {
    let phase = run(&small(Experiment::PhaseMap)).unwrap();
    let mut spec = small(Experiment::SmoothingMap);
    spec.mu_values = vec![0.0, 0.1];
    let smooth = run(&spec).unwrap();
    for p in &phase.points {
        let q = smooth.point(Ensemble::Structured, 0.0, p.s, p.l).unwrap();
        assert_eq!(p.success_prob, q.success_prob);
        assert_eq!(p.median_iterations, q.median_iterations);
    }
    assert!(smooth.point(Ensemble::Structured, 0.1, 3, 20).is_some());
    let t0 = smooth.transition(Ensemble::Structured, 0.0, 3).unwrap();
    let t1 = smooth.transition(Ensemble::Structured, 0.1, 3).unwrap();
    assert!(t1.delta_seq > t0.delta_seq);
}

#[test]
fn smoothed_noiseless_solver_flag() {
    let mut spec = small(Experiment::PhaseMap);
    spec.solver = NoiselessSolver::Smoothed;
    spec.smoothed_mu = 0.01;
    let out = run(&spec).unwrap();
    assert_eq!(out.point(Ensemble::Structured, 0.0, 3, 20).unwrap().success_prob, 1.0);
    assert!(out.trials.iter().all(|t| t.mu == 0.01));
}

#[test]
fn embedding_compare_has_both_ensembles() {
    let out = run(&small(Experiment::EmbeddingCompare)).unwrap();
    for e in [Ensemble::Structured, Ensemble::Gaussian] {
        assert_eq!(out.point(e, 0.0, 3, 20).unwrap().success_prob, 1.0);
        assert_eq!(out.point(e, 0.0, 3, 1).unwrap().success_prob, 0.0);
    }
    // Same channels for both ensembles.
    let n = out.trials.len() / 2;
    assert_eq!(out.trials[0].seed, out.trials[n].seed);
}

#[test]
fn noiseless_noisy_error_is_zero_above_transition() {
    let spec = SweepSpec {
        l_values: vec![20],
        ..small(Experiment::NoisyError)
    };
    let out = run(&spec).unwrap();
    assert!(out.points[0].mean_r < 1e-12, "{}", out.points[0].mean_r);
}

#[test]
fn convergence_traces_are_well_formed() {
    let spec = SweepSpec {
        l_values: vec![16],
        mu_values: vec![0.1, 1.0],
        sigma2: 0.01,
        max_iter: 50_000,
        ..small(Experiment::Convergence)
    };
    let out = run(&spec).unwrap();
    assert_eq!(out.points.len(), 2);
    for p in &out.points {
        assert_eq!(p.nonconverged, 0);
        let trace: Vec<&TraceRow> = out.traces.iter().filter(|t| t.mu == p.mu).collect();
        assert_eq!(trace.len() as f64, p.mean_iterations);
        assert!(trace.iter().all(|t| t.gap >= 0.0));
        assert!(trace.last().unwrap().gap <= spec.gamma_stop);
    }
    assert_eq!(out.trials[0].seed, out.trials[1].seed);
    let names: Vec<&str> = tables(&out, &spec).iter().map(|(s, _)| *s).collect();
    assert_eq!(names, ["", "_trace", "_trials"]);
}

#[test]
fn epsilon_falls_back_when_smoothed_bound_is_too_large() {
    let spec = SweepSpec {
        sigma2: 0.02,
        ..SweepSpec::new(Experiment::ErrorVsMu, 500, 5)
    };
    let (eps, fallback) = epsilon_for(&spec, 25, 125, 0.01).unwrap();
    assert!(!fallback);
    let (delta, _) = predicted_bound(&spec, 25, 0.01).unwrap();
    assert!((eps - (0.01 * (1250.0 - delta)).sqrt()).abs() < 1e-12);
    let (eps_big, fallback) = epsilon_for(&spec, 25, 125, 1.0).unwrap();
    assert!(fallback);
    let (delta_plain, _) = predicted_bound(&spec, 25, 0.0).unwrap();
    assert!((eps_big - (0.01 * (1250.0 - delta_plain)).sqrt()).abs() < 1e-12);
}

#[test]
fn error_vs_mu_reports_oracle() {
    let spec = SweepSpec {
        l_values: vec![16],
        mu_values: vec![0.01, 0.1],
        sigma2: 0.01,
        max_iter: 50_000,
        ..small(Experiment::ErrorVsMu)
    };
    let out = run(&spec).unwrap();
    assert_eq!(out.points.len(), 2);
    for p in &out.points {
        assert_eq!(p.trials, 4);
        assert!(p.oracle_est_error.unwrap() > 0.0);
        assert!(p.mean_est_error.is_finite());
    }
}

#[test]
fn statdim_table_matches_closed_form() {
    let spec = SweepSpec {
        rho_values: vec![0.1],
        mu_values: vec![0.0, 0.1],
        ..SweepSpec::new(Experiment::StatdimTable, 100, 2)
    };
    let out = run(&spec).unwrap();
    assert_eq!(out.statdim.len(), 2);
    assert!((out.statdim[0].delta_seq - 24.4816).abs() < 1e-3);
    assert!(out.statdim[1].delta_seq > out.statdim[0].delta_seq);
    let t = tables(&out, &spec);
    assert_eq!(t.len(), 1);
    assert_eq!(t[0].1.rows.len(), 2);
}

#[test]
fn outputs_carry_header_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small(Experiment::PhaseMap);
    spec.output = Some(dir.path().join("map.csv"));
    let out = run(&spec).unwrap();
    let paths = write_outputs(&out, &spec).unwrap();
    assert_eq!(paths.len(), 3);
    assert!(paths[1].ends_with("map_transitions.csv"));
    assert!(paths[2].ends_with("map_trials.csv"));
    for p in &paths {
        let text = std::fs::read_to_string(p).unwrap();
        let mut lines = text.lines();
        let first = lines.next().unwrap();
        assert!(first.starts_with("# experiment=phase_map config_sha256="));
        assert!(first.ends_with("master_seed=9"));
        assert!(!lines.next().unwrap().starts_with('#'));
    }
}
