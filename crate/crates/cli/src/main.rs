//! `jade`: bounds, predictions, single solves and Monte Carlo sweeps.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use jade_core::harness::{self, Experiment, SweepSpec};
use jade_core::instance::InstanceFile;
use jade_core::model::{derive_seed, generate_system, SystemConfig};
use jade_core::solvers::{solve_smoothed_dual, SolverOptions, ZStepVariant};
use jade_core::statdim::{
    epsilon_rule, gaussian_moments, predict_noisy_error, predict_transition, statdim_plain, statdim_smoothed,
};

/// Environment variable that sets the worker thread count.
const THREADS_ENV: &str = "JADE_THREADS";

#[derive(Parser)]
#[command(name = "jade", version, about = "Joint activity detection and channel estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate statistical-dimension bounds as CSV.
    Statdim {
        /// Sparsity ratios S/N, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        /// Antenna counts, comma separated.
        #[arg(long = "M", value_delimiter = ',', required = true)]
        m: Vec<usize>,
        #[arg(long = "N")]
        n: usize,
        /// Smoothing parameters, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        mu: Vec<f64>,
        /// Per-component channel standard deviation used for the smoothed bound.
        #[arg(long, default_value_t = FRAC_1_SQRT_2)]
        sigma_real: f64,
    },
    /// Predicted transition, noisy error and constraint radius.
    Predict {
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "S")]
        s: usize,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        /// Signature length for the noisy-error and radius predictions.
        #[arg(long = "L")]
        l: Option<usize>,
        /// Complex noise variance for the radius rule.
        #[arg(long)]
        sigma2: Option<f64>,
    },
    /// Solve one instance file with the smoothed dual solver.
    Solve {
        /// Instance file (`qt` and `yt` blocks).
        input: PathBuf,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-3)]
        gamma_stop: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// `lipschitz_scaled` or `paper_literal`.
        #[arg(long, default_value = "lipschitz_scaled")]
        variant: ZStepVariant,
        /// Restart momentum when a step points uphill.
        #[arg(long)]
        restart: bool,
        /// Estimate CSV; stdout if omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Iteration trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep and write CSV files.
    Experiment {
        /// One of phase_map, noisy_error, smoothing_map, convergence,
        /// error_vs_mu, embedding_compare, statdim_table.
        name: Experiment,
        /// JSON sweep configuration.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Built-in configuration, e.g. fig2 or fig6_scaled.
        #[arg(long)]
        preset: Option<String>,
        /// Overrides master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides the output path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Draw a random instance and write it as an instance file.
    Instance {
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "L")]
        l: usize,
        #[arg(long = "S")]
        s: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include the ground truth as a `theta0` block.
        #[arg(long)]
        truth: bool,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Outcome of a successful command.
enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match execute(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value.parse().with_context(|| format!("{THREADS_ENV}={value} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Statdim {
            rho,
            m,
            n,
            mu,
            sigma_real,
        } => {
            let mut out = io::stdout().lock();
            writeln!(out, "rho,M,mu,tau_star,delta,delta_seq")?;
            for &r in &rho {
                for &mm in &m {
                    for &u in &mu {
                        let b = if u > 0.0 {
                            statdim_smoothed(r, mm, n, u, gaussian_moments(mm, sigma_real))?
                        } else {
                            statdim_plain(r, mm, n)?
                        };
                        writeln!(out, "{r},{mm},{u},{:?},{:?},{:?}", b.tau_star, b.delta, b.delta_seq)?;
                    }
                }
            }
        }
        Command::Predict {
            n,
            m,
            s,
            eta,
            mu,
            l,
            sigma2,
        } => {
            let t = predict_transition(n, m, s, eta)?;
            let rho = s as f64 / n as f64;
            let smoothed = statdim_smoothed(rho, m, n, mu, gaussian_moments(m, FRAC_1_SQRT_2))?;
            println!("delta_seq={:?}", t.delta_seq);
            println!("l_fail={}", t.l_fail);
            println!("l_success={}", t.l_success);
            println!("eta={eta}");
            println!("mu={mu}");
            println!("delta_seq_smoothed={:?}", smoothed.delta_seq);
            if let Some(l) = l {
                let p = predict_noisy_error(l as f64, t.delta_seq);
                println!("worst_case_ratio={:?}", p.worst_case_ratio);
                println!("empirical_limit_ratio={:?}", p.empirical_limit_ratio);
                if let Some(sigma2) = sigma2 {
                    let eps = epsilon_rule(sigma2 / 2.0, l, m, smoothed.delta)?;
                    println!("epsilon={eps:?}");
                }
            } else if sigma2.is_some() {
                bail!("--sigma2 needs --L");
            }
        }
        Command::Solve {
            input,
            mu,
            epsilon,
            gamma_stop,
            max_iter,
            variant,
            restart,
            output,
            trace,
        } => {
            let inst = InstanceFile::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let opts = SolverOptions {
                gamma_stop,
                max_iter,
                z_step_variant: variant,
                restart,
                record_trace: trace.is_some(),
                ..SolverOptions::new(mu, epsilon)
            };
            let est = solve_smoothed_dual(inst.qt.view(), inst.yt.view(), &opts)?;
            let mut csv = String::new();
            let header: Vec<String> = (0..est.theta_hat.ncols()).map(|c| format!("m{c}")).collect();
            csv.push_str(&header.join(","));
            csv.push('\n');
            for row in est.theta_hat.rows() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                csv.push_str(&cells.join(","));
                csv.push('\n');
            }
            match &output {
                Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => io::stdout().lock().write_all(csv.as_bytes())?,
            }
            if let Some(path) = &trace {
                let mut t = String::from("iter,gap,dual_objective,elapsed_ns\n");
                for r in &est.trace {
                    t.push_str(&format!("{},{:?},{:?},{}\n", r.iteration, r.gap, r.objective, r.elapsed_ns));
                }
                fs::write(path, t).with_context(|| format!("writing {}", path.display()))?;
            }
            eprintln!(
                "iterations={} converged={} final_gap={:e}",
                est.iterations, est.converged, est.final_gap
            );
            if !est.converged {
                return Ok(Outcome::NotConverged);
            }
        }
        Command::Experiment {
            name,
            config,
            preset,
            seed,
            trials,
            output,
        } => {
            let mut spec = match (&config, &preset) {
                (Some(path), _) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    SweepSpec::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                (None, Some(p)) => SweepSpec::preset(p)?,
                (None, None) => bail!("either --config or --preset is required"),
            };
            if spec.experiment != name {
                bail!("configuration describes `{}`, not `{name}`", spec.experiment);
            }
            if let Some(s) = seed {
                spec.master_seed = s;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            if output.is_some() {
                spec.output = output;
            }
            spec.validate()?;
            let result = harness::run(&spec)?;
            for path in harness::write_outputs(&result, &spec)? {
                println!("{}", path.display());
            }
        }
        Command::Instance {
            n,
            m,
            l,
            s,
            sigma2,
            seed,
            truth,
            output,
        } => {
            let cfg = SystemConfig::new(n, m, l, s).with_sigma2(sigma2).with_seed(seed);
            let (gt, obs) = generate_system(&cfg, derive_seed(seed, 0, 0))?;
            let inst = InstanceFile {
                qt: obs.q_embedded(),
                yt: obs.y_stacked(),
                theta0: truth.then(|| gt.stacked()),
            };
            inst.write(&output).with_context(|| format!("writing {}", output.display()))?;
        }
    }
    Ok(Outcome::Done)
}
