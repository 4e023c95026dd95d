use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::statdim::statdim_plain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    PhaseMap,
    NoisyError,
    SmoothingMap,
    Convergence,
    ErrorVsMu,
    EmbeddingCompare,
    StatdimTable,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::PhaseMap,
        Experiment::NoisyError,
        Experiment::SmoothingMap,
        Experiment::Convergence,
        Experiment::ErrorVsMu,
        Experiment::EmbeddingCompare,
        Experiment::StatdimTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PhaseMap => "phase_map",
            Experiment::NoisyError => "noisy_error",
            Experiment::SmoothingMap => "smoothing_map",
            Experiment::Convergence => "convergence",
            Experiment::ErrorVsMu => "error_vs_mu",
            Experiment::EmbeddingCompare => "embedding_compare",
            Experiment::StatdimTable => "statdim_table",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('_', "-") == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment `{s}`")))
    }
}

/// Solver used for noiseless recovery trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiselessSolver {
    /// Projected gradient on the norm ball of radius `ℛ_G(Θ̃₀)`.
    #[default]
    Reference,
    /// Smoothed dual solver with `ε = 0` and smoothing `smoothed_mu`.
    Smoothed,
}

/// Sensing ensemble for the real-embedded operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// `Q̃` built from complex `Q ~ 𝒞𝒩(0, 1)`.
    Structured,
    /// i.i.d. `𝒩(0, gaussian_variance)` entries.
    Gaussian,
}

impl Ensemble {
    pub fn name(self) -> &'static str {
        match self {
            Ensemble::Structured => "structured",
            Ensemble::Gaussian => "gaussian",
        }
    }
}

fn default_trials() -> usize {
    50
}
fn default_smoothed_mu() -> f64 {
    1e-3
}
fn default_success_tol() -> f64 {
    1e-5
}
fn default_gamma() -> f64 {
    1e-3
}
fn default_eta() -> f64 {
    0.1
}
fn default_max_iter() -> usize {
    20_000
}
fn default_noiseless_gamma_stop() -> f64 {
    1e-10
}
fn default_pg_tol() -> f64 {
    1e-10
}
fn default_gaussian_variance() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

/// One sweep, as read from a JSON config file.
///
/// Only `experiment`, `n` and `m` are required; grids default to empty and
/// are checked per experiment by [`SweepSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub experiment: Experiment,
    pub n: usize,
    pub m: usize,
    /// Signature lengths. When empty, `l_factors` scales the predicted
    /// transition `δ/(2M)` of each `S`.
    #[serde(default)]
    pub l_values: Vec<usize>,
    #[serde(default)]
    pub l_factors: Vec<f64>,
    #[serde(default)]
    pub s_values: Vec<usize>,
    #[serde(default)]
    pub mu_values: Vec<f64>,
    /// Sparsity ratios for `statdim_table`; derived from `s_values` if empty.
    #[serde(default)]
    pub rho_values: Vec<f64>,
    /// Antenna counts for `statdim_table`; defaults to `[m]`.
    #[serde(default)]
    pub m_values: Vec<usize>,
    /// Complex noise variance per entry.
    #[serde(default)]
    pub sigma2: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub solver: NoiselessSolver,
    #[serde(default = "default_smoothed_mu")]
    pub smoothed_mu: f64,
    /// Absolute Frobenius tolerance for declaring exact recovery.
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    /// Relative feasibility gap for noisy smoothed solves.
    #[serde(default = "default_gamma")]
    pub gamma_stop: f64,
    #[serde(default = "default_gamma")]
    pub gamma_act: f64,
    /// Confidence level of the predicted success/failure lengths.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Residual tolerance `‖Q̃Θ − Ỹ‖ ≤ γ‖Ỹ‖` for noiseless smoothed solves.
    #[serde(default = "default_noiseless_gamma_stop")]
    pub noiseless_gamma_stop: f64,
    /// Relative-change tolerance of the projected-gradient reference.
    #[serde(default = "default_pg_tol")]
    pub pg_tol: f64,
    /// Entry variance of the Gaussian ensemble.
    #[serde(default = "default_gaussian_variance")]
    pub gaussian_variance: f64,
    /// Momentum restart in noisy smoothed solves.
    #[serde(default)]
    pub restart: bool,
    /// Also solve the norm-ball problem in `error_vs_mu` as a reference.
    #[serde(default = "default_true")]
    pub oracle: bool,
}

impl SweepSpec {
    pub fn new(experiment: Experiment, n: usize, m: usize) -> Self {
        Self {
            experiment,
            n,
            m,
            l_values: Vec::new(),
            l_factors: Vec::new(),
            s_values: Vec::new(),
            mu_values: Vec::new(),
            rho_values: Vec::new(),
            m_values: Vec::new(),
            sigma2: 0.0,
            trials: default_trials(),
            master_seed: 0,
            output: None,
            solver: NoiselessSolver::default(),
            smoothed_mu: default_smoothed_mu(),
            success_tol: default_success_tol(),
            gamma_stop: default_gamma(),
            gamma_act: default_gamma(),
            eta: default_eta(),
            max_iter: default_max_iter(),
            noiseless_gamma_stop: default_noiseless_gamma_stop(),
            pg_tol: default_pg_tol(),
            gaussian_variance: default_gaussian_variance(),
            restart: false,
            oracle: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec is serializable")
    }

    /// SHA-256 of the canonical JSON form, ignoring the output path.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        let digest = Sha256::digest(serde_json::to_vec(&canonical).expect("spec is serializable"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 = {} must be finite and non-negative", self.sigma2));
        }
        if self.mu_values.iter().any(|mu| !(*mu >= 0.0 && mu.is_finite())) {
            return bad("mu values must be finite and non-negative".into());
        }
        if self.s_values.iter().any(|&s| s > self.n) {
            return bad(format!("S values must not exceed N = {}", self.n));
        }
        if self.l_values.contains(&0) || self.l_factors.iter().any(|f| !(*f > 0.0)) {
            return bad("signature lengths and length factors must be positive".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta = {} must lie in (0, 1)", self.eta));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.solver == NoiselessSolver::Smoothed && !(self.smoothed_mu > 0.0) {
            return bad("smoothed_mu must be positive".into());
        }

        let needs_lengths = self.experiment != Experiment::StatdimTable;
        if needs_lengths {
            if self.s_values.is_empty() {
                return bad(format!("{} needs a non-empty s_values grid", self.experiment));
            }
            if self.l_values.is_empty() && self.l_factors.is_empty() {
                return bad(format!("{} needs l_values or l_factors", self.experiment));
            }
        }
        match self.experiment {
            Experiment::SmoothingMap | Experiment::Convergence | Experiment::ErrorVsMu if self.mu_values.is_empty() => {
                bad(format!("{} needs a non-empty mu_values grid", self.experiment))
            }
            Experiment::Convergence | Experiment::ErrorVsMu if self.mu_values.contains(&0.0) => {
                bad(format!("{} needs strictly positive mu values", self.experiment))
            }
            Experiment::Convergence | Experiment::ErrorVsMu if self.sigma2 == 0.0 => {
                bad(format!("{} needs sigma2 > 0", self.experiment))
            }
            Experiment::StatdimTable if self.rho_values.is_empty() && self.s_values.is_empty() => {
                bad("statdim_table needs rho_values or s_values".into())
            }
            Experiment::StatdimTable if self.rho_values.iter().any(|r| !(*r >= 0.0 && *r <= 1.0)) => {
                bad("rho values must lie in [0, 1]".into())
            }
            _ => Ok(()),
        }
    }

    /// Signature lengths for `S` active devices, deduplicated in grid order.
    pub fn lengths(&self, s: usize) -> Result<Vec<usize>> {
        if !self.l_values.is_empty() {
            return Ok(self.l_values.clone());
        }
        let delta_seq = statdim_plain(s as f64 / self.n as f64, self.m, self.n)?.delta_seq;
        let mut out: Vec<usize> = Vec::new();
        for f in &self.l_factors {
            let l = ((f * delta_seq).round() as usize).max(1);
            if !out.contains(&l) {
                out.push(l);
            }
        }
        Ok(out)
    }

    /// Built-in sweeps. Names without a scale suffix run the full-size
    /// regimes; `_scaled` ones keep `S/N` and `L/δ` but shrink `N`.
    pub fn preset(name: &str) -> Result<Self> {
        use Experiment::*;
        let range = |lo: usize, hi: usize, step: usize| (lo..=hi).step_by(step).collect::<Vec<_>>();
        let spec = match name {
            "fig2" => SweepSpec {
                s_values: vec![10],
                l_values: range(10, 60, 1),
                ..SweepSpec::new(PhaseMap, 100, 2)
            },
            "fig4a" => SweepSpec {
                s_values: range(2, 30, 2),
                l_values: range(4, 80, 4),
                ..SweepSpec::new(PhaseMap, 100, 2)
            },
            "fig4b" => SweepSpec {
                s_values: vec![42],
                l_values: range(40, 300, 20),
                sigma2: 1e-3,
                trials: 100,
                ..SweepSpec::new(NoisyError, 300, 3)
            },
            "fig4b_scaled" => SweepSpec {
                s_values: vec![21],
                l_factors: vec![0.5, 0.8, 1.0, 1.2, 1.5, 2.0, 2.5, 3.0],
                sigma2: 1e-3,
                ..SweepSpec::new(NoisyError, 150, 3)
            },
            "fig5" => SweepSpec {
                s_values: vec![10],
                l_values: range(10, 70, 2),
                mu_values: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0],
                ..SweepSpec::new(SmoothingMap, 100, 2)
            },
            "fig6" => SweepSpec {
                s_values: vec![100],
                l_values: vec![500],
                mu_values: vec![0.01, 0.1, 1.0],
                sigma2: 0.01,
                max_iter: 100_000,
                ..SweepSpec::new(Convergence, 2000, 10)
            },
            "fig6_scaled" => SweepSpec {
                s_values: vec![25],
                l_values: vec![125],
                mu_values: vec![0.01, 0.1, 1.0],
                sigma2: 0.01,
                max_iter: 100_000,
                ..SweepSpec::new(Convergence, 500, 5)
            },
            "fig7" => SweepSpec {
                s_values: vec![100],
                l_values: vec![500],
                mu_values: vec![0.01, 0.03, 0.1, 0.3, 1.0],
                sigma2: 0.01,
                trials: 300,
                max_iter: 100_000,
                ..SweepSpec::new(ErrorVsMu, 2000, 10)
            },
            "fig7_scaled" => SweepSpec {
                s_values: vec![25],
                l_values: vec![125],
                mu_values: vec![0.01, 0.1, 1.0],
                sigma2: 0.01,
                max_iter: 100_000,
                ..SweepSpec::new(ErrorVsMu, 500, 5)
            },
            "embedding" => SweepSpec {
                s_values: vec![10],
                l_values: range(14, 50, 1),
                ..SweepSpec::new(EmbeddingCompare, 100, 2)
            },
            "statdim" => SweepSpec {
                rho_values: vec![0.05, 0.1, 0.14, 0.2, 0.3],
                m_values: vec![1, 2, 3, 4, 8],
                mu_values: vec![0.0, 0.01, 0.1, 1.0],
                ..SweepSpec::new(StatdimTable, 100, 2)
            },
            other => return Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub const PRESETS: [&'static str; 11] = [
        "fig2",
        "fig4a",
        "fig4b",
        "fig4b_scaled",
        "fig5",
        "fig6",
        "fig6_scaled",
        "fig7",
        "fig7_scaled",
        "embedding",
        "statdim",
    ];
}
