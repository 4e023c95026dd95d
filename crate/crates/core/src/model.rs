//! Synthetic JADE instances and the complex ↔ real embedding.
//!
//! Complex Gaussians follow the circular convention: `𝒞𝒩(0, v)` has
//! independent real and imaginary parts, each `𝒩(0, v/2)`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RealMatrix = Array2<f64>;
pub type ComplexMatrix = Array2<Complex64>;

/// Scalar problem parameters shared by the generators and solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of devices.
    pub n: usize,
    /// Base-station antennas.
    pub m: usize,
    /// Signature length.
    pub l: usize,
    /// Active devices.
    pub s: usize,
    /// Complex noise variance per entry.
    #[serde(default)]
    pub sigma2: f64,
    /// Smoothing parameter.
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_gamma_stop")]
    pub gamma_stop: f64,
    #[serde(default = "default_gamma_act")]
    pub gamma_act: f64,
}

fn default_gamma_stop() -> f64 {
    1e-3
}

fn default_gamma_act() -> f64 {
    1e-3
}

impl SystemConfig {
    pub fn new(n: usize, m: usize, l: usize, s: usize) -> Self {
        Self {
            n,
            m,
            l,
            s,
            sigma2: 0.0,
            mu: 0.0,
            master_seed: 0,
            gamma_stop: default_gamma_stop(),
            gamma_act: default_gamma_act(),
        }
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.l == 0 {
            return Err(Error::InvalidConfig(format!(
                "dimensions must be positive (N={}, M={}, L={})",
                self.n, self.m, self.l
            )));
        }
        if self.s > self.n {
            return Err(Error::InvalidConfig(format!(
                "active devices S={} exceed device count N={}",
                self.s, self.n
            )));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma2 = {} must be finite and non-negative", self.sigma2)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu = {} must be finite and non-negative", self.mu)));
        }
        Ok(())
    }

    /// Normalized sparsity `S / N`.
    pub fn rho(&self) -> f64 {
        self.s as f64 / self.n as f64
    }
}

/// The group-sparse signal `Θ₀ = AH` and its support.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `N × M`; row `i` is nonzero iff `i` is in `support`.
    pub theta0: ComplexMatrix,
    /// Active device indices in increasing order.
    pub support: Vec<usize>,
    /// 0/1 activity indicator of length `N`.
    pub activity: Vec<u8>,
}

impl GroundTruth {
    pub fn n(&self) -> usize {
        self.theta0.nrows()
    }

    pub fn m(&self) -> usize {
        self.theta0.ncols()
    }

    /// Real embedding `[Re Θ₀; Im Θ₀]`.
    pub fn stacked(&self) -> RealMatrix {
        complex_to_real_stack(self.theta0.view())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Received block `Y = QΘ₀ + N`, `L × M`.
    pub y: ComplexMatrix,
    /// Signature matrix, `L × N`.
    pub q: ComplexMatrix,
    /// Noise realisation added to `QΘ₀`.
    pub noise: ComplexMatrix,
    pub noise_sigma2: f64,
}

impl Observation {
    /// Embedded operator `Q̃` (`2L × 2N`).
    pub fn q_embedded(&self) -> RealMatrix {
        complex_to_real_operator(self.q.view())
    }

    /// Embedded observation `Ỹ` (`2L × M`).
    pub fn y_stacked(&self) -> RealMatrix {
        complex_to_real_stack(self.y.view())
    }
}

/// Mixes a master seed with a sweep-point index and a trial index.
///
/// Used so every Monte Carlo trial owns an RNG stream that does not depend on
/// execution order.
pub fn derive_seed(master_seed: u64, point: u64, trial: u64) -> u64 {
    let a = splitmix64(master_seed ^ 0x6a09_e667_f3bc_c909);
    let b = splitmix64(a ^ point.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    splitmix64(b ^ trial.wrapping_mul(0xbf58_476d_1ce4_e5b9))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

fn complex_gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> ComplexMatrix {
    Array2::from_shape_simple_fn((rows, cols), || complex_gaussian(rng, variance))
}

/// Draws one instance: `Q ~ 𝒞𝒩(0, 1)`, a uniform support of size `S`,
/// `𝒞𝒩(0, I)` channels on that support and `𝒞𝒩(0, σ²)` noise.
///
/// The output is a deterministic function of `(config.master_seed, trial_seed)`.
pub fn generate_system(config: &SystemConfig, trial_seed: u64) -> Result<(GroundTruth, Observation)> {
    config.validate()?;
    let SystemConfig { n, m, l, s, .. } = *config;
    let mut rng = rng_from(splitmix64(config.master_seed) ^ trial_seed);

    let q = complex_gaussian_matrix(&mut rng, l, n, 1.0);

    let mut support = index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut activity = vec![0u8; n];
    let mut theta0 = ComplexMatrix::zeros((n, m));
    for &i in &support {
        activity[i] = 1;
        for v in theta0.row_mut(i).iter_mut() {
            *v = complex_gaussian(&mut rng, 1.0);
        }
    }

    let noise = if config.sigma2 > 0.0 {
        complex_gaussian_matrix(&mut rng, l, m, config.sigma2)
    } else {
        ComplexMatrix::zeros((l, m))
    };
    let y = q.dot(&theta0) + &noise;

    Ok((
        GroundTruth { theta0, support, activity },
        Observation { y, q, noise, noise_sigma2: config.sigma2 },
    ))
}

/// `[[Re Q, −Im Q], [Im Q, Re Q]]`.
pub fn complex_to_real_operator(q: ArrayView2<Complex64>) -> RealMatrix {
    let (l, n) = q.dim();
    let mut out = RealMatrix::zeros((2 * l, 2 * n));
    let re = q.mapv(|z| z.re);
    let im = q.mapv(|z| z.im);
    out.slice_mut(s![..l, ..n]).assign(&re);
    out.slice_mut(s![..l, n..]).assign(&im.mapv(|v| -v));
    out.slice_mut(s![l.., ..n]).assign(&im);
    out.slice_mut(s![l.., n..]).assign(&re);
    out
}

/// `[Re X; Im X]`.
pub fn complex_to_real_stack(x: ArrayView2<Complex64>) -> RealMatrix {
    let re = x.mapv(|z| z.re);
    let im = x.mapv(|z| z.im);
    ndarray::concatenate(Axis(0), &[re.view(), im.view()]).expect("stack halves share a column count")
}

/// Inverse of [`complex_to_real_stack`].
pub fn real_to_complex_stack(xt: ArrayView2<f64>) -> Result<ComplexMatrix> {
    if !xt.nrows().is_multiple_of(2) {
        return Err(Error::Dimension(format!("stacked matrix has odd row count {}", xt.nrows())));
    }
    let n = xt.nrows() / 2;
    let re = xt.slice(s![..n, ..]);
    let im = xt.slice(s![n.., ..]);
    Ok(ndarray::Zip::from(&re).and(&im).map_collect(|&a, &b| Complex64::new(a, b)))
}

/// `2L × 2N` matrix of i.i.d. `𝒩(0, variance)` entries.
pub fn gaussian_real_sensing(l: usize, n: usize, variance: f64, seed: u64) -> RealMatrix {
    let mut rng = rng_from(seed);
    let sd = variance.max(0.0).sqrt();
    Array2::from_shape_simple_fn((2 * l, 2 * n), || {
        let g: f64 = rng.sample(StandardNormal);
        sd * g
    })
}

/// Orthonormalizes the rows with two passes of modified Gram-Schmidt.
///
/// The row space is preserved. Fails when a pivot drops below `1e-12` times
/// the largest input row norm.
pub fn row_orthonormalize(qb: ArrayView2<f64>) -> Result<RealMatrix> {
    let (rows, cols) = qb.dim();
    if rows > cols {
        return Err(Error::Dimension(format!(
            "cannot orthonormalize {rows} rows in dimension {cols}"
        )));
    }
    let leading = qb
        .outer_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0_f64, f64::max);
    let mut out = qb.to_owned();
    for i in 0..rows {
        let mut row: Array1<f64> = out.row(i).to_owned();
        for _pass in 0..2 {
            for j in 0..i {
                let basis = out.row(j);
                let c = basis.dot(&row);
                row.scaled_add(-c, &basis);
            }
        }
        let norm = row.dot(&row).sqrt();
        if !(norm > 1e-12 * leading) {
            return Err(Error::RankDeficient { pivot: i, norm, leading });
        }
        row /= norm;
        out.row_mut(i).assign(&row);
    }
    Ok(out)
}
