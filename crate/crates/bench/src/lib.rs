//! Shared fixtures for the criterion benches.

use jade_core::model::{generate_system, SystemConfig};
use jade_core::RealMatrix;

/// Embedded operator, observation and ground truth of one noiseless instance.
pub fn instance(n: usize, m: usize, l: usize, s: usize, seed: u64) -> (RealMatrix, RealMatrix, RealMatrix) {
    let cfg = SystemConfig::new(n, m, l, s).with_seed(seed);
    let (truth, obs) = generate_system(&cfg, 0).expect("valid fixture");
    (obs.q_embedded(), obs.y_stacked(), truth.stacked())
}
