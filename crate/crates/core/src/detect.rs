//! Activity decisions and error metrics.

use ndarray::{ArrayView2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, frobenius_sq};
use crate::model::{complex_to_real_operator, complex_to_real_stack, ComplexMatrix, GroundTruth};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// `â_i = 1` iff `‖θ̂ⁱ‖₂ ≥ γ_act`.
    pub activity_hat: Vec<u8>,
    /// Indices with `â_i = 1`, ascending.
    pub detected: Vec<usize>,
    /// Rows of `Θ̂` for the detected devices, in the order of `detected`.
    pub h_hat: ComplexMatrix,
    pub missed: usize,
    pub false_alarm: usize,
}

/// Thresholds the row norms of a complex `N × M` estimate.
pub fn detect_activity(theta_hat: ArrayView2<Complex64>, gamma_act: f64, truth: &GroundTruth) -> Result<DetectionResult> {
    if theta_hat.nrows() != truth.n() {
        return Err(Error::Dimension(format!(
            "estimate has {} rows, ground truth has {} devices",
            theta_hat.nrows(),
            truth.n()
        )));
    }
    let activity_hat: Vec<u8> = theta_hat
        .axis_iter(Axis(0))
        .map(|row| {
            let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            u8::from(norm >= gamma_act)
        })
        .collect();
    let detected: Vec<usize> = (0..activity_hat.len()).filter(|&i| activity_hat[i] == 1).collect();
    let h_hat = theta_hat.select(Axis(0), &detected);
    let mut missed = 0;
    let mut false_alarm = 0;
    for (&a, &a_hat) in truth.activity.iter().zip(&activity_hat) {
        match (a, a_hat) {
            (1, 0) => missed += 1,
            (0, 1) => false_alarm += 1,
            _ => {}
        }
    }
    Ok(DetectionResult {
        activity_hat,
        detected,
        h_hat,
        missed,
        false_alarm,
    })
}

/// `‖Θ̂ − Θ₀‖_F ≤ tol`, or `≤ tol · ‖Θ₀‖_F` when `relative` is set.
pub fn recovery_success(theta_hat: ArrayView2<f64>, theta0: ArrayView2<f64>, tol: f64, relative: bool) -> bool {
    let err = frobenius((&theta_hat - &theta0).view());
    let scale = if relative { frobenius(theta0) } else { 1.0 };
    err <= tol * scale
}

fn embedded_dims(qb: ArrayView2<f64>, y_cols: usize) -> (f64, f64) {
    (qb.nrows() as f64 / 2.0, y_cols as f64)
}

/// `R = ‖Q̄Θ̂ − Q̄Θ₀‖²_F / (2LM)` with `L` and `M` read from the shapes.
pub fn prediction_error(qb: ArrayView2<f64>, theta_hat: ArrayView2<f64>, theta0: ArrayView2<f64>) -> f64 {
    let (l, m) = embedded_dims(qb, theta_hat.ncols());
    let diff = &theta_hat - &theta0;
    frobenius_sq(qb.dot(&diff).view()) / (2.0 * l * m)
}

/// `R̂ = ‖Q̄Θ̂ − Ỹ‖²_F / (2LM)`.
pub fn empirical_error(qb: ArrayView2<f64>, theta_hat: ArrayView2<f64>, yt: ArrayView2<f64>) -> f64 {
    let (l, m) = embedded_dims(qb, yt.ncols());
    frobenius_sq((qb.dot(&theta_hat) - yt).view()) / (2.0 * l * m)
}

fn complex_frobenius_sq(x: ArrayView2<Complex64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// [`prediction_error`] evaluated in the complex domain: `‖Q(Θ̂ − Θ₀)‖²_F / (2LM)`.
pub fn prediction_error_complex(q: ArrayView2<Complex64>, theta_hat: ArrayView2<Complex64>, theta0: ArrayView2<Complex64>) -> f64 {
    let (l, m) = (q.nrows() as f64, theta_hat.ncols() as f64);
    complex_frobenius_sq(q.dot(&(&theta_hat - &theta0)).view()) / (2.0 * l * m)
}

/// [`empirical_error`] evaluated in the complex domain.
pub fn empirical_error_complex(q: ArrayView2<Complex64>, theta_hat: ArrayView2<Complex64>, y: ArrayView2<Complex64>) -> f64 {
    let (l, m) = (q.nrows() as f64, y.ncols() as f64);
    complex_frobenius_sq((q.dot(&theta_hat) - y).view()) / (2.0 * l * m)
}

/// Mean squared estimation error `‖Θ̂ − Θ₀‖²_F / (NM)` of a real-embedded estimate.
pub fn estimation_error(theta_hat: ArrayView2<f64>, theta0: ArrayView2<f64>) -> f64 {
    let n = theta0.nrows() as f64 / 2.0;
    frobenius_sq((&theta_hat - &theta0).view()) / (n * theta0.ncols() as f64)
}

/// Checks that a complex estimate and its embedding give the same metrics.
#[doc(hidden)]
pub fn embedded_metrics(
    q: ArrayView2<Complex64>,
    theta_hat: ArrayView2<Complex64>,
    theta0: ArrayView2<Complex64>,
    y: ArrayView2<Complex64>,
) -> (f64, f64) {
    let qt = complex_to_real_operator(q);
    let th = complex_to_real_stack(theta_hat);
    (
        prediction_error(qt.view(), th.view(), complex_to_real_stack(theta0).view()),
        empirical_error(qt.view(), th.view(), complex_to_real_stack(y).view()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_system, row_orthonormalize, SystemConfig};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn instance(sigma2: f64) -> (GroundTruth, crate::model::Observation) {
        let cfg = SystemConfig::new(40, 3, 20, 6).with_sigma2(sigma2).with_seed(11);
        generate_system(&cfg, 5).unwrap()
    }

    #[test]
    fn exact_estimate_is_detected_perfectly() {
        let (truth, _) = instance(0.0);
        let d = detect_activity(truth.theta0.view(), 1e-6, &truth).unwrap();
        assert_eq!(d.missed, 0);
        assert_eq!(d.false_alarm, 0);
        assert_eq!(d.detected, truth.support);
        assert_eq!(d.h_hat, truth.theta0.select(Axis(0), &truth.support));
    }

    #[test]
    fn zero_estimate_misses_everything() {
        let (truth, _) = instance(0.0);
        let zero = ComplexMatrix::zeros(truth.theta0.raw_dim());
        let d = detect_activity(zero.view(), 1e-6, &truth).unwrap();
        assert_eq!(d.missed, truth.support.len());
        assert_eq!(d.false_alarm, 0);
        assert!(d.detected.is_empty());
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let (truth, _) = instance(0.0);
        let bad = ComplexMatrix::zeros((3, 3));
        assert!(detect_activity(bad.view(), 1e-3, &truth).is_err());
    }

    #[test]
    fn detection_is_monotone_in_threshold() {
        let (truth, _) = instance(0.0);
        let mut rng = crate::model::rng_from(3);
        let noisy = truth.theta0.mapv(|z| {
            z + Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * 0.3
        });
        let mut prev: Option<DetectionResult> = None;
        for k in 0..40 {
            let d = detect_activity(noisy.view(), 0.05 * k as f64, &truth).unwrap();
            if let Some(p) = &prev {
                assert!(d.missed >= p.missed);
                assert!(d.false_alarm <= p.false_alarm);
            }
            assert!(d.missed <= truth.support.len());
            assert!(d.false_alarm <= truth.n() - truth.support.len());
            prev = Some(d);
        }
    }

    #[test]
    fn recovery_success_thresholds() {
        let (truth, _) = instance(0.0);
        let t0 = truth.stacked();
        assert!(recovery_success(t0.view(), t0.view(), 1e-5, false));
        let mut e = t0.clone();
        e[[0, 0]] += 2e-5;
        assert!(!recovery_success(e.view(), t0.view(), 1e-5, false));
        let scale = frobenius(t0.view());
        assert!(recovery_success(e.view(), t0.view(), 3e-5 / scale, true));
    }

    #[test]
    fn errors_vanish_at_truth() {
        let (truth, obs) = instance(0.0);
        let t0 = truth.stacked();
        let qt = obs.q_embedded();
        assert_eq!(prediction_error(qt.view(), t0.view(), t0.view()), 0.0);
        assert!(empirical_error(qt.view(), t0.view(), obs.y_stacked().view()) < 1e-28);
    }

    #[test]
    fn empirical_error_at_truth_is_noise_energy() {
        let (truth, obs) = instance(0.01);
        let qt = obs.q_embedded();
        let r = empirical_error(qt.view(), truth.stacked().view(), obs.y_stacked().view());
        let noise = complex_frobenius_sq(obs.noise.view()) / (2.0 * 20.0 * 3.0);
        assert!((r - noise).abs() <= 1e-12 * noise);
    }

    #[test]
    fn orthonormal_rows_preserve_row_space_errors() {
        let mut rng = crate::model::rng_from(9);
        let raw = ndarray::Array2::from_shape_simple_fn((10, 30), || rng.sample::<f64, _>(StandardNormal));
        let qb = row_orthonormalize(raw.view()).unwrap();
        let coeff = ndarray::Array2::from_shape_simple_fn((10, 2), || rng.sample::<f64, _>(StandardNormal));
        let diff = qb.t().dot(&coeff);
        let zero = crate::RealMatrix::zeros((30, 2));
        let r = prediction_error(qb.view(), diff.view(), zero.view());
        let expected = frobenius_sq(diff.view()) / (2.0 * 5.0 * 2.0);
        assert!((r - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn complex_and_real_metrics_agree() {
        let (truth, obs) = instance(0.05);
        let mut rng = crate::model::rng_from(4);
        let est = truth.theta0.mapv(|z| z + Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0) * 0.1);
        let (r_real, rhat_real) = embedded_metrics(obs.q.view(), est.view(), truth.theta0.view(), obs.y.view());
        let r_c = prediction_error_complex(obs.q.view(), est.view(), truth.theta0.view());
        let rhat_c = empirical_error_complex(obs.q.view(), est.view(), obs.y.view());
        assert!((r_real - r_c).abs() <= 1e-12 * r_c);
        assert!((rhat_real - rhat_c).abs() <= 1e-12 * rhat_c);
    }

    #[test]
    fn estimation_error_normalisation() {
        let a = crate::RealMatrix::zeros((4, 2));
        let b = crate::RealMatrix::from_elem((4, 2), 1.0);
        assert_eq!(estimation_error(b.view(), a.view()), 8.0 / 4.0);
    }
}
