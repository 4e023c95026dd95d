//! Small dense helpers shared by the solver and metric code.
//!
//! Real embedded matrices are `2N × M`; group `i` consists of rows `i` and
//! `i + N`, which carry the real and imaginary parts of the `i`-th complex row.

use ndarray::{Array1, ArrayView2, ArrayViewMut2, Zip};

pub fn frobenius(x: ArrayView2<f64>) -> f64 {
    frobenius_sq(x).sqrt()
}

pub fn frobenius_sq(x: ArrayView2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn inner(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + x * y)
}

/// Number of groups of a `2N × M` embedded matrix.
///
/// Panics if the row count is odd.
pub fn group_count(x: ArrayView2<f64>) -> usize {
    assert!(
        x.nrows().is_multiple_of(2),
        "embedded matrix must have an even number of rows, got {}",
        x.nrows()
    );
    x.nrows() / 2
}

/// Frobenius norm of each `2 × M` block `V_i = {i, i + N}`.
pub fn group_norms(x: ArrayView2<f64>) -> Array1<f64> {
    let n = group_count(x);
    Array1::from_shape_fn(n, |i| {
        let re = x.row(i);
        let im = x.row(i + n);
        (re.dot(&re) + im.dot(&im)).sqrt()
    })
}

/// Mixed `ℓ₁/ℓ₂` norm `Σᵢ ‖X_Vi‖_F`.
pub fn group_norm_sum(x: ArrayView2<f64>) -> f64 {
    group_norms(x).sum()
}

/// Multiplies block `V_i` by `scale[i]` in place.
pub fn scale_groups(mut x: ArrayViewMut2<f64>, scale: &Array1<f64>) {
    let n = scale.len();
    debug_assert_eq!(x.nrows(), 2 * n);
    for (i, &s) in scale.iter().enumerate() {
        if s != 1.0 {
            x.row_mut(i).mapv_inplace(|v| v * s);
            x.row_mut(i + n).mapv_inplace(|v| v * s);
        }
    }
}
