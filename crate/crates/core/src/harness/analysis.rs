/// Least-squares non-decreasing fit by pool-adjacent-violators.
pub fn isotonic_fit(values: &[f64]) -> Vec<f64> {
    // (mean, weight) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b_mean, b_w) = blocks[blocks.len() - 1];
            let (a_mean, a_w) = blocks[blocks.len() - 2];
            if a_mean <= b_mean {
                break;
            }
            blocks.pop();
            let w = a_w + b_w;
            *blocks.last_mut().unwrap() = ((a_mean * a_w as f64 + b_mean * b_w as f64) / w as f64, w);
        }
    }
    blocks.into_iter().flat_map(|(m, w)| std::iter::repeat_n(m, w)).collect()
}

/// Length at which the monotone fit of `probs` first reaches `level`,
/// interpolated linearly between grid points.
///
/// Returns `None` if the fit never reaches `level`; if it already does at
/// the first grid point, that point is returned.
pub fn crossing_length(lengths: &[usize], probs: &[f64], level: f64) -> Option<f64> {
    assert_eq!(lengths.len(), probs.len());
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| lengths[i]);
    let ls: Vec<f64> = order.iter().map(|&i| lengths[i] as f64).collect();
    let fit = isotonic_fit(&order.iter().map(|&i| probs[i]).collect::<Vec<_>>());
    let j = fit.iter().position(|&p| p >= level)?;
    if j == 0 {
        return Some(ls[0]);
    }
    let (p0, p1) = (fit[j - 1], fit[j]);
    Some(ls[j - 1] + (level - p0) / (p1 - p0) * (ls[j] - ls[j - 1]))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation over `√n`).
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

pub fn median(xs: &[usize]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2] as f64
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2]) as f64
    }
}
