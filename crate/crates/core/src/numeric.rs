//! Small numerical helpers: compensated summation and descriptive statistics.

/// Neumaier-compensated sum. The result does not depend on how the input was
/// produced, only on its order, and is accurate to about one ulp of the total.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Population mean and standard deviation (divides by `n`, not `n - 1`).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std_dev: f64,
}

/// Returns `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    Some(MeanStd {
        mean,
        std_dev: var.sqrt(),
    })
}

/// Linear-interpolated percentile (`q` in `[0, 100]`) of unsorted data.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Trapezoidal integral of `values` over the abscissae `x`.
pub fn trapezoid(x: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), values.len());
    compensated_sum(
        x.windows(2)
            .zip(values.windows(2))
            .map(|(xw, vw)| 0.5 * (xw[1] - xw[0]) * (vw[0] + vw[1])),
    )
}
