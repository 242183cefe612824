//! Small-sample summary statistics for replication results: mean, sample
//! standard deviation, and two-sided 95% confidence intervals on the mean
//! using Student's t critical values.

/// Two-sided 95% t critical values for 1..=30 degrees of freedom; larger
/// samples fall back to the normal value 1.96.
const T95: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

pub fn t_value_95(df: usize) -> f64 {
    if df == 0 {
        f64::INFINITY
    } else if df <= T95.len() {
        T95[df - 1]
    } else {
        1.96
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Half width of the two-sided 95% confidence interval on the mean.
/// `None` for fewer than two values, where no spread is estimable.
pub fn half_width_95(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let se = sample_std(xs) / (xs.len() as f64).sqrt();
    Some(t_value_95(xs.len() - 1) * se)
}

/// (lower, upper) bounds of the 95% confidence interval on the mean.
pub fn confidence_interval_95(xs: &[f64]) -> Option<(f64, f64)> {
    let hw = half_width_95(xs)?;
    let m = mean(xs);
    Some((m - hw, m + hw))
}

/// Per-replication differences a − b for paired comparisons under common
/// random numbers. Panics if the slices differ in length.
pub fn paired_differences(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "paired samples need equal lengths");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
