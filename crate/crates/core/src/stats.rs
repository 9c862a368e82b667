//! Small descriptive statistics over slices.

use alloc::vec::Vec;

/// Inverse of the empirical cdf: the smallest sorted value whose ecdf is at
/// least `q` (clamped to the sample range).
pub fn empirical_quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let k = libm::ceil(q * n as f64) as isize - 1;
    sorted[k.clamp(0, n as isize - 1) as usize]
}

pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    empirical_quantile_sorted(&s, q)
}

/// Fraction of observations `≤ t`.
pub fn ecdf(values: &[f64], t: f64) -> f64 {
    values.iter().filter(|&&v| v <= t).count() as f64 / values.len() as f64
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard deviation with the `1/n` normalizer.
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64)
}

/// Pearson correlation; 0 when either input is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / libm::sqrt(saa * sbb)
    }
}

/// `points` log-spaced values from `hi` down to `lo` (both included).
pub fn log_space_desc(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return alloc::vec![hi];
    }
    let (lh, ll) = (libm::log(hi), libm::log(lo));
    (0..points)
        .map(|k| {
            if k == 0 {
                hi
            } else if k == points - 1 {
                lo
            } else {
                libm::exp(lh + (ll - lh) * k as f64 / (points - 1) as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_follow_inverse_ecdf() {
        assert_eq!(empirical_quantile(&[0.3, 0.1, 0.2], 0.5), 0.2);
        // lower median for even n
        assert_eq!(empirical_quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.0);
        assert_eq!(empirical_quantile(&[4.0, 1.0, 3.0, 2.0], 0.25), 1.0);
        assert_eq!(empirical_quantile(&[4.0, 1.0, 3.0, 2.0], 0.75), 3.0);
        assert_eq!(empirical_quantile(&[5.0], 0.9), 5.0);
    }

    #[test]
    fn ecdf_and_correlation() {
        assert_eq!(ecdf(&[0.1, 0.2, 0.3, 0.4], 0.25), 0.5);
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert_eq!(correlation(&[1.0, 1.0], &[0.0, 3.0]), 0.0);
    }

    #[test]
    fn log_space_endpoints() {
        let g = log_space_desc(8.0, 1.0, 4);
        assert_eq!(g[0], 8.0);
        assert_eq!(g[3], 1.0);
        assert!((g[1] - 4.0).abs() < 1e-12 && (g[2] - 2.0).abs() < 1e-12);
    }
}
