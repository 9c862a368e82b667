//! Column preprocessing applied before fitting: centering/scaling and removal
//! of predictors that track the change covariate.

use alloc::vec::Vec;

use crate::error::Result;
use crate::matrix::Matrix;
use crate::model::Dataset;
use crate::stats::{correlation, mean, std_dev};

#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub y_mean: f64,
    pub y_scale: f64,
    pub x_means: Vec<f64>,
    /// Column standard deviations (`1/n`); constant columns keep scale 1.
    pub x_scales: Vec<f64>,
}

fn center_scale(v: &[f64]) -> (Vec<f64>, f64, f64) {
    let m = mean(v);
    let s = std_dev(v);
    let s = if s > 0.0 { s } else { 1.0 };
    (v.iter().map(|x| (x - m) / s).collect(), m, s)
}

/// Centers and unit-scales `y` and every column of `X`; `w` is untouched.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardization)> {
    let (y, y_mean, y_scale) = center_scale(data.y());
    let (n, p) = (data.n(), data.p());
    let mut cols = Vec::with_capacity(n * p);
    let mut x_means = Vec::with_capacity(p);
    let mut x_scales = Vec::with_capacity(p);
    for j in 0..p {
        let (c, m, s) = center_scale(data.x().col(j));
        cols.extend(c);
        x_means.push(m);
        x_scales.push(s);
    }
    let x = Matrix::from_col_major(n, p, cols)?;
    let out = Dataset::new(y, x, data.w().to_vec())?;
    Ok((
        out,
        Standardization {
            y_mean,
            y_scale,
            x_means,
            x_scales,
        },
    ))
}

/// Drops predictors whose absolute correlation with `w` exceeds `max_abs_corr`.
/// Returns the reduced dataset and the dropped column indices.
pub fn drop_correlated(data: &Dataset, max_abs_corr: f64) -> (Dataset, Vec<usize>) {
    let (keep, dropped): (Vec<usize>, Vec<usize>) =
        (0..data.p()).partition(|&j| correlation(data.x().col(j), data.w()).abs() <= max_abs_corr);
    (data.with_columns(&keep), dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [4.0, 5.0]]).unwrap();
        let d = Dataset::new(vec![3.0, 1.0, 2.0], x, vec![0.1, 0.2, 0.3]).unwrap();
        let (s, info) = standardize(&d).unwrap();
        assert!(mean(s.x().col(0)).abs() < 1e-15);
        assert!((std_dev(s.x().col(0)) - 1.0).abs() < 1e-12);
        assert!(s.x().col(1).iter().all(|&v| v == 0.0));
        assert_eq!(info.x_scales[1], 1.0);
        assert!((std_dev(s.y()) - 1.0).abs() < 1e-12);
        assert_eq!(s.w(), d.w());
    }

    #[test]
    fn correlated_predictor_is_dropped() {
        let x = Matrix::from_rows(&[[0.1, 1.0], [0.2, -1.0], [0.3, 1.0], [0.4, -1.0]]).unwrap();
        let d = Dataset::new(vec![0.0; 4], x, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (r, dropped) = drop_correlated(&d, 0.9);
        assert_eq!(dropped, vec![0]);
        assert_eq!(r.p(), 1);
    }
}
