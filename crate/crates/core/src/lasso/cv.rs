use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::solver::{lambda_max, CoordinateDescent, LassoOptions, LassoSolution};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats::log_space_desc;

/// Number of points and `λ_min / λ_max` of a regularization path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub points: usize,
    pub ratio: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec {
            points: 100,
            ratio: 1e-3,
        }
    }
}

/// Log-spaced descending penalties from `λ_max` to `ratio·λ_max`.
pub fn lambda_path(x: &Matrix, y: &[f64], n_full: f64, spec: PathSpec) -> Result<Vec<f64>> {
    if spec.points < 2 {
        return Err(Error::invalid("lambda path needs at least 2 points"));
    }
    if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(Error::invalid("lambda path ratio must lie in (0, 1)"));
    }
    let lmax = lambda_max(x, y, n_full);
    if !(lmax > 0.0) || !lmax.is_finite() {
        return Err(Error::invalid("lambda_max is zero: design or response carries no signal"));
    }
    Ok(log_space_desc(lmax, spec.ratio * lmax, spec.points))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best_lambda: f64,
    pub best_index: usize,
    /// Mean held-out squared prediction error per path point.
    pub curve: Vec<f64>,
}

/// K-fold cross-validation of the penalty along a descending path.
///
/// Folds come from a seeded uniform permutation of the rows. Each training
/// fold keeps the loss weight of the full problem by using the normalizer
/// `n_full · m_train / m`.
pub fn cross_validate_lambda(
    x: &Matrix,
    y: &[f64],
    n_full: f64,
    k_folds: usize,
    path: &[f64],
    seed: u64,
) -> Result<CvOutcome> {
    cross_validate_lambda_with(x, y, n_full, k_folds, path, seed, LassoOptions::default())
}

pub fn cross_validate_lambda_with(
    x: &Matrix,
    y: &[f64],
    n_full: f64,
    k_folds: usize,
    path: &[f64],
    seed: u64,
    opts: LassoOptions,
) -> Result<CvOutcome> {
    let m = y.len();
    if k_folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if m < k_folds {
        return Err(Error::invalid("fewer rows than cross-validation folds"));
    }
    if path.is_empty() {
        return Err(Error::invalid("empty lambda path"));
    }
    if path.len() == 1 {
        return Ok(CvOutcome {
            best_lambda: path[0],
            best_index: 0,
            curve: vec![f64::NAN],
        });
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; m];
    for (t, &i) in perm.iter().enumerate() {
        fold_of[i] = t % k_folds;
    }

    let mut sse = vec![0.0; path.len()];
    for fold in 0..k_folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| fold_of[i] == fold);
        let x_train = x.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let x_test = x.select_rows(&test);
        let norm = n_full * train.len() as f64 / m as f64;
        let mut cd = CoordinateDescent::new(&x_train, &y_train, norm, opts);
        let mut warm: Option<Vec<f64>> = None;
        for (k, &lambda) in path.iter().enumerate() {
            let s = cd.solve(lambda, warm.as_deref());
            let pred = x_test.mul_vec(&s.beta);
            sse[k] += test
                .iter()
                .zip(&pred)
                .map(|(&i, f)| (y[i] - f) * (y[i] - f))
                .sum::<f64>();
            warm = Some(s.beta);
        }
    }
    let curve: Vec<f64> = sse.iter().map(|s| s / m as f64).collect();
    // first minimum along the descending path: ties go to the larger penalty
    let best_index = curve
        .iter()
        .enumerate()
        .fold(0, |b, (k, &v)| if v < curve[b] { k } else { b });
    Ok(CvOutcome {
        best_lambda: path[best_index],
        best_index,
        curve,
    })
}

/// A Lasso fit whose penalty was chosen by cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvLassoFit {
    pub lambda: f64,
    pub solution: LassoSolution,
    /// `None` when the sub-problem was too small or carried no signal.
    pub cv: Option<CvOutcome>,
}

/// Cross-validates the penalty, then solves the path on all rows down to the
/// selected value.
///
/// Degenerate sub-problems do not fail: with fewer rows than folds
/// leave-one-out is used, and with fewer than two rows (or `λ_max = 0`) the
/// coefficients are zero and the reported penalty is `λ_max`.
pub fn fit_lasso_cv(
    x: &Matrix,
    y: &[f64],
    n_full: f64,
    k_folds: usize,
    spec: PathSpec,
    seed: u64,
    opts: LassoOptions,
) -> Result<CvLassoFit> {
    let m = y.len();
    let p = x.cols();
    let lmax = if m == 0 { 0.0 } else { lambda_max(x, y, n_full) };
    if m < 2 || !(lmax > 0.0) {
        return Ok(CvLassoFit {
            lambda: lmax,
            solution: LassoSolution {
                beta: vec![0.0; p],
                iterations: 0,
                kkt_residual: 0.0,
                converged: true,
                objective_trace: Vec::new(),
            },
            cv: None,
        });
    }
    let path = lambda_path(x, y, n_full, spec)?;
    let folds = k_folds.min(m);
    let cv = cross_validate_lambda_with(x, y, n_full, folds, &path, seed, opts)?;
    let mut cd = CoordinateDescent::new(x, y, n_full, opts);
    let mut sols = cd.solve_path(&path[..=cv.best_index], None);
    let solution = sols.pop().expect("path is nonempty");
    Ok(CvLassoFit {
        lambda: cv.best_lambda,
        solution,
        cv: Some(cv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_path() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let y = [1.0, 1.0];
        let path = lambda_path(&x, &y, 2.0, PathSpec { points: 2, ratio: 0.5 }).unwrap();
        assert_eq!(path, vec![3.0, 1.5]);
    }

    #[test]
    fn path_errors() {
        let x = Matrix::zeros(3, 2);
        let y = [1.0, 2.0, 3.0];
        assert!(lambda_path(&x, &y, 3.0, PathSpec::default()).is_err());
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(lambda_path(&x, &[1.0, 1.0], 2.0, PathSpec { points: 1, ratio: 0.5 }).is_err());
        assert!(lambda_path(&x, &[1.0, 1.0], 2.0, PathSpec { points: 5, ratio: 1.0 }).is_err());
    }

    #[test]
    fn single_point_path_is_returned() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let cv = cross_validate_lambda(&x, &[1.0, 2.0, 3.0], 3.0, 2, &[0.7], 1).unwrap();
        assert_eq!(cv.best_lambda, 0.7);
    }

    #[test]
    fn too_few_rows_for_folds() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(cross_validate_lambda(&x, &[1.0, 2.0], 2.0, 5, &[1.0, 0.5], 0).is_err());
    }

    #[test]
    fn tiny_subproblems_degrade_gracefully() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let f = fit_lasso_cv(&x, &[3.0], 10.0, 5, PathSpec::default(), 0, LassoOptions::default())
            .unwrap();
        assert_eq!(f.solution.beta, vec![0.0, 0.0]);
        assert!(f.cv.is_none());
        let x = Matrix::from_rows(&[[1.0], [2.0], [0.5]]).unwrap();
        let f = fit_lasso_cv(&x, &[1.0, 2.1, 0.4], 10.0, 5, PathSpec::default(), 0, LassoOptions::default())
            .unwrap();
        assert!(f.cv.is_some());
        assert!(f.solution.converged);
    }
}
