//! Domain types and the two-regime least-squares loss.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Observed sample `(y, X, w)`. Immutable once built.
///
/// The permutation sorting `w` ascending is computed at construction; every
/// threshold sweep walks observations in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Matrix,
    w: Vec<f64>,
    order: Vec<usize>,
    /// Distinct values of `w`, ascending, with the last sorted position holding each.
    distinct: Vec<(f64, usize)>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Matrix, w: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::invalid("dataset needs at least 2 observations"));
        }
        if x.rows() != n {
            return Err(Error::DimensionMismatch {
                what: "design rows",
                expected: n,
                got: x.rows(),
            });
        }
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                what: "change covariate length",
                expected: n,
                got: w.len(),
            });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        if !x.as_col_major().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("change covariate"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)));
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            match distinct.last_mut() {
                Some(last) if last.0 == w[i] => last.1 = pos,
                _ => distinct.push((w[i], pos)),
            }
        }
        Ok(Dataset {
            y,
            x,
            w,
            order,
            distinct,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Row indices sorted by `w` ascending (ties by index).
    pub fn sorted_order(&self) -> &[usize] {
        &self.order
    }

    pub fn sorted_w(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.w[i]).collect()
    }

    /// Distinct observed `w` values, ascending, each with the last position in
    /// [`Dataset::sorted_order`] that carries it.
    pub fn distinct_w(&self) -> &[(f64, usize)] {
        &self.distinct
    }

    /// Finite change point at an observed value of `w`.
    pub fn tau_at(&self, threshold: f64) -> Result<ChangePointEstimate> {
        self.distinct
            .binary_search_by(|(v, _)| v.total_cmp(&threshold))
            .map(|k| ChangePointEstimate::Finite {
                threshold,
                grid_index: self.distinct[k].1,
            })
            .map_err(|_| Error::invalid("threshold is not an observed value of w"))
    }

    /// Empirical cdf of `w` at `t`.
    pub fn w_ecdf(&self, t: f64) -> f64 {
        // number of sorted values <= t
        let k = self.distinct.partition_point(|(v, _)| *v <= t);
        if k == 0 {
            0.0
        } else {
            (self.distinct[k - 1].1 + 1) as f64 / self.n() as f64
        }
    }

    /// Same observations with rows reordered by `perm` (row `k` of the result is
    /// row `perm[k]` of `self`).
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Dataset> {
        let y = perm.iter().map(|&i| self.y[i]).collect();
        let w = perm.iter().map(|&i| self.w[i]).collect();
        Dataset::new(y, self.x.select_rows(perm), w)
    }

    /// Sub-problem restricted to the listed rows: `(X_sub, y_sub)`.
    pub fn rows_subset(&self, idx: &[usize]) -> (Matrix, Vec<f64>) {
        (
            self.x.select_rows(idx),
            idx.iter().map(|&i| self.y[i]).collect(),
        )
    }

    /// Keeps only the listed predictor columns.
    pub fn with_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            y: self.y.clone(),
            x: self.x.select_cols(cols),
            w: self.w.clone(),
            order: self.order.clone(),
            distinct: self.distinct.clone(),
        }
    }
}

/// Change point estimate on the extended line `ℝ ∪ {−∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChangePointEstimate {
    /// `τ = −∞`: a single regime governed by γ.
    NoChange,
    /// `τ` equal to an observed `w`; `grid_index` is the last position of that
    /// value in the sorted order, so the lower partition holds `grid_index + 1` rows.
    Finite { threshold: f64, grid_index: usize },
}

impl ChangePointEstimate {
    /// `‖τ‖₀*`: 1 for a finite threshold, 0 for no change.
    pub fn l0_indicator(&self) -> u8 {
        match self {
            ChangePointEstimate::NoChange => 0,
            ChangePointEstimate::Finite { .. } => 1,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            ChangePointEstimate::NoChange => None,
            ChangePointEstimate::Finite { threshold, .. } => Some(threshold),
        }
    }

    pub fn is_no_change(&self) -> bool {
        matches!(self, ChangePointEstimate::NoChange)
    }

    #[inline]
    pub(crate) fn is_low(&self, w: f64) -> bool {
        match *self {
            ChangePointEstimate::NoChange => false,
            ChangePointEstimate::Finite { threshold, .. } => w <= threshold,
        }
    }
}

/// Pre-change (`beta`) and post-change (`gamma`) coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPair {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl RegressionPair {
    pub fn new(beta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if beta.len() != gamma.len() {
            return Err(Error::DimensionMismatch {
                what: "gamma length",
                expected: beta.len(),
                got: gamma.len(),
            });
        }
        if !beta.iter().chain(&gamma).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("regression coefficients"));
        }
        Ok(RegressionPair { beta, gamma })
    }

    /// Both regimes share one coefficient vector.
    pub fn single(coef: Vec<f64>) -> Self {
        RegressionPair {
            beta: coef.clone(),
            gamma: coef,
        }
    }

    pub fn zeros(p: usize) -> Self {
        RegressionPair::single(alloc::vec![0.0; p])
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// `ξ = ‖β − γ‖₂`
    pub fn jump_size(&self) -> f64 {
        libm::sqrt(
            self.beta
                .iter()
                .zip(&self.gamma)
                .map(|(b, g)| (b - g) * (b - g))
                .sum(),
        )
    }
}

/// Lasso penalties used for the β and γ fits of one step. A single-regime fit
/// reports the same value twice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimePenalty {
    pub beta: f64,
    pub gamma: f64,
}

impl RegimePenalty {
    pub fn both(lambda: f64) -> Self {
        RegimePenalty {
            beta: lambda,
            gamma: lambda,
        }
    }
}

/// Solve accounting for one estimator run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    /// Cross-validated Lasso fits (one per partition per step).
    pub cv_partition_fits: usize,
    /// Cross-validated fits of a (β, γ) pair, or of a single regime at Step 2.
    pub cv_pair_fits: usize,
    /// Fixed-penalty refits issued by BIC selection of μ.
    pub bic_refits: usize,
    /// Every Lasso solve met its tolerance.
    pub all_converged: bool,
    /// Step 2 fitted a single regime (τ̂ = −∞).
    pub single_regime: bool,
    /// BIC hit an exactly zero loss and used the floored logarithm.
    pub bic_degenerate: bool,
    /// Quartile candidates considered by the quartile initializer with their
    /// Step-0 losses (`None` when the candidate left a partition empty).
    pub initializer_losses: Vec<(f64, Option<f64>)>,
}

/// Output of the two-step estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepFit {
    pub coefficients: RegressionPair,
    pub tau: ChangePointEstimate,
    pub lambda1: RegimePenalty,
    pub lambda2: RegimePenalty,
    pub mu: f64,
    /// `Q(τ̂, β̂, γ̂)` on the fitted data.
    pub final_loss: f64,
    pub initializer_used: f64,
    /// Seconds spent in Steps 0, 1 and 2.
    pub wall_time_step: [f64; 3],
    pub diagnostics: FitDiagnostics,
}

impl TwoStepFit {
    pub fn total_time(&self) -> f64 {
        self.wall_time_step.iter().sum()
    }
}

fn check_pair(pair: &RegressionPair, data: &Dataset) -> Result<()> {
    for (what, v) in [("beta length", &pair.beta), ("gamma length", &pair.gamma)] {
        if v.len() != data.p() {
            return Err(Error::DimensionMismatch {
                what,
                expected: data.p(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// `Q(τ, β, γ) = (1/n)[Σ_{w_i≤τ}(y_i − x_iᵀβ)² + Σ_{w_i>τ}(y_i − x_iᵀγ)²]`.
///
/// Both partial sums use the full sample size. For `NoChange` every
/// observation is scored with γ.
pub fn squared_loss_q(tau: &ChangePointEstimate, pair: &RegressionPair, data: &Dataset) -> Result<f64> {
    check_pair(pair, data)?;
    let x = data.x();
    let mut s = 0.0;
    for (i, (&yi, &wi)) in data.y().iter().zip(data.w()).enumerate() {
        let coef = if tau.is_low(wi) { &pair.beta } else { &pair.gamma };
        let r = yi - x.row_dot(i, coef);
        s += r * r;
    }
    Ok(s / data.n() as f64)
}

/// Splits row indices into `LOW = {i : w_i ≤ τ}` and `HIGH`, both ascending.
pub fn binary_partition(data: &Dataset, tau: &ChangePointEstimate) -> (Vec<usize>, Vec<usize>) {
    (0..data.n()).partition(|&i| tau.is_low(data.w()[i]))
}

/// Partition at an arbitrary real threshold (used by initializers).
pub(crate) fn partition_at(data: &Dataset, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    (0..data.n()).partition(|&i| data.w()[i] <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> Dataset {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        Dataset::new(vec![1.0, 2.0, 3.0], x, vec![0.3, 0.7, 0.1]).unwrap()
    }

    #[test]
    fn partition_of_hand_example() {
        let d = toy();
        let tau = d.tau_at(0.3).unwrap();
        let (low, high) = binary_partition(&d, &tau);
        assert_eq!(low, vec![0, 2]);
        assert_eq!(high, vec![1]);
        assert_eq!(
            tau,
            ChangePointEstimate::Finite {
                threshold: 0.3,
                grid_index: 1
            }
        );
    }

    #[test]
    fn partition_extremes() {
        let d = toy();
        let (low, high) = binary_partition(&d, &ChangePointEstimate::NoChange);
        assert!(low.is_empty());
        assert_eq!(high, vec![0, 1, 2]);
        let (low, high) = binary_partition(&d, &d.tau_at(0.7).unwrap());
        assert_eq!(low, vec![0, 1, 2]);
        assert!(high.is_empty());
    }

    #[test]
    fn no_change_with_zero_gamma_is_mean_square_response() {
        let d = toy();
        let q = squared_loss_q(&ChangePointEstimate::NoChange, &RegressionPair::zeros(2), &d).unwrap();
        assert!((q - (1.0 + 4.0 + 9.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn noise_free_truth_has_zero_loss() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [0.5, -1.0], [2.0, 1.0], [-1.0, 0.3]]).unwrap();
        let w = vec![0.1, 0.9, 0.4, 0.6];
        let pair = RegressionPair::new(vec![1.0, -2.0], vec![0.5, 3.0]).unwrap();
        let y: Vec<f64> = (0..4)
            .map(|i| {
                let c = if w[i] <= 0.5 { &pair.beta } else { &pair.gamma };
                x.row_dot(i, c)
            })
            .collect();
        let d = Dataset::new(y, x, w).unwrap();
        let tau = d.tau_at(0.4).unwrap();
        assert_eq!(squared_loss_q(&tau, &pair, &d).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let d = toy();
        let err = squared_loss_q(&ChangePointEstimate::NoChange, &RegressionPair::zeros(3), &d);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_datasets_are_rejected() {
        let x = Matrix::zeros(1, 1);
        assert!(Dataset::new(vec![1.0], x, vec![0.0]).is_err());
        let x = Matrix::zeros(2, 1);
        assert!(Dataset::new(vec![1.0, f64::NAN], x.clone(), vec![0.0, 1.0]).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], x, vec![0.0]).is_err());
    }

    #[test]
    fn duplicates_share_one_grid_candidate() {
        let x = Matrix::zeros(4, 1);
        let d = Dataset::new(vec![0.0; 4], x, vec![0.5, 0.2, 0.5, 0.1]).unwrap();
        assert_eq!(d.distinct_w(), &[(0.1, 0), (0.2, 1), (0.5, 3)]);
        let (low, _) = binary_partition(&d, &d.tau_at(0.5).unwrap());
        assert_eq!(low.len(), 4);
        assert_eq!(d.w_ecdf(0.2), 0.5);
        assert_eq!(d.w_ecdf(0.05), 0.0);
    }
}
