//! Fitting a named dataset and the JSON report describing the fit.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use hdcp_core::two_step::fitted_threshold;
use hdcp_core::{drop_correlated, run_algorithm1_timed, standardize, AlgorithmConfig, Clock, InitScheme, MuSelection, NoClock};

use crate::csv_io::NamedDataset;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub scheme: Scheme,
    /// Fixed `μ`; BIC selection when `None`.
    pub mu: Option<f64>,
    pub standardize: bool,
    pub drop_correlated: Option<f64>,
    pub seed: u64,
    pub k_folds: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            scheme: Scheme::A,
            mu: None,
            standardize: false,
            drop_correlated: None,
            seed: 0,
            k_folds: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub step0: f64,
    pub step1: f64,
    pub step2: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub standardized: bool,
    pub no_change: bool,
    pub tau_hat: Option<f64>,
    /// Fraction of observations with `w ≤ τ̂`.
    pub tau_hat_quantile: Option<f64>,
    pub tau_initial: f64,
    /// Nonzero pre-change coefficients by name; `null` without a change point.
    pub beta: Option<Map<String, Value>>,
    /// Nonzero post-change (or single-regime) coefficients by name.
    pub gamma: Map<String, Value>,
    pub lambda1: Penalties,
    pub lambda2: Penalties,
    pub mu: f64,
    pub converged: bool,
    pub timings: Option<Timings>,
    pub dropped_columns: Vec<String>,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn nonzero(names: &[String], coef: &[f64]) -> Map<String, Value> {
    names
        .iter()
        .zip(coef)
        .filter(|(_, &c)| c != 0.0)
        .map(|(k, &c)| (k.clone(), Value::from(c)))
        .collect()
}

/// Preprocesses per `opts`, runs the two-step estimator and builds the report.
/// Without a clock all timings are omitted.
pub fn fit_dataset(named: &NamedDataset, opts: &FitOptions, clock: Option<&dyn Clock>) -> hdcp_core::Result<FitReport> {
    let mut work = named.clone();
    let mut dropped = Vec::new();
    if let Some(r) = opts.drop_correlated {
        let (_, idx) = drop_correlated(&work.data, r);
        dropped = idx.iter().map(|&j| work.predictors[j].clone()).collect();
        let keep: Vec<usize> = (0..work.data.p()).filter(|j| !idx.contains(j)).collect();
        if keep.is_empty() {
            return Err(hdcp_core::Error::InvalidArgument(
                "every predictor was dropped as correlated with w".into(),
            ));
        }
        work = work.with_columns(&keep);
    }
    if opts.standardize {
        work.data = standardize(&work.data)?.0;
    }
    let config = AlgorithmConfig {
        scheme: match opts.scheme {
            Scheme::A => InitScheme::Median,
            Scheme::B => InitScheme::Quartiles,
        },
        k_folds: opts.k_folds,
        mu: opts.mu.map_or(MuSelection::Bic, MuSelection::Fixed),
        seed: opts.seed,
        ..AlgorithmConfig::default()
    };
    let fit = run_algorithm1_timed(&work.data, &config, clock.unwrap_or(&NoClock))?;
    let tau_hat = fitted_threshold(&fit);
    let names = &work.predictors;
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        n: work.data.n(),
        p: work.data.p(),
        scheme: opts.scheme,
        seed: opts.seed,
        standardized: opts.standardize,
        no_change: tau_hat.is_none(),
        tau_hat,
        tau_hat_quantile: tau_hat.map(|t| work.data.w_ecdf(t)),
        tau_initial: fit.initializer_used,
        beta: tau_hat.map(|_| nonzero(names, &fit.coefficients.beta)),
        gamma: nonzero(names, &fit.coefficients.gamma),
        lambda1: Penalties {
            beta: fit.lambda1.beta,
            gamma: fit.lambda1.gamma,
        },
        lambda2: Penalties {
            beta: fit.lambda2.beta,
            gamma: fit.lambda2.gamma,
        },
        mu: fit.mu,
        converged: fit.diagnostics.all_converged,
        timings: clock.map(|_| {
            let [a, b, c] = fit.wall_time_step;
            Timings {
                step0: a,
                step1: b,
                step2: c,
                total: a + b + c,
            }
        }),
        dropped_columns: dropped,
    })
}
