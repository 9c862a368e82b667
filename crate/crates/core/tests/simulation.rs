mod common;

use hdcp_core::grid_search::grid_candidates;
use hdcp_core::simulation::{
    aggregate, ar1_covariance, cholesky, run_monte_carlo, AdjustedTau, ReplicateEstimate,
};
use hdcp_core::stats::empirical_quantile_sorted;
use hdcp_core::{
    apply_boundary_rule, compute_metrics, generate_dataset, run_algorithm1, run_full_grid, run_replicate,
    AlgorithmConfig, GridConfig, InitScheme, Method, MuSelection, NoClock, RegressionPair, SimulationConfig, Truth,
};
use proptest::prelude::*;

#[test]
fn generated_design_has_ar1_covariance() {
    // one n = 2000 draw has an expected Frobenius error of about 0.127, so the
    // 0.15 bound is applied to the average over ten independent draws
    let mut c = SimulationConfig::new(2000, 5, Some(0.3), Method::Algo1A);
    c.base_seed = 17;
    let sigma = ar1_covariance(5, 0.5);
    let mut total = 0.0;
    for index in 0..10 {
        let (data, _) = generate_dataset(&c, index).unwrap();
        let n = data.n() as f64;
        let mut frob = 0.0;
        for a in 0..5 {
            for b in 0..5 {
                let s: f64 = data.x().col(a).iter().zip(data.x().col(b)).map(|(u, v)| u * v).sum::<f64>() / n;
                frob += (s - sigma.get(a, b)).powi(2);
            }
        }
        total += frob.sqrt();
    }
    assert!(total / 10.0 <= 0.15, "{}", total / 10.0);
    let (data, _) = generate_dataset(&c, 0).unwrap();
    let n = data.n() as f64;
    let w = data.w();
    assert!(w.iter().all(|&v| (0.0..1.0).contains(&v)));
    let mean_w = w.iter().sum::<f64>() / n;
    assert!((mean_w - 0.5).abs() < 0.03);
}

#[test]
fn cholesky_reproduces_covariance() {
    let s = ar1_covariance(6, 0.7);
    let l = cholesky(&s).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let v: f64 = (0..6).map(|k| l.get(i, k) * l.get(j, k)).sum();
            assert!((v - s.get(i, j)).abs() < 1e-12);
        }
        for j in i + 1..6 {
            assert_eq!(l.get(i, j), 0.0);
        }
    }
}

#[test]
fn noise_free_response_follows_the_regimes() {
    let mut c = SimulationConfig::new(300, 10, Some(0.4), Method::Algo1A);
    c.sigma_eps = 0.0;
    let (data, truth) = generate_dataset(&c, 2).unwrap();
    for i in 0..data.n() {
        let coef = if data.w()[i] <= 0.4 { &truth.beta0 } else { &truth.gamma0 };
        assert!((data.y()[i] - data.x().row_dot(i, coef)).abs() < 1e-12);
    }
}

#[test]
fn replicates_are_deterministic_and_independent() {
    let c = SimulationConfig::new(60, 4, Some(0.5), Method::Algo1A);
    let (a, _) = generate_dataset(&c, 3).unwrap();
    let (b, _) = generate_dataset(&c, 3).unwrap();
    let (d, _) = generate_dataset(&c, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.y(), d.y());
    let r1 = run_replicate(&c, 3, &NoClock).unwrap();
    let r2 = run_replicate(&c, 3, &NoClock).unwrap();
    assert_eq!(r1, r2);
    let mut other = c.clone();
    other.base_seed = 1;
    assert_ne!(generate_dataset(&other, 3).unwrap().0.y(), a.y());
}

#[test]
fn noise_free_recovery() {
    let mut hits = 0;
    for index in 0..20 {
        let mut c = SimulationConfig::new(200, 10, Some(0.4), Method::Algo1A);
        c.sigma_eps = 0.0;
        c.base_seed = 5;
        let out = run_replicate(&c, index, &NoClock).unwrap();
        let tau = out.adjusted.tau.value().unwrap();
        hits += usize::from((tau - 0.4).abs() <= 0.02);
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn quartile_scheme_prefers_the_lower_quartile_for_an_early_change() {
    let mut picks = 0;
    for index in 0..20 {
        let mut c = SimulationConfig::new(250, 25, Some(0.169), Method::Algo1B);
        c.base_seed = 11;
        let (data, _) = generate_dataset(&c, index).unwrap();
        let cfg = AlgorithmConfig {
            scheme: InitScheme::Quartiles,
            seed: index as u64,
            ..AlgorithmConfig::default()
        };
        let fit = run_algorithm1(&data, &cfg).unwrap();
        let q25 = empirical_quantile_sorted(&data.sorted_w(), 0.25);
        picks += usize::from(fit.initializer_used == q25);
        assert_eq!(fit.diagnostics.initializer_losses.len(), 3);
    }
    assert!(picks > 10, "{picks}/20");
}

#[test]
fn solve_counters() {
    let c = SimulationConfig::new(120, 8, Some(0.3), Method::Algo1A);
    let (data, _) = generate_dataset(&c, 0).unwrap();
    let fixed = AlgorithmConfig {
        mu: MuSelection::Fixed(0.05),
        ..AlgorithmConfig::default()
    };
    let fit = run_algorithm1(&data, &fixed).unwrap();
    assert_eq!(fit.diagnostics.cv_pair_fits, 2);
    assert_eq!(fit.diagnostics.bic_refits, 0);
    let b = AlgorithmConfig {
        scheme: InitScheme::Quartiles,
        ..fixed
    };
    assert_eq!(run_algorithm1(&data, &b).unwrap().diagnostics.cv_pair_fits, 4);
    let grid = run_full_grid(&data, &GridConfig::default()).unwrap();
    assert_eq!(grid.solves, grid_candidates(&data, (0.1, 0.9)).len());
    assert_eq!(grid.curve.len(), grid.solves);
}

#[test]
fn single_replicate_table_equals_its_errors() {
    let mut c = SimulationConfig::new(80, 6, Some(0.35), Method::Algo1A);
    c.replications = 1;
    let (row, outs) = run_monte_carlo(&c, &NoClock).unwrap();
    let o = &outs[0];
    let tau = o.adjusted.tau.value().unwrap();
    assert!((row.bias_tau.unwrap() - (tau - 0.35).abs()).abs() < 1e-15);
    assert!((row.mse_tau.unwrap() - (tau - 0.35).powi(2)).abs() < 1e-15);
    let err: f64 = o.adjusted.pair.beta.iter().zip(&c.beta0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!((row.bias_beta - err).abs() < 1e-12);
    // failed replicates are counted, not dropped
    let results = vec![Ok(o.clone()), Err("boom".to_string())];
    let (row2, failed) = aggregate(&c, &results).unwrap();
    assert_eq!((row2.used, row2.excluded), (1, 1));
    assert_eq!(failed, vec![(1, "boom".to_string())]);
}

fn estimate_strategy(p: usize) -> impl Strategy<Value = ReplicateEstimate> {
    (
        proptest::option::of(0.0f64..1.0),
        proptest::collection::vec(-3.0f64..3.0, p),
        proptest::collection::vec(-3.0f64..3.0, p),
    )
        .prop_map(|(tau, beta, gamma)| {
            ReplicateEstimate::from_estimate(
                &match tau {
                    None => hdcp_core::ChangePointEstimate::NoChange,
                    Some(t) => hdcp_core::ChangePointEstimate::Finite {
                        threshold: t,
                        grid_index: 0,
                    },
                },
                RegressionPair { beta, gamma },
            )
        })
}

proptest! {
    #[test]
    fn boundary_rule_is_idempotent(e in estimate_strategy(4), tau0 in 0.01f64..0.99) {
        let once = apply_boundary_rule(&e, tau0);
        prop_assert_eq!(apply_boundary_rule(&once, tau0), once.clone());
        prop_assert!(once.tau.value().is_some());
        if e.tau == AdjustedTau::NoChange {
            prop_assert_eq!(once.detected_no_change, true);
        }
    }

    #[test]
    fn metrics_are_nonnegative(es in proptest::collection::vec(estimate_strategy(3), 1..12), tau0 in proptest::option::of(0.05f64..0.95)) {
        let truth = Truth { beta0: vec![1.0, 0.0, 0.5], gamma0: vec![0.0, 1.0, 0.0], tau0 };
        let prepared: Vec<(ReplicateEstimate, f64)> = es
            .iter()
            .map(|e| (match tau0 { Some(t) => apply_boundary_rule(e, t), None => e.clone() }, 0.0))
            .collect();
        let row = compute_metrics(&prepared, &truth).unwrap();
        for v in [row.bias_beta, row.bias_gamma, row.mse_beta, row.mse_gamma] {
            prop_assert!(v >= 0.0);
        }
        for v in [row.bias_tau, row.mse_tau, row.mse_phi_tau].into_iter().flatten() {
            prop_assert!(v >= 0.0);
        }
        if let Some(prm) = row.prm {
            prop_assert!((0.0..=1.0).contains(&prm));
        }
        prop_assert_eq!(row.prm.is_some(), tau0.is_none());
    }
}
