use hdcp::csv_io::{default_names, NamedDataset};
use hdcp::{fit_dataset, FitOptions, Scheme, WallClock};
use hdcp_core::{generate_dataset, Method, SimulationConfig};
use serde_json::Value;

fn schema() -> Value {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schemas/fit_report.schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn report(tau0: Option<f64>, opts: &FitOptions, timed: bool) -> Value {
    let mut c = SimulationConfig::new(120, 8, tau0, Method::Algo1A);
    c.base_seed = 3;
    let named = NamedDataset {
        data: generate_dataset(&c, 0).unwrap().0,
        predictors: default_names(8),
    };
    let clock = WallClock::new();
    let r = fit_dataset(&named, opts, timed.then_some(&clock as _)).unwrap();
    serde_json::from_str(&r.to_json()).unwrap()
}

#[test]
fn reports_validate_against_the_published_schema() {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let change = report(Some(0.4), &FitOptions::default(), true);
    let none = report(None, &FitOptions { mu: Some(10.0), ..FitOptions::default() }, false);
    let b = report(Some(0.7), &FitOptions { scheme: Scheme::B, standardize: true, drop_correlated: Some(0.5), ..FitOptions::default() }, false);
    assert_eq!(change["no_change"], false);
    assert_eq!(none["no_change"], true);
    for r in [&change, &none, &b] {
        let errors: Vec<String> = validator.iter_errors(r).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{errors:?}");
    }
}

#[test]
fn schema_rejects_malformed_reports() {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let good = report(Some(0.4), &FitOptions::default(), false);
    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("lambda1");
    let mut extra = good.clone();
    extra["surprise"] = Value::from(1);
    let mut inconsistent = good.clone();
    inconsistent["no_change"] = Value::from(true);
    let mut version = good.clone();
    version["schema_version"] = Value::from(2);
    for bad in [missing, extra, inconsistent, version] {
        assert!(!validator.is_valid(&bad));
    }
}
