//! Bound chain against the 50-digit reference table in `tests/data`.
//! Regenerate the table with `tests/oracle/bounds_oracle.py`.

mod common;

use common::load_oracle;
use mape_regress::bounds::{
    consistency_rate, covering_bound, deviation_bound, deviation_bound_composed, log_consistency_rate,
    required_sample_size, BoundParams,
};

fn close_log(got: f64, want: f64) -> bool {
    (got - want).abs() <= 1e-12 * want.abs().max(1.0)
}

// Values that f64 can hold as normals are compared directly.
fn close_value(got: f64, want: f64) -> bool {
    if !(want.is_normal() && want.abs() < 1e300 && want.abs() > 1e-300) {
        return true;
    }
    (got - want).abs() <= 1e-12 * want.abs()
}

#[test]
fn oracle_table_has_100_points() {
    assert_eq!(load_oracle().len(), 100);
}

#[test]
fn covering_matches_oracle() {
    for (i, row) in load_oracle().iter().enumerate() {
        let c = covering_bound(&row.params).unwrap();
        assert!(close_log(c.log_value, row.log_covering), "row {i}: {} vs {}", c.log_value, row.log_covering);
        assert!(close_value(c.value, row.covering), "row {i}: {} vs {}", c.value, row.covering);
    }
}

#[test]
fn deviation_matches_oracle() {
    for (i, row) in load_oracle().iter().enumerate() {
        let d = deviation_bound_composed(&row.params).unwrap();
        assert!(
            close_log(d.log_uncapped, row.log_deviation_uncapped),
            "row {i}: {} vs {}",
            d.log_uncapped,
            row.log_deviation_uncapped
        );
        assert!(close_value(d.value, row.deviation), "row {i}: {} vs {}", d.value, row.deviation);
        assert!((0.0..=1.0).contains(&d.value));
    }
}

#[test]
fn two_step_deviation_agrees_with_composed() {
    for row in load_oracle() {
        let mut p8 = row.params;
        p8.eps /= 8.0;
        let cov = covering_bound(&p8).unwrap();
        if !cov.value.is_finite() {
            continue;
        }
        let two_step = deviation_bound(&row.params, cov.value).unwrap();
        let composed = deviation_bound_composed(&row.params).unwrap().value;
        assert!((two_step - composed).abs() <= 1e-12 * composed.max(1e-300), "{two_step} vs {composed}");
    }
}

#[test]
fn rate_matches_oracle() {
    for (i, row) in load_oracle().iter().enumerate() {
        let p = &row.params;
        let b = p.envelope();
        let log_k = log_consistency_rate(p.n, p.eps, b, p.vc_dim as f64).unwrap();
        assert!(close_log(log_k, row.log_rate), "row {i}: {log_k} vs {}", row.log_rate);
        let k = consistency_rate(p.n, p.eps, b, p.vc_dim as f64).unwrap();
        assert!(close_value(k, row.rate), "row {i}: {k} vs {}", row.rate);
    }
}

#[test]
fn pinned_constants() {
    let k = consistency_rate(100_000, 0.5, 2.0, 3.0).unwrap();
    assert!((k - 1.355_477_319_618_472_3e-11).abs() <= 1e-12 * k);
    let c = covering_bound(&BoundParams::from_envelope(2.0, 1, 2, 1, 0.2).unwrap()).unwrap();
    assert!((c.value - 171_755.993_817_075_23).abs() <= 1e-12 * c.value);
    let d = deviation_bound_composed(&BoundParams::from_envelope(2.0, 1, 2, 1_000_000, 0.8).unwrap()).unwrap();
    assert!((d.log_uncapped - -1_234.187_925_231_29).abs() <= 1e-12 * 1234.2);
    assert_eq!(d.value, 0.0);
    assert_eq!(required_sample_size(0.5, 0.05, 2.0, 3.0).unwrap(), 54886);
}

#[test]
fn deviation_at_p1_equals_rate() {
    for row in load_oracle().iter().filter(|r| r.params.p == 1) {
        let p = &row.params;
        let d = deviation_bound_composed(p).unwrap();
        let log_k = log_consistency_rate(p.n, p.eps, p.envelope(), p.vc_dim as f64).unwrap();
        assert!(close_log(d.log_uncapped, log_k), "{} vs {log_k}", d.log_uncapped);
    }
}
