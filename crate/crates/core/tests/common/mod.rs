//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use mape_regress::bounds::{BoundParams, ShatterInstance, ShatterPoint};
use mape_regress::{Dataset, LinearModel, QuantileLevel, WeightVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct OracleRow {
    pub params: BoundParams,
    pub covering: f64,
    pub deviation: f64,
    pub rate: f64,
    pub log_covering: f64,
    pub log_deviation_uncapped: f64,
    pub log_rate: f64,
}

pub fn load_oracle() -> Vec<OracleRow> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/bounds_oracle.csv");
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let f = |i: usize| rec[i].parse::<f64>().unwrap();
            OracleRow {
                params: BoundParams::new(
                    f(0),
                    f(1),
                    rec[2].parse().unwrap(),
                    rec[3].parse().unwrap(),
                    rec[4].parse().unwrap(),
                    f(5),
                )
                .unwrap(),
                covering: f(6),
                deviation: f(7),
                rate: f(8),
                log_covering: f(9),
                log_deviation_uncapped: f(10),
                log_rate: f(11),
            }
        })
        .collect()
}

pub struct Instance {
    pub data: Dataset,
    pub w: WeightVector,
    pub tau: QuantileLevel,
    pub with_intercept: bool,
}

/// Random MAPE instance: `w = 1/|y|`, `tau = 1/2`, all targets positive.
pub fn random_mape_instance(rng: &mut ChaCha8Rng, max_n: usize, max_d: usize) -> Instance {
    let d = rng.random_range(0..=max_d);
    let with_intercept = d == 0 || rng.random_bool(0.7);
    let p = d + with_intercept as usize;
    let n = rng.random_range(p.max(1) + 1..=max_n);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..4.0)).collect())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| (0.5 + r.iter().sum::<f64>() * 0.6) * rng.random_range(0.3f64..3.0))
        .collect();
    let w = WeightVector::inverse_abs(&y).unwrap();
    Instance {
        data: Dataset::from_rows(&rows, y).unwrap(),
        w,
        tau: QuantileLevel::MEDIAN,
        with_intercept,
    }
}

/// Up to 6 points and 64 models; targets bounded away from zero.
pub fn random_shatter_instance(rng: &mut ChaCha8Rng) -> ShatterInstance {
    let d = rng.random_range(1..=2);
    let k = rng.random_range(1..=6);
    let m = rng.random_range(1..=64);
    let points = (0..k)
        .map(|_| {
            let mag = rng.random_range(0.1..10.0);
            ShatterPoint {
                x: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                y: if rng.random_bool(0.5) { mag } else { -mag },
                t: rng.random_range(0.01..2.0),
            }
        })
        .collect();
    let models = (0..m)
        .map(|_| {
            let beta = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            let intercept = rng.random_bool(0.7).then(|| rng.random_range(-5.0..5.0));
            let model = LinearModel::new(beta, intercept);
            if rng.random_bool(0.2) {
                model.with_clamp(rng.random_range(0.5..5.0))
            } else {
                model
            }
        })
        .collect();
    ShatterInstance { points, models }
}
