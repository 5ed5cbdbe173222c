use mape_regress::losses::{empirical_risk, pointwise_loss};
use mape_regress::regressors::{evaluate, fit, screen};
use mape_regress::wl1solver::{objective, weighted_median};
use mape_regress::{Dataset, FitConfig, LinearModel, LossKind, QuantileLevel, WeightVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(rng: &mut ChaCha8Rng, max_n: usize, d: usize) -> Dataset {
    let n = rng.random_range(d + 2..=max_n);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| {
            let v = 2.0 + r.iter().sum::<f64>() + rng.random_range(-1.5..1.5);
            if rng.random_bool(0.2) { -v } else { v }
        })
        .map(|v: f64| if v.abs() < 0.05 { 0.5 } else { v })
        .collect();
    Dataset::from_rows(&rows, y).unwrap()
}

#[test]
fn reduction_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let d = rng.random_range(0..=2);
        let data = random_data(&mut rng, 30, d);
        let (m, rep) = fit(&data, &FitConfig::new(LossKind::Mape)).unwrap();
        let risk = evaluate(&m.model, &data, LossKind::Mape).unwrap().value();
        let half_sum = 0.5 * data.n_samples() as f64 * risk;
        assert!((rep.objective - half_sum).abs() <= 1e-9 * half_sum.max(1e-300));
        assert_eq!(rep.empirical_risk.mape.value(), risk);
    }
}

#[test]
fn each_fit_dominates_under_its_own_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let d = rng.random_range(0..=2);
        let data = random_data(&mut rng, 30, d);
        let reports: Vec<_> = LossKind::ALL
            .iter()
            .map(|&k| fit(&data, &FitConfig::new(k)).unwrap().1)
            .collect();
        for (i, own) in LossKind::ALL.iter().enumerate() {
            let mine = reports[i].empirical_risk.get(*own).value();
            for other in &reports {
                let theirs = other.empirical_risk.get(*own).value();
                assert!(mine <= theirs + 1e-9 * (1.0 + theirs), "{own}: {mine} > {theirs}");
            }
        }
    }
}

#[test]
fn mape_fit_is_locally_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let data = random_data(&mut rng, 25, 2);
        let (m, _) = fit(&data, &FitConfig::new(LossKind::Mape)).unwrap();
        let base = evaluate(&m.model, &data, LossKind::Mape).unwrap().value();
        let mut coefs = m.model.beta.clone();
        coefs.push(m.model.intercept.unwrap());
        for j in 0..coefs.len() {
            for h in [-1e-4, 1e-4] {
                let mut c = coefs.clone();
                c[j] += h;
                let intercept = c.pop();
                let moved = LinearModel::new(c, intercept);
                let r = evaluate(&moved, &data, LossKind::Mape).unwrap().value();
                assert!(r >= base - 1e-12, "{r} < {base}");
            }
        }
    }
}

#[test]
fn zero_screen_is_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..50 {
        let data = random_data(&mut rng, 20, 1);
        let (kept, rows) = screen(&data, Some(0.0)).unwrap();
        assert_eq!(kept, data);
        assert_eq!(rows.len(), data.n_samples());
        let plain = fit(&data, &FitConfig::new(LossKind::Mape)).unwrap();
        let cfg = FitConfig {
            lambda_screen: Some(0.0),
            ..FitConfig::new(LossKind::Mape)
        };
        let screened = fit(&data, &cfg).unwrap();
        assert_eq!(plain.0.model, screened.0.model);
        assert_eq!(plain.1.objective.to_bits(), screened.1.objective.to_bits());
        assert_eq!(screened.1.rows_rejected, 0);
    }
}

#[test]
fn screening_drops_small_targets() {
    let data = Dataset::intercept_only(vec![0.0, 0.01, 1.0, 2.0, 4.0]).unwrap();
    let cfg = FitConfig {
        lambda_screen: Some(0.5),
        ..FitConfig::new(LossKind::Mape)
    };
    let (m, rep) = fit(&data, &cfg).unwrap();
    assert_eq!(rep.rows_rejected, 2);
    assert_eq!(rep.n_samples, 3);
    assert_eq!(m.model.intercept, Some(1.0));
}

#[test]
fn small_target_pull() {
    let data = Dataset::intercept_only(vec![1.0, 2.0, 4.0]).unwrap();
    let c = |k| fit(&data, &FitConfig::new(k)).unwrap().0.model.intercept.unwrap();
    let (mape, mae, mse) = (c(LossKind::Mape), c(LossKind::Mae), c(LossKind::Mse));
    assert_eq!(mape, 1.0);
    assert_eq!(mae, 2.0);
    assert!((mse - 7.0 / 3.0).abs() < 1e-12);
    assert!(mape <= mae && mae <= mse);
}

#[test]
fn clamp_bounds_predictions_and_mape_envelope() {
    let data = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![1.0, 5.0, 9.0, 13.0]).unwrap();
    let cfg = FitConfig {
        clamp: Some(6.0),
        ..FitConfig::new(LossKind::Mape)
    };
    let (m, rep) = fit(&data, &cfg).unwrap();
    assert_eq!(m.model.clamp, Some(6.0));
    // the clamp is applied after fitting, so rows above it now carry error
    let expected = ((9.0 - 6.0) / 9.0 + (13.0 - 6.0) / 13.0) / 4.0;
    assert!((rep.empirical_risk.mape.value() - expected).abs() < 1e-12);
    // |p - y| / |y| <= 1 + B_G / lambda with lambda = min |y| = 1
    for &y in data.y() {
        assert!(pointwise_loss(LossKind::Mape, 6.0, y).value() <= 1.0 + 6.0);
    }
}

proptest! {
    #[test]
    fn constant_risk_matches_weighted_objective(
        y in proptest::collection::vec((0.01f64..100.0, any::<bool>()), 1..30),
        c in -50.0f64..50.0,
    ) {
        let y: Vec<f64> = y.into_iter().map(|(v, neg)| if neg { -v } else { v }).collect();
        let data = Dataset::intercept_only(y.clone()).unwrap();
        let w = WeightVector::inverse_abs(&y).unwrap();
        let model = LinearModel::constant(c);
        let obj = objective(&data, &w, QuantileLevel::MEDIAN, &model).unwrap();
        let preds = vec![c; y.len()];
        let risk = empirical_risk(LossKind::Mape, &preds, &y).unwrap().value();
        // pinball at tau = 1/2 is half the absolute loss
        prop_assert!((2.0 * obj / y.len() as f64 - risk).abs() <= 1e-12 * (1.0 + risk));
    }

    #[test]
    fn mape_constant_is_weighted_median(
        y in proptest::collection::vec((0.01f64..100.0, any::<bool>()), 1..50),
    ) {
        let y: Vec<f64> = y.into_iter().map(|(v, neg)| if neg { -v } else { v }).collect();
        let data = Dataset::intercept_only(y.clone()).unwrap();
        let (m, _) = fit(&data, &FitConfig::new(LossKind::Mape)).unwrap();
        let w = WeightVector::inverse_abs(&y).unwrap();
        prop_assert_eq!(m.model.intercept.unwrap(), weighted_median(&y, &w).unwrap());
    }
}
