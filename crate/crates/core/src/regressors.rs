//! MAPE, MAE and MSE linear regression.
//!
//! MAPE fitting is weighted median regression with weights `1/|y_i|`; MAE
//! fitting is the unit-weight case. Both go through [`fit_weighted_quantile`]
//! at `tau = 0.5`. MSE uses a QR least-squares solve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{augmented_design, least_squares_qr};
use crate::losses::{empirical_risk, Dataset, LossKind, LossValue};
use crate::wl1solver::{
    fit_weighted_quantile, LinearModel, QuantileLevel, SolverConfig, SolverReport, WeightVector,
};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub loss: LossKind,
    pub with_intercept: bool,
    /// Rows with `|y| < lambda_screen` are dropped before fitting.
    pub lambda_screen: Option<f64>,
    /// Prediction clamp `B_G`, applied only when predicting.
    pub clamp: Option<f64>,
    pub solver: SolverConfig,
}

impl FitConfig {
    pub fn new(loss: LossKind) -> Self {
        FitConfig {
            loss,
            with_intercept: true,
            lambda_screen: None,
            clamp: None,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda_screen {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("lambda_screen must be >= 0, got {l}")));
            }
        }
        if let Some(c) = self.clamp {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("clamp must be > 0, got {c}")));
            }
        }
        self.solver.validate()
    }
}

/// Empirical risk of one model under every loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTriple {
    pub mse: LossValue,
    pub mae: LossValue,
    pub mape: LossValue,
}

impl RiskTriple {
    pub fn get(&self, kind: LossKind) -> LossValue {
        match kind {
            LossKind::Mse => self.mse,
            LossKind::Mae => self.mae,
            LossKind::Mape => self.mape,
        }
    }
}

/// Summary of a fit.
///
/// `objective` is the minimized criterion: the weighted pinball sum at
/// `tau = 0.5` (half the summed absolute or relative error) for MAE/MAPE,
/// the residual sum of squares for MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub loss: LossKind,
    pub objective: f64,
    pub empirical_risk: RiskTriple,
    pub n_samples: usize,
    pub rows_rejected: usize,
    pub solver: Option<SolverReport>,
}

/// A fitted model together with the settings needed to re-evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelFile", into = "ModelFile")]
pub struct FittedModel {
    pub loss: LossKind,
    pub model: LinearModel,
    pub lambda_screen: Option<f64>,
}

// On-disk layout of a model.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    loss: LossKind,
    beta: Vec<f64>,
    intercept: Option<f64>,
    clamp: Option<f64>,
    lambda_screen: Option<f64>,
}

impl From<ModelFile> for FittedModel {
    fn from(f: ModelFile) -> Self {
        FittedModel {
            loss: f.loss,
            model: LinearModel {
                beta: f.beta,
                intercept: f.intercept,
                clamp: f.clamp,
            },
            lambda_screen: f.lambda_screen,
        }
    }
}

impl From<FittedModel> for ModelFile {
    fn from(m: FittedModel) -> Self {
        ModelFile {
            loss: m.loss,
            beta: m.model.beta,
            intercept: m.model.intercept,
            clamp: m.model.clamp,
            lambda_screen: m.lambda_screen,
        }
    }
}

impl FittedModel {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let Some(l) = self.lambda_screen {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("lambda_screen must be >= 0, got {l}")));
            }
        }
        Ok(())
    }

    /// Applies the model's screening, then [`evaluate`].
    pub fn evaluate(&self, data: &Dataset, kind: LossKind) -> Result<LossValue> {
        let (screened, _) = screen(data, self.lambda_screen)?;
        evaluate(&self.model, &screened, kind)
    }
}

/// Drops rows with `|y| < lambda`; returns the kept data and original row
/// indices.
pub fn screen(data: &Dataset, lambda: Option<f64>) -> Result<(Dataset, Vec<usize>)> {
    match lambda {
        None => Ok((data.clone(), (0..data.n_samples()).collect())),
        Some(l) => {
            let keep: Vec<usize> = (0..data.n_samples())
                .filter(|&i| data.y()[i].abs() >= l)
                .collect();
            if keep.is_empty() {
                return Err(Error::Data(format!(
                    "every row has |y| < {l}; nothing left after screening"
                )));
            }
            if keep.len() == data.n_samples() {
                return Ok((data.clone(), keep));
            }
            let kept = data.select_rows(|i| data.y()[i].abs() >= l)?;
            Ok((kept, keep))
        }
    }
}

pub fn fit(data: &Dataset, config: &FitConfig) -> Result<(FittedModel, FitReport)> {
    config.validate()?;
    let (train, rows) = screen(data, config.lambda_screen)?;
    let rows_rejected = data.n_samples() - train.n_samples();

    let (mut model, objective, solver) = match config.loss {
        LossKind::Mape => {
            let w = WeightVector::inverse_abs(train.y()).map_err(|e| match e {
                Error::ZeroTarget { row } => Error::ZeroTarget { row: rows[row] },
                other => other,
            })?;
            let (m, rep) = fit_weighted_quantile(&train, &w, QuantileLevel::MEDIAN, &config.solver, config.with_intercept)?;
            (m, rep.objective, Some(rep))
        }
        LossKind::Mae => {
            let w = WeightVector::ones(train.n_samples());
            let (m, rep) = fit_weighted_quantile(&train, &w, QuantileLevel::MEDIAN, &config.solver, config.with_intercept)?;
            (m, rep.objective, Some(rep))
        }
        LossKind::Mse => {
            let (m, rss) = fit_least_squares(&train, config.with_intercept)?;
            (m, rss, None)
        }
    };
    model.clamp = config.clamp;

    let empirical_risk = RiskTriple {
        mse: evaluate(&model, &train, LossKind::Mse)?,
        mae: evaluate(&model, &train, LossKind::Mae)?,
        mape: evaluate(&model, &train, LossKind::Mape)?,
    };
    let fitted = FittedModel {
        loss: config.loss,
        model,
        lambda_screen: config.lambda_screen,
    };
    let report = FitReport {
        loss: config.loss,
        objective,
        empirical_risk,
        n_samples: train.n_samples(),
        rows_rejected,
        solver,
    };
    Ok((fitted, report))
}

fn fit_least_squares(data: &Dataset, with_intercept: bool) -> Result<(LinearModel, f64)> {
    let a = augmented_design(data.x(), with_intercept);
    if a.ncols() == 0 {
        return Err(Error::invalid("model has no coefficients to fit"));
    }
    let y = DVector::from_column_slice(data.y());
    let coef = least_squares_qr(&a, &y)?;
    let model = if with_intercept {
        LinearModel::new(coef.as_slice()[1..].to_vec(), Some(coef[0]))
    } else {
        LinearModel::new(coef.as_slice().to_vec(), None)
    };
    let rss = model
        .linear_predictions(data.x())
        .iter()
        .zip(data.y())
        .map(|(p, t)| (t - p) * (t - p))
        .sum();
    Ok((model, rss))
}

/// `X beta (+ intercept)`, truncated into `[-B_G, B_G]` when the model has a
/// clamp.
pub fn predict(model: &LinearModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if model.beta.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "model coefficients vs features",
            expected: x.ncols(),
            got: model.beta.len(),
        });
    }
    Ok(model
        .linear_predictions(x)
        .into_iter()
        .map(|v| model.apply_clamp(v))
        .collect())
}

pub fn evaluate(model: &LinearModel, data: &Dataset, kind: LossKind) -> Result<LossValue> {
    let pred = predict(model, data.x())?;
    empirical_risk(kind, &pred, data.y())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept_data() -> Dataset {
        Dataset::intercept_only(vec![1.0, 2.0, 4.0]).unwrap()
    }

    #[test]
    fn intercept_only_minimizers() {
        let d = intercept_data();
        let (m, r) = fit(&d, &FitConfig::new(LossKind::Mape)).unwrap();
        assert_eq!(m.model.intercept, Some(1.0));
        assert!((r.empirical_risk.mape.value() - 1.25 / 3.0).abs() < 1e-15);
        let (m, _) = fit(&d, &FitConfig::new(LossKind::Mae)).unwrap();
        assert_eq!(m.model.intercept, Some(2.0));
        let (m, _) = fit(&d, &FitConfig::new(LossKind::Mse)).unwrap();
        assert!((m.model.intercept.unwrap() - 7.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn interpolable_data_shared_optimum() {
        let xs = [1.0, 2.0, 3.0, 5.0, 8.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let d = Dataset::from_rows(&rows, xs.iter().map(|x| 0.5 + 2.0 * x).collect()).unwrap();
        for loss in LossKind::ALL {
            let (m, r) = fit(&d, &FitConfig::new(loss)).unwrap();
            assert!((m.model.beta[0] - 2.0).abs() < 1e-12, "{loss}");
            assert!((m.model.intercept.unwrap() - 0.5).abs() < 1e-12, "{loss}");
            assert!(r.empirical_risk.get(loss).value() < 1e-12);
        }
    }

    #[test]
    fn predict_examples() {
        let x = DMatrix::from_row_slice(1, 1, &[3.0]);
        let m = LinearModel::new(vec![2.0], Some(1.0));
        assert_eq!(predict(&m, &x).unwrap(), vec![7.0]);
        assert_eq!(predict(&m.clone().with_clamp(5.0), &x).unwrap(), vec![5.0]);
        assert_eq!(predict(&m.clone().with_clamp(100.0), &x).unwrap(), vec![7.0]);
        let neg = DMatrix::from_row_slice(1, 1, &[-30.0]);
        assert_eq!(predict(&m.clone().with_clamp(5.0), &neg).unwrap(), vec![-5.0]);
        assert!(predict(&m, &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let d = intercept_data();
        let r = evaluate(&LinearModel::constant(1.0), &d, LossKind::Mape).unwrap();
        assert!((r.value() - 1.25 / 3.0).abs() < 1e-15);
        let z = Dataset::intercept_only(vec![0.0, 1.0]).unwrap();
        assert!(evaluate(&LinearModel::constant(1.0), &z, LossKind::Mape).unwrap().is_infinite());
        // prediction 0 at a zero target costs 1 by convention
        let r = evaluate(&LinearModel::constant(0.0), &z, LossKind::Mape).unwrap();
        assert_eq!(r.value(), 1.0);
    }

    #[test]
    fn zero_target_names_original_row() {
        let d = Dataset::intercept_only(vec![3.0, 0.01, 0.0, 5.0]).unwrap();
        match fit(&d, &FitConfig::new(LossKind::Mape)) {
            Err(Error::ZeroTarget { row }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        let mut cfg = FitConfig::new(LossKind::Mape);
        cfg.lambda_screen = Some(0.0);
        assert!(matches!(fit(&d, &cfg), Err(Error::ZeroTarget { row: 2 })));
        cfg.lambda_screen = Some(0.1);
        let (m, r) = fit(&d, &cfg).unwrap();
        assert_eq!(r.rows_rejected, 2);
        assert_eq!(r.n_samples, 2);
        assert_eq!(m.lambda_screen, Some(0.1));
        // MAE tolerates zero targets
        assert!(fit(&d, &FitConfig::new(LossKind::Mae)).is_ok());
    }

    #[test]
    fn screening_everything_is_an_error() {
        let d = intercept_data();
        let mut cfg = FitConfig::new(LossKind::Mape);
        cfg.lambda_screen = Some(10.0);
        assert!(matches!(fit(&d, &cfg), Err(Error::Data(_))));
        cfg.lambda_screen = Some(-1.0);
        assert!(matches!(fit(&d, &cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_design_reported() {
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![4.0, 4.0]];
        let d = Dataset::from_rows(&rows, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        for loss in LossKind::ALL {
            assert!(matches!(fit(&d, &FitConfig::new(loss)), Err(Error::DegenerateDesign { .. })));
        }
    }

    #[test]
    fn model_json_schema() {
        let m = FittedModel {
            loss: LossKind::Mape,
            model: LinearModel::new(vec![0.1, -2.5], Some(1.0 / 3.0)).with_clamp(4.0),
            lambda_screen: None,
        };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"loss":"mape","beta":[0.1,-2.5],"intercept":0.3333333333333333,"clamp":4.0,"lambda_screen":null}"#
        );
        let back: FittedModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<FittedModel>(r#"{"loss":"mape","beta":[],"intercept":null,"clamp":null,"lambda_screen":null,"x":1}"#).is_err());
    }
}
