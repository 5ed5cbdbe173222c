//! Linear regression under the Mean Absolute Percentage Error.
//!
//! Minimizing the empirical MAPE of a linear model is the same problem as
//! weighted median (L1) regression with weights `1/|y_i|`. This crate
//! solves that problem exactly with a bounded-variable simplex on the
//! quantile-regression dual, and ships the pieces needed to study
//! empirical risk minimization under the MAPE:
//!
//! - [`losses`]: pointwise losses with the `a/0 = inf`, `0/0 = 1`
//!   conventions and empirical risk.
//! - [`wl1solver`]: weighted quantile regression (exact simplex, IRLS,
//!   and a vertex-enumeration oracle).
//! - [`regressors`]: MAPE / MAE / MSE fitting, prediction and evaluation.
//! - [`bounds`]: covering-number, uniform-deviation and rate bounds, growth
//!   schedules and a desk-scale shattering checker.
//! - [`harness`]: seeded synthetic data and Monte-Carlo experiments.
//! - [`io`]: CSV datasets, model JSON and number formatting.
//!
//! ```
//! use mape_regress::losses::Dataset;
//! use mape_regress::regressors::{fit, FitConfig};
//! use mape_regress::losses::LossKind;
//!
//! let data = Dataset::intercept_only(vec![1.0, 2.0, 4.0]).unwrap();
//! let (model, report) = fit(&data, &FitConfig::new(LossKind::Mape)).unwrap();
//! assert_eq!(model.model.intercept, Some(1.0));
//! assert!((report.empirical_risk.mape.value() - 5.0 / 12.0).abs() < 1e-15);
//! ```

pub mod bounds;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod regressors;
pub mod wl1solver;

pub use error::{Error, Result};
pub use losses::{Dataset, LossKind, LossValue};
pub use regressors::{FitConfig, FitReport, FittedModel};
pub use wl1solver::{LinearModel, QuantileLevel, SolverConfig, SolverMethod, WeightVector};
