//! Pointwise losses, extended-real loss values and empirical risk.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The three losses the crate fits and evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Mae,
    Mape,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Mse, LossKind::Mae, LossKind::Mape];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Mae => "mae",
            LossKind::Mape => "mape",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "mae" => Ok(LossKind::Mae),
            "mape" => Ok(LossKind::Mape),
            other => Err(Error::invalid(format!(
                "unknown loss '{other}' (expected mse, mae or mape)"
            ))),
        }
    }
}

/// A non-negative extended real: finite and `>= 0`, or `+inf`. Never NaN.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LossValue(f64);

impl LossValue {
    pub const ZERO: LossValue = LossValue(0.0);
    pub const INFINITY: LossValue = LossValue(f64::INFINITY);

    /// Returns `None` for NaN, negative values and `-inf`.
    pub fn new(value: f64) -> Option<Self> {
        (value >= 0.0).then_some(LossValue(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl Add for LossValue {
    type Output = LossValue;

    fn add(self, rhs: LossValue) -> LossValue {
        LossValue(self.0 + rhs.0)
    }
}

impl fmt::Display for LossValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::io::format_f64(self.0))
    }
}

// JSON has no infinity; +inf travels as the string "inf".
impl Serialize for LossValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LossValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(v) => LossValue::new(v)
                .ok_or_else(|| serde::de::Error::custom("loss value must be non-negative")),
            Repr::Str(s) if s == "inf" => Ok(LossValue::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad loss value '{s}'"))),
        }
    }
}

/// A sample of `(x_i, y_i)` pairs: an `n x d` design and `n` targets.
///
/// `d` may be zero (intercept-only problems).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: Vec<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "design rows vs targets",
                expected: y.len(),
                got: x.nrows(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite target at row {i}")));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (k % x.nrows(), k / x.nrows());
            return Err(Error::Data(format!(
                "non-finite feature at row {row}, column {col}"
            )));
        }
        Ok(Dataset {
            x,
            y,
            feature_names: None,
        })
    }

    /// Builds a dataset from row vectors of equal length.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                what: "row length",
                expected: d,
                got: bad.len(),
            });
        }
        let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Dataset::new(x, y)
    }

    /// A dataset with no features, for constant (intercept-only) models.
    pub fn intercept_only(y: Vec<f64>) -> Result<Self> {
        Dataset::new(DMatrix::zeros(y.len(), 0), y)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "feature names",
                expected: self.n_features(),
                got: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Keeps the rows for which `keep(i)` is true. Errors if nothing is left.
    pub fn select_rows(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let idx: Vec<usize> = (0..self.n_samples()).filter(|&i| keep(i)).collect();
        let x = self.x.select_rows(idx.iter());
        let y = idx.iter().map(|&i| self.y[i]).collect();
        let mut out = Dataset::new(x, y)?;
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }
}

/// Loss of predicting `p` when the truth is `y`.
///
/// MAPE follows the extended conventions `a/0 = +inf` for `a != 0` and
/// `0/0 = 1`.
pub fn pointwise_loss(kind: LossKind, p: f64, y: f64) -> LossValue {
    let diff = p - y;
    match kind {
        LossKind::Mse => LossValue(diff * diff),
        LossKind::Mae => LossValue(diff.abs()),
        LossKind::Mape => {
            if y == 0.0 {
                if p == 0.0 {
                    LossValue(1.0)
                } else {
                    LossValue::INFINITY
                }
            } else {
                LossValue(diff.abs() / y.abs())
            }
        }
    }
}

/// Mean pointwise loss; `+inf` as soon as one term is infinite.
pub fn empirical_risk(kind: LossKind, predictions: &[f64], y: &[f64]) -> Result<LossValue> {
    if predictions.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions vs targets",
            expected: y.len(),
            got: predictions.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::invalid("empirical risk of an empty sample"));
    }
    let total = predictions
        .iter()
        .zip(y)
        .fold(LossValue::ZERO, |acc, (&p, &t)| acc + pointwise_loss(kind, p, t));
    Ok(LossValue(total.0 / y.len() as f64))
}

/// Uniform bound `1 + B_G / lambda` on the MAPE loss of any predictor with
/// `|g| <= B_G` against targets with `|y| >= lambda`.
pub fn mape_envelope(bound_g: f64, lambda: f64) -> Result<f64> {
    if !(bound_g > 0.0 && bound_g.is_finite()) {
        return Err(Error::invalid(format!("B_G must be positive, got {bound_g}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    Ok(1.0 + bound_g / lambda)
}
