//! CSV datasets, model JSON and number formatting.
//!
//! Datasets are RFC 4180 CSV with a mandatory header row, `.` as decimal
//! point and UTF-8 text. One column is the target, selected by name or
//! zero-based index; every other column is a feature.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::losses::Dataset;
use crate::regressors::FittedModel;

/// Formats like C's `%.17g`: 17 significant digits, enough to round-trip
/// any `f64`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (16 - exp) as usize, v);
        trim_fraction(&fixed).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Which CSV column holds the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetSelector {
    Name(String),
    Index(usize),
}

impl Default for TargetSelector {
    fn default() -> Self {
        TargetSelector::Name("y".into())
    }
}

/// Reads a dataset from CSV text.
pub fn read_dataset_csv<R: Read>(reader: R, target: &TargetSelector) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Data("missing header row".into()));
    }
    let target_col = match target {
        TargetSelector::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("no column named '{name}' in header")))?,
        TargetSelector::Index(i) => {
            if *i >= headers.len() {
                return Err(Error::Data(format!(
                    "target index {i} out of range ({} columns)",
                    headers.len()
                )));
            }
            *i
        }
    };
    let d = headers.len() - 1;
    let mut values: Vec<f64> = Vec::new();
    let mut y = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "row {row}, column '{}': '{field}' is not a number",
                    headers[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {row}, column '{}': non-finite value",
                    headers[col]
                )));
            }
            if col == target_col {
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let x = DMatrix::from_row_slice(y.len(), d, &values);
    let names = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_col)
        .map(|(_, h)| h.clone())
        .collect();
    Dataset::new(x, y)?.with_feature_names(names)
}

/// Parses a dataset from raw bytes.
pub fn parse_dataset_csv(bytes: &[u8], target: &TargetSelector) -> Result<Dataset> {
    read_dataset_csv(bytes, target)
}

/// Writes features then the target column `y`.
pub fn write_dataset_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.n_features()).map(|j| format!("x{j}")).collect(),
    };
    header.push("y".into());
    wtr.write_record(&header)?;
    for i in 0..data.n_samples() {
        let mut rec: Vec<String> = data.x().row(i).iter().map(|&v| format_f64(v)).collect();
        rec.push(format_f64(data.y()[i]));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses and validates a model JSON document.
pub fn parse_model_json(text: &str) -> Result<FittedModel> {
    let model: FittedModel = serde_json::from_str(text)?;
    model.validate()?;
    Ok(model)
}

pub fn model_to_json(model: &FittedModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;
    use crate::wl1solver::LinearModel;
    use proptest::prelude::*;

    #[test]
    fn format_like_percent_17g() {
        assert_eq!(format_f64(1.25 / 3.0), "0.41666666666666669");
        assert_eq!(format_f64(1.0), "1");
        assert_eq!(format_f64(7.0), "7");
        assert_eq!(format_f64(-2.5), "-2.5");
        assert_eq!(format_f64(0.1), "0.10000000000000001");
        assert_eq!(format_f64(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_f64(1e17), "1e+17");
        assert_eq!(format_f64(123456.0), "123456");
        assert_eq!(format_f64(0.0001), "0.0001");
        assert_eq!(format_f64(f64::INFINITY), "inf");
        assert_eq!(format_f64(0.0), "0");
    }

    #[test]
    fn csv_by_name_and_index() {
        let text = "a,y,b\n1,2,3\n4,5,6\n";
        let d = parse_dataset_csv(text.as_bytes(), &TargetSelector::Name("y".into())).unwrap();
        assert_eq!(d.y(), &[2.0, 5.0]);
        assert_eq!(d.x()[(1, 1)], 6.0);
        assert_eq!(d.feature_names().unwrap(), &["a".to_string(), "b".to_string()]);
        let d = parse_dataset_csv(text.as_bytes(), &TargetSelector::Index(0)).unwrap();
        assert_eq!(d.y(), &[1.0, 4.0]);
    }

    #[test]
    fn csv_errors_name_the_problem() {
        let sel = TargetSelector::default();
        let err = parse_dataset_csv(b"y\n1\nx\n", &sel).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
        assert!(parse_dataset_csv(b"y\n", &sel).is_err());
        assert!(parse_dataset_csv(b"", &sel).is_err());
        assert!(parse_dataset_csv(b"a\n1\n", &sel).is_err());
        assert!(parse_dataset_csv(b"y,a\n1,2\n3\n", &sel).is_err());
        assert!(parse_dataset_csv(b"y\nNaN\n", &sel).is_err());
        assert!(parse_dataset_csv(b"y\n1\n", &TargetSelector::Index(3)).is_err());
    }

    #[test]
    fn model_json_validation() {
        let ok = r#"{"loss":"mae","beta":[1.5],"intercept":null,"clamp":2.0,"lambda_screen":0.5}"#;
        let m = parse_model_json(ok).unwrap();
        assert_eq!(m.loss, LossKind::Mae);
        assert!(parse_model_json(r#"{"loss":"mae","beta":[1.5],"intercept":null,"clamp":-2.0,"lambda_screen":null}"#).is_err());
        assert!(parse_model_json(r#"{"loss":"mae","beta":[1.5],"intercept":null,"clamp":null,"lambda_screen":null,"extra":1}"#).is_err());
        assert!(parse_model_json(r#"{"loss":"mae","beta":[1.5]}"#).is_ok());
        assert!(parse_model_json(r#"{"loss":"mae","beta":[1e999]}"#).is_err());
        assert!(parse_model_json("[]").is_err());
    }

    proptest! {
        #[test]
        fn formatted_numbers_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }

        #[test]
        fn model_json_round_trips_bit_exactly(
            beta in proptest::collection::vec(-1e300f64..1e300, 0..4),
            intercept in proptest::option::of(any::<f64>().prop_filter("finite", |v| v.is_finite())),
        ) {
            let m = FittedModel {
                loss: LossKind::Mape,
                model: LinearModel::new(beta, intercept),
                lambda_screen: Some(1e-3),
            };
            let back = parse_model_json(&model_to_json(&m).unwrap()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
