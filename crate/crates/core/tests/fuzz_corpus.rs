//! Replays the checked-in fuzz seeds through the parsers.

use std::fs;
use std::path::PathBuf;

use mape_regress::io::{model_to_json, parse_dataset_csv, parse_model_json, write_dataset_csv, TargetSelector};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn csv_seeds() {
    let mut parsed = 0;
    for (name, data) in seeds("csv_dataset") {
        let (sel, body) = match data.split_first() {
            Some((&b, rest)) if b < 8 => (TargetSelector::Index(b as usize), rest),
            _ => (TargetSelector::default(), &data[..]),
        };
        if let Ok(ds) = parse_dataset_csv(body, &sel) {
            parsed += 1;
            let mut out = Vec::new();
            write_dataset_csv(&mut out, &ds).unwrap();
            let back = parse_dataset_csv(&out, &TargetSelector::Index(ds.n_features())).unwrap();
            assert_eq!(back.y(), ds.y(), "{name}");
            assert_eq!(back.x(), ds.x(), "{name}");
        }
    }
    assert!(parsed >= 3);
}

#[test]
fn model_json_seeds() {
    for (name, data) in seeds("model_json") {
        let model = parse_model_json(std::str::from_utf8(&data).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_model_json(&model_to_json(&model).unwrap()).unwrap(), model);
    }
}
