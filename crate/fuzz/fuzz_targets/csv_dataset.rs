#![no_main]
use libfuzzer_sys::fuzz_target;
use mape_regress::io::{parse_dataset_csv, write_dataset_csv, TargetSelector};

fuzz_target!(|data: &[u8]| {
    let (sel, body) = match data.split_first() {
        Some((&b, rest)) if b < 8 => (TargetSelector::Index(b as usize), rest),
        _ => (TargetSelector::default(), data),
    };
    if let Ok(ds) = parse_dataset_csv(body, &sel) {
        assert!(ds.y().iter().all(|v| v.is_finite()));
        let mut out = Vec::new();
        write_dataset_csv(&mut out, &ds).unwrap();
        let back = parse_dataset_csv(&out, &TargetSelector::Index(ds.n_features())).unwrap();
        assert_eq!(back.x(), ds.x());
        assert_eq!(back.y(), ds.y());
    }
});
