#![no_main]
use libfuzzer_sys::fuzz_target;
use mape_regress::io::{model_to_json, parse_model_json};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = parse_model_json(text) {
            let json = model_to_json(&model).unwrap();
            assert_eq!(parse_model_json(&json).unwrap(), model);
        }
    }
});
