#![no_main]
use libfuzzer_sys::fuzz_target;
use mape_regress_cli::parse_args;

// NUL-separated argv; only parsing runs, so no files are touched.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let argv = std::iter::once("mape-regress").chain(text.split('\0'));
        let _ = parse_args(argv);
    }
});
