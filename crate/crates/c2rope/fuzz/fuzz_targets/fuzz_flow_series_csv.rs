#![no_main]

use c2rope::export::{flow_series_csv, parse_flow_series_csv};
use libfuzzer_sys::fuzz_target;

// Anything the parser accepts must re-emit and re-parse to the same
// series (emit → parse is lossless: values print in shortest
// round-trip form).
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(series) = parse_flow_series_csv(text) {
        let emitted = flow_series_csv(&series, 0, "fuzz");
        let back = parse_flow_series_csv(&emitted).expect("emitted series must parse");
        assert_eq!(back, series);
    }
});
