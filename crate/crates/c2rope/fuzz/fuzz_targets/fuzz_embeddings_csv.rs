#![no_main]

use c2rope::export::parse_embeddings_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_embeddings_csv(text) {
        // accepted rows are rectangular and finite
        if let Some(first) = rows.first() {
            assert!(rows.iter().all(|r| r.len() == first.len()));
        }
        assert!(rows.iter().flatten().all(|v| v.is_finite()));
        // shortest round-trip rendering reparses to the same values
        let rendered: String = rows
            .iter()
            .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
            .collect();
        assert_eq!(parse_embeddings_csv(&rendered).unwrap(), rows);
    }
});
