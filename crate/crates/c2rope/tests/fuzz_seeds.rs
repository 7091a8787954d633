//! Replays the checked-in fuzz corpus seeds through their parsers, so the
//! seeds stay exercised by plain `cargo test` between fuzzing sessions.
//! Malformed seeds must error cleanly; well-formed ones must round-trip.

use std::fs;
use std::path::PathBuf;

use c2rope::config::RunConfig;
use c2rope::export::{flow_series_csv, parse_embeddings_csv, parse_flow_series_csv};
use c2rope::posindex::GridShape;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("corpus dir {}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn run_config_seeds_parse_or_error_cleanly() {
    for (name, bytes) in seeds("fuzz_run_config") {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if let Ok(cfg) = RunConfig::parse(text) {
            let back = RunConfig::parse(&cfg.to_config_text()).unwrap();
            assert_eq!(back, cfg, "{name} drifted through its canonical render");
        }
    }
}

#[test]
fn grid_shape_seeds_parse_or_error_cleanly() {
    for (name, bytes) in seeds("fuzz_grid_shape") {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if let Ok(grid) = text.parse::<GridShape>() {
            let back: GridShape = grid.to_string().parse().unwrap();
            assert_eq!(back, grid, "{name} drifted through Display");
        }
    }
}

#[test]
fn flow_series_seeds_round_trip() {
    let mut parsed = 0;
    for (name, bytes) in seeds("fuzz_flow_series_csv") {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if let Ok(series) = parse_flow_series_csv(text) {
            let emitted = flow_series_csv(&series, 0, "seed-replay");
            assert_eq!(
                parse_flow_series_csv(&emitted).unwrap(),
                series,
                "{name} drifted through emit/parse"
            );
            parsed += 1;
        }
    }
    assert!(parsed >= 2, "expected at least 2 well-formed flow seeds");
}

#[test]
fn embeddings_seeds_parse_or_error_cleanly() {
    let mut parsed = 0;
    for (name, bytes) in seeds("fuzz_embeddings_csv") {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            continue;
        };
        if let Ok(rows) = parse_embeddings_csv(text) {
            if let Some(first) = rows.first() {
                assert!(
                    rows.iter().all(|r| r.len() == first.len()),
                    "{name} produced ragged rows"
                );
            }
            assert!(rows.iter().flatten().all(|v| v.is_finite()));
            parsed += 1;
        }
    }
    assert!(
        parsed >= 2,
        "expected at least 2 well-formed embedding seeds"
    );
}
