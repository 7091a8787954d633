#![no_main]

use c2rope::posindex::GridShape;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = text.parse::<GridShape>() {
        let back: GridShape = grid.to_string().parse().expect("display must reparse");
        assert_eq!(back, grid);
        assert_eq!(grid.len(), grid.rows() * grid.cols());
    }
});
