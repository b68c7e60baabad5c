#![no_main]

use heurql::pgrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = pgrid::parse(text) {
        assert!(grid.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(pgrid::parse(&pgrid::emit(&grid)).expect("emitted grid parses"), grid);
    }
});
