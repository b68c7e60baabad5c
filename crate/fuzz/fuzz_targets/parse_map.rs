#![no_main]

use heurql::GridMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(map) = GridMap::parse(text) {
        // Anything accepted must survive a round trip.
        let again = GridMap::parse(&map.to_text()).expect("emitted map parses");
        assert_eq!(again, map);
    }
});
