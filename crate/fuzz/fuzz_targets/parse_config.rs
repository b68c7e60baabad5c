#![no_main]

use heurql::harness::config::Settings;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(settings) = Settings::parse(text) {
        let _ = settings.parsed::<f64>("alpha");
        let _ = settings.parsed::<u64>("seed");
        let _ = settings.get("map");
    }
});
