#![no_main]

use heurql::harness::metrics_csv::{read_rows, write_rows};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_rows(data) {
        let mut out = Vec::new();
        write_rows(&rows, &mut out).expect("in-memory write");
        let _ = read_rows(&out[..]);
    }
});
