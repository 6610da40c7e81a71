#![no_main]

use libfuzzer_sys::fuzz_target;
use netloc_core::harness::Bounds1dConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = Bounds1dConfig::from_json(text);
});
