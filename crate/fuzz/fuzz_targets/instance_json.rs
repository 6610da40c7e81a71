#![no_main]

use libfuzzer_sys::fuzz_target;
use netloc_core::NetworkInstance;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(instance) = NetworkInstance::from_json(text) {
        let again = NetworkInstance::from_json(&instance.to_json().unwrap()).unwrap();
        assert_eq!(again, instance);
    }
});
