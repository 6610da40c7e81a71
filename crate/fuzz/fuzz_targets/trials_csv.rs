#![no_main]

use libfuzzer_sys::fuzz_target;
use netloc_core::io::{parse_trials_csv, write_rows};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_trials_csv(data) {
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        assert_eq!(parse_trials_csv(buf.as_slice()).unwrap(), rows);
    }
});
