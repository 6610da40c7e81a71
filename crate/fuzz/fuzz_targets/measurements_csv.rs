#![no_main]

use libfuzzer_sys::fuzz_target;
use netloc_core::geometry::NetworkTopology;
use netloc_core::noise::{parse_measurement_rows, Measurements};

fuzz_target!(|data: &[u8]| {
    let _ = parse_measurement_rows(data);
    let topology = NetworkTopology::new(3, 2, 2, vec![(0, 1), (1, 2)], vec![(0, 0), (2, 1)]).unwrap();
    if let Ok(m) = Measurements::read_csv(&topology, data) {
        assert_eq!(m.d.len(), 2);
        assert_eq!(m.r.len(), 2);
        assert!(m.d.iter().chain(&m.r).all(|v| v.is_finite() && *v >= 0.0));
    }
});
