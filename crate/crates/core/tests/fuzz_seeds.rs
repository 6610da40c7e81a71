//! The checked-in fuzz corpus seeds must all be accepted by their parsers.

use std::fs;
use std::path::{Path, PathBuf};

use netloc_core::config::ExperimentConfig;
use netloc_core::geometry::NetworkTopology;
use netloc_core::harness::Bounds1dConfig;
use netloc_core::io::parse_trials_csv;
use netloc_core::noise::{parse_measurement_rows, Measurements};
use netloc_core::NetworkInstance;

fn seeds(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn instance_seeds_parse() {
    for p in seeds("instance_json") {
        NetworkInstance::from_json(&fs::read_to_string(&p).unwrap()).unwrap();
    }
}

#[test]
fn measurement_seeds_parse() {
    for p in seeds("measurements_csv") {
        assert!(!parse_measurement_rows(fs::read(&p).unwrap().as_slice())
            .unwrap()
            .is_empty());
    }
    let small =
        fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/measurements_csv/seed-small.csv"))
            .unwrap();
    let topology = NetworkTopology::new(3, 2, 2, vec![(0, 1), (1, 2)], vec![(0, 0), (2, 1)]).unwrap();
    let m = Measurements::read_csv(&topology, small.as_slice()).unwrap();
    assert_eq!(m.r, vec![0.25, 300.0]);
}

#[test]
fn config_seeds_parse() {
    for p in seeds("experiment_config") {
        ExperimentConfig::from_json(&fs::read_to_string(&p).unwrap()).unwrap();
    }
    for p in seeds("bounds_config") {
        Bounds1dConfig::from_json(&fs::read_to_string(&p).unwrap()).unwrap();
    }
}

#[test]
fn trial_seeds_parse() {
    for p in seeds("trials_csv") {
        assert!(!parse_trials_csv(fs::read(&p).unwrap().as_slice()).unwrap().is_empty());
    }
}

mod no_panic {
    use super::*;
    use proptest::prelude::*;

    fn mutate(seed: &[u8], edits: &[(usize, u8)]) -> Vec<u8> {
        let mut out = seed.to_vec();
        for &(pos, byte) in edits {
            if out.is_empty() {
                out.push(byte);
            } else {
                let at = pos % out.len();
                out[at] = byte;
            }
        }
        out
    }

    fn run_all(data: &[u8]) {
        let _ = parse_measurement_rows(data);
        let _ = parse_trials_csv(data);
        if let Ok(text) = std::str::from_utf8(data) {
            let _ = NetworkInstance::from_json(text);
            let _ = ExperimentConfig::from_json(text);
            let _ = Bounds1dConfig::from_json(text);
        }
    }

    proptest! {
        #[test]
        fn arbitrary_bytes(data in proptest::collection::vec(any::<u8>(), 0..512)) {
            run_all(&data);
        }

        #[test]
        fn mutated_seeds(edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 1..8)) {
            for target in ["instance_json", "measurements_csv", "experiment_config", "bounds_config", "trials_csv"] {
                for p in seeds(target) {
                    run_all(&mutate(&fs::read(&p).unwrap(), &edits));
                }
            }
        }
    }
}
