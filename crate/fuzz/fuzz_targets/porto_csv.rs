#![no_main]
use dp_stts::ingest::{parse_porto_csv, ParseOptions, PORTO_SAMPLING_INTERVAL};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let opts = ParseOptions {
        max_reject_ratio: 1.0,
        ..Default::default()
    };
    if let Ok(p) = parse_porto_csv(data, "fuzz", PORTO_SAMPLING_INTERVAL, opts) {
        for t in &p.dataset.trajectories {
            assert!(!t.points.is_empty());
            assert!(t.points.windows(2).all(|w| w[0].time < w[1].time));
        }
    }
});
