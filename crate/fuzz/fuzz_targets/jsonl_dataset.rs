#![no_main]
use dp_stts::ingest::{parse_jsonl_dataset, write_jsonl_dataset, ParseOptions, TimeOrder};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let opts = ParseOptions {
        max_reject_ratio: 1.0,
        time_order: TimeOrder::NonDecreasing,
    };
    let Ok(parsed) = parse_jsonl_dataset(data, "fuzz", opts) else {
        return;
    };
    // whatever was accepted must survive a write/read cycle unchanged
    let mut buf = Vec::new();
    write_jsonl_dataset(&parsed.dataset, &mut buf).unwrap();
    let again = parse_jsonl_dataset(buf.as_slice(), "fuzz", opts).unwrap();
    assert!(again.rejects.is_empty());
    assert_eq!(again.dataset.trajectories, parsed.dataset.trajectories);
});
