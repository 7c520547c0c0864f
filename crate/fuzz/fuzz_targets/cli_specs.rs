#![no_main]
use dp_stts_cli::spec::{
    parse_bbox, parse_epsilons, parse_eval_grid, parse_grid, parse_time_window,
};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(b) = parse_bbox(s) {
        assert!(b.lat_min < b.lat_max && b.lon_min < b.lon_max);
    }
    if let Ok(w) = parse_time_window(s) {
        assert!(w.start < w.end);
    }
    if let Ok((w, h, t)) = parse_grid(s) {
        assert!(w > 0 && h > 0 && t > 0);
    }
    let _ = parse_eval_grid(s);
    if let Ok(v) = parse_epsilons(s) {
        assert!(v.iter().all(|e| *e > 0.0 && e.is_finite()));
    }
});
