#![no_main]

use boundzne::io::parse_series;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(series) = parse_series(text) {
        assert!(series.lambdas().windows(2).all(|w| w[0] < w[1]));
        assert!(series.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
});
