#![no_main]

use boundzne::io::parse_lambda_sets;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sets) = parse_lambda_sets(text) {
        for set in sets {
            assert!(set.windows(2).all(|w| w[0] < w[1]));
            assert!(set.iter().all(|l| *l >= 1.0));
        }
    }
});
