#![no_main]

use boundzne::models::ModelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<ModelSpec>() {
        assert_eq!(spec.to_string().parse::<ModelSpec>(), Ok(spec));
    }
    if let Ok(arms) = ModelSpec::parse_arms(text) {
        assert!(!arms.is_empty() && arms.len() <= 2);
    }
});
