#![no_main]

use boundzne::io::parse_delta_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    let _ = parse_delta_line(line);
});
