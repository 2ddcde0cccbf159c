#![no_main]

use boundzne::io::{parse_record_line, write_dataset_to};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(record) = parse_record_line(line) {
        assert!(record.expectations.iter().all(|e| (-1.0..=1.0).contains(e)));
        assert!(record.series().is_ok());
        let mut buf = Vec::new();
        write_dataset_to(std::slice::from_ref(&record), &mut buf).unwrap();
        let again = parse_record_line(std::str::from_utf8(&buf).unwrap().trim_end()).unwrap();
        assert_eq!(again, record);
    }
});
