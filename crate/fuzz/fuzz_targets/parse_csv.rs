#![no_main]

use default_prior::eb::parse_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    match parse_csv(data) {
        Ok(records) => {
            for r in &records {
                assert!(r.line >= 2);
            }
        }
        Err(e) => assert!(!e.issues.is_empty()),
    }
});
