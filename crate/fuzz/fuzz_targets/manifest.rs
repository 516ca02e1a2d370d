#![no_main]

use ensemble_fusion::score_io::{manifest_to_string, parse_manifest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_manifest(text, None) {
        let again = parse_manifest(&manifest_to_string(&m), None).expect("written manifest parses");
        assert_eq!(again, m);
    }
});
